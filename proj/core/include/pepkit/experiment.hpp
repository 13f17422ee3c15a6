#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pepkit/cert.hpp"
#include "pepkit/descent.hpp"
#include "pepkit/entropic.hpp"
#include "pepkit/pep.hpp"

namespace pepkit {

enum class ExperimentKind { PepSweep, CertIdentity, DescentSweep, IpmRun, SamplerCheck };

std::string to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(const std::string& s);

/// An ε grid entry: a number, or "max" for the family's largest admissible ε.
struct EpsValue {
  double value = 0.0;
  bool max = false;
};

struct PepSweepParams {
  StepRule::Kind step = StepRule::Kind::ExactLineSearch;
  std::vector<Variant> variants{Variant::GradientNorm, Variant::Distance, Variant::FunctionValue};
  std::vector<double> kappas{0.1, 0.25, 0.5};
  std::vector<EpsValue> epss{{0.0, false}, {0.05, false}};
  std::vector<double> gamma_fractions{0.0, 0.5, 1.0};  // of γ_max, fixed step only
  double L = 1.0;
  double R = 1.0;
  double tol = 1e-4;
};

/// Replaces one multiplier by (1 + rel)× its value in every certificate of a family.
struct CertMutation {
  CertFamily family = CertFamily::FixedGradient;
  std::string multiplier;
  double rel = 1e-3;
};

struct CertIdentityParams {
  std::vector<CertFamily> families{CertFamily::ElsGradient, CertFamily::ElsDistance, CertFamily::FixedGradient,
                                   CertFamily::FixedDistance, CertFamily::FixedFunctionValue};
  std::size_t draws = 10;
  std::size_t points = 1000;
  double tol = 1e-9;
  std::optional<CertMutation> mutation;
};

struct DescentSweepParams {
  std::vector<double> kappas{0.1, 0.25, 0.5};
  std::vector<double> epss{0.0, 0.05};
  /// "els", "fixed_max", "fixed_half".
  std::vector<std::string> steps{"els", "fixed_max", "fixed_half"};
  std::vector<DirectionMode> modes{DirectionMode::Exact, DirectionMode::AdversarialWorst, DirectionMode::RandomCone};
  std::size_t dim = 2;
  std::size_t starts = 8;
  int max_iter = 30;
  double tol = 1e-9;
};

struct IpmRunParams {
  IpmConfig config;
  std::vector<std::uint64_t> seeds{0};
  /// Fraction of runs that must pass the audit (sampled mode is statistical).
  double min_pass_fraction = 1.0;
};

struct SamplerCheckParams {
  Box box{{0.0, 0.0}, {1.0, 1.0}};
  std::vector<Vector> thetas{{0.0, 0.0}, {1.0, 0.0}};
  std::size_t count = 10000;
  std::size_t batches = 50;
  double sigmas = 3.0;
  HitAndRunOptions chain;
};

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::PepSweep;
  std::string name;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  PepSweepParams pep;
  CertIdentityParams cert;
  DescentSweepParams descent;
  IpmRunParams ipm;
  SamplerCheckParams sampler;
};

/// Parses a JSON spec. Throws std::invalid_argument with the offending key.
ExperimentSpec parse_experiment_spec(const std::string& json_text);
ExperimentSpec load_experiment_spec(const std::filesystem::path& file);

struct Check {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct ExperimentResult {
  std::vector<Check> checks;
  std::vector<std::filesystem::path> artifacts;
  std::size_t rows = 0;
  bool ok() const;
};

/// Runs the experiment and writes <name>.csv (plus <name>.jsonl traces for
/// IPM runs) and <name>.summary.json into out_dir. Each file is written to a
/// temporary name and renamed into place.
ExperimentResult run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir);

struct ReportOutcome {
  int exit_code = 2;  // 0 all pass, 1 some check failed, 2 no artifacts
  std::string text;
};

/// Summarizes every *.summary.json in dir.
ReportOutcome report(const std::filesystem::path& dir);

}  // namespace pepkit
