#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pepkit/experiment.hpp"

namespace {

struct RunArgs {
  std::string spec;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string out = "out";
};

int run_kind(pepkit::ExperimentKind kind, const RunArgs& args) {
  pepkit::ExperimentSpec spec;
  try {
    spec = pepkit::load_experiment_spec(args.spec);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  if (spec.kind != kind) {
    std::cerr << "error: spec kind '" << pepkit::to_string(spec.kind) << "' does not match subcommand ('"
              << pepkit::to_string(kind) << "' expected)\n";
    return 2;
  }
  if (args.seed) {
    spec.seed = *args.seed;
    if (kind == pepkit::ExperimentKind::IpmRun) spec.ipm.seeds = {*args.seed};
  }
  if (args.threads) spec.threads = *args.threads;

  try {
    const pepkit::ExperimentResult res = pepkit::run_experiment(spec, args.out);
    for (const auto& c : res.checks)
      std::cout << (c.pass ? "PASS " : "FAIL ") << spec.name << '/' << c.name << ": " << c.value << " (threshold "
                << c.threshold << ")\n";
    for (const auto& a : res.artifacts) std::cout << "wrote " << a.string() << '\n';
    return res.ok() ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pepkit: performance estimation, certificates, inexact descent and entropic interior point runs"};
  app.require_subcommand(1);

  struct Sub {
    const char* name;
    const char* help;
    pepkit::ExperimentKind kind;
  };
  const Sub subs[] = {
      {"pep", "PEP sweep: SDP optimum against the analytic rate", pepkit::ExperimentKind::PepSweep},
      {"cert", "certificate identity check on random Gram points", pepkit::ExperimentKind::CertIdentity},
      {"descent", "inexact descent runs audited against the rates", pepkit::ExperimentKind::DescentSweep},
      {"ipm", "short-step entropic interior point method", pepkit::ExperimentKind::IpmRun},
      {"sample", "hit-and-run calibration against exact moments", pepkit::ExperimentKind::SamplerCheck},
  };

  RunArgs args;
  std::optional<pepkit::ExperimentKind> chosen;
  for (const auto& s : subs) {
    CLI::App* sc = app.add_subcommand(s.name, s.help);
    sc->add_option("--spec", args.spec, "JSON experiment spec")->required()->check(CLI::ExistingFile);
    sc->add_option("--seed", args.seed, "override the spec seed");
    sc->add_option("--threads", args.threads, "worker threads for grid points");
    sc->add_option("--out", args.out, "artifact directory")->capture_default_str();
    sc->callback([&chosen, k = s.kind] { chosen = k; });
  }

  std::string report_dir = "out";
  CLI::App* rep = app.add_subcommand("report", "summarize artifacts; exit 1 on any failed check, 2 if none found");
  rep->add_option("dir", report_dir, "artifact directory")->capture_default_str();
  bool do_report = false;
  rep->callback([&] { do_report = true; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (do_report) {
    const pepkit::ReportOutcome r = pepkit::report(report_dir);
    (r.exit_code == 2 ? std::cerr : std::cout) << r.text;
    return r.exit_code;
  }
  return run_kind(*chosen, args);
}
