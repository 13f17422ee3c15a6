#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "pepkit/funcs.hpp"
#include "pepkit/linalg.hpp"

namespace pepkit {

struct Box {
  Vector lo, hi;
};

/// {x : A x ≤ b}. Must be bounded with nonempty interior.
struct Polytope {
  Matrix A;
  Vector b;
};

using ConvexBody = std::variant<Box, Polytope>;

std::size_t body_dim(const ConvexBody& k);
/// Strict interior membership.
bool body_contains(const ConvexBody& k, std::span<const double> x);
Polytope to_polytope(const Box& box);

/// Density ∝ exp(−θᵀx) on a convex body.
struct BoltzmannModel {
  ConvexBody domain;
  Vector theta;

  std::size_t dim() const { return body_dim(domain); }
  void validate() const;
};

// Exponential tilt of the uniform law on [0, 1]: density ∝ e^{−t y}.
// Small |t| uses the Bernoulli series.
double unit_log_partition(double t);
double unit_mean(double t);
double unit_variance(double t);
/// t with unit_mean(t) = y. Takes 1 − y separately so points near 1 keep
/// their relative accuracy.
double unit_mean_inverse(double y, double one_minus_y);

struct LogPartition {
  double A = 0.0;
  Vector grad;    // −E[X]
  SymMatrix hess;  // Cov(X), diagonal on a box
};

/// Closed-form A(θ) = ln ∫ exp(−θᵀx) dx and its derivatives. Box domains only.
LogPartition log_partition_box(const BoltzmannModel& model);
LogPartition log_partition_box(const Box& box, std::span<const double> theta);

/// x(η) = −∇A(ηθ̂), the minimizer of ηθ̂ᵀx + A*(−x).
Vector central_path_point(const Box& box, std::span<const double> theta_hat, double eta);

/// θ*(x) = argmax_θ [−θᵀx − A(θ)], i.e. the tilt whose mean is x.
Vector conjugate_point(const Box& box, std::span<const double> x);

/// ∇f(x0) for f = ηθ̂ᵀx + A*(−x): ηθ̂ − θ*(x0).
Vector entropic_gradient(std::span<const double> x0, double eta, std::span<const double> theta_hat, const Box& box);

/// c ᵀx + A*(−x) on an open box. The barrier part is separable.
class EntropicBarrierBox final : public FunctionOracle {
 public:
  EntropicBarrierBox(Box box, Vector c = {});

  std::size_t dim() const override { return box_.lo.size(); }
  double value(std::span<const double> x) const override;
  Vector gradient(std::span<const double> x) const override;
  SymMatrix hessian(std::span<const double> x) const override;
  DomainSpec domain() const override { return DomainSpec::box(box_.lo, box_.hi); }
  ClassMeta meta() const override;
  std::optional<Vector> minimizer() const override;

  const Box& box() const { return box_; }

 private:
  void require_interior(std::span<const double> x) const;
  Box box_;
  Vector c_;
};

/// ‖H⁻¹ − ∇²A(ηθ̂)‖_F / ‖∇²A(ηθ̂)‖_F where H is the central-difference
/// Jacobian of entropic_gradient at x(η).
double hessian_conjugacy_check(const Box& box, double eta, std::span<const double> theta_hat);

struct HitAndRunOptions {
  std::size_t burn_in = 0;  // 0 means 50·n
  std::size_t thinning = 10;
  /// Directions are drawn from N(0, C) instead of uniformly on the sphere.
  /// A covariance estimate of the target keeps chords long on thin laws.
  std::optional<SymMatrix> direction_cov;
};

/// Hit-and-run chain targeting the model's density. Each step picks a
/// random direction, intersects the line with the body and draws the new
/// point from the exponential law on the chord by inverse CDF.
std::vector<Vector> hit_and_run(const BoltzmannModel& model, std::span<const double> x_start, std::size_t count,
                                std::uint64_t seed, HitAndRunOptions options = {});

struct CovarianceEstimate {
  SymMatrix sigma_hat;
  std::size_t n_samples = 0;
  /// Sandwich accuracy the estimate has been attested at; empty until checked.
  std::optional<double> eps_hat;
};

/// (1/N) Σ (X_i − X̄)(X_i − X̄)ᵀ.
CovarianceEstimate empirical_covariance(const std::vector<Vector>& samples);

/// Extreme eigenvalues of Σ̂^{-1/2} Σ Σ̂^{-1/2}.
struct SandwichSpectrum {
  double lo = 0.0;
  double hi = 0.0;
  /// Smallest ε̂ for which both sandwich conditions hold.
  double tight_eps = 0.0;
};
SandwichSpectrum sandwich_spectrum(const SymMatrix& sigma, const SymMatrix& sigma_hat);

/// (1−ε̂)Σ̂ ⪯ Σ ⪯ (1+ε̂)Σ̂ and (1−ε̂)Σ̂⁻¹ ⪯ Σ⁻¹ ⪯ (1+ε̂)Σ̂⁻¹.
/// Throws DimensionError on size mismatch and std::invalid_argument when Σ̂ is singular.
bool sandwich_check(const SymMatrix& sigma, const SymMatrix& sigma_hat, double eps_hat);

/// Marks est as attested at eps_hat when the sandwich against sigma holds.
bool attest(CovarianceEstimate& est, const SymMatrix& sigma, double eps_hat);

/// ε′√((1+ε̂)/(1−ε̂)) + √(2ε̂/(1−ε̂)).
double combined_eps(double eps_hat, double eps_prime);

class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ApproxDirection {
  Vector d;
  double eps_effective = 0.0;
};

/// d̃ = Σ̂ g̃ with the certified relative error bound in the minimizer metric.
/// Throws PreconditionError unless est has been attested and eps_prime ≥ 0.
ApproxDirection approx_direction(const CovarianceEstimate& est, std::span<const double> g_tilde, double eps_prime);

/// ‖d − Σg‖_{Σ⁻¹} / ‖Σg‖_{Σ⁻¹}.
double direction_error(std::span<const double> d, std::span<const double> g, const SymMatrix& sigma);

/// Autotuned sample size: N doubles from n_start until the covariance of one
/// batch passes the sandwich against an independent validation batch at
/// eps_target, or n_max is reached. Each round's chains draw directions from
/// the previous round's estimate.
struct AutotuneResult {
  std::size_t n_samples = 0;
  bool converged = false;
  double validation_eps = 0.0;
  std::optional<SymMatrix> sigma_hat;  // last training estimate
};
AutotuneResult autotune_sample_size(const BoltzmannModel& model, std::span<const double> x_start, double eps_target,
                                    std::size_t n_start, std::size_t n_max, std::uint64_t seed,
                                    HitAndRunOptions options = {});

// ---------------------------------------------------------------------------
// Short-step interior point method with the entropic barrier on a box.

struct IpmConfig {
  enum class OracleMode { Exact, Sampled };

  Box box;
  Vector theta_hat;
  double delta = 0.25;
  double eps_hat = 0.0;
  double eps_prime = 0.0;
  double eps_bar = 1e-3;
  double eta0 = 1.0;
  std::optional<double> vartheta;  // defaults to n
  /// Defaults to x(η0).
  std::optional<Vector> x0;
  OracleMode mode = OracleMode::Exact;

  // Sampled mode.
  std::size_t n_samples = 0;  // 0: autotune
  std::uint64_t seed = 0;
  /// Validation sandwich target. Two independent batches differ by about √2
  /// times the error of either one, so this aims at 1/32 per batch.
  double autotune_eps = 1.4142135623730951 / 32.0;
  std::size_t autotune_max = 1u << 16;
  HitAndRunOptions chain;

  double barrier_parameter() const;
  double combined() const { return combined_eps(eps_hat, eps_prime); }
  /// Throws std::invalid_argument on bad fields, PreconditionError when the
  /// start is not within δ/2 of x(η0) or combined ε > 1/32.
  void validate() const;
};

/// ⌈20√ϑ ln(ϑ/(η0 ε̄))⌉.
int iteration_ceiling(double vartheta, double eta0, double eps_bar);
/// Gap bound for any x within δ/2 of x(η): ϑ/η at x(η) plus
/// ‖θ̂‖*_{x(η)}·δ/2 ≤ √ϑ·δ/(2η).
double iterate_gap_bound(double vartheta, double delta, double eta);
/// Iterations the η schedule needs before iterate_gap_bound ≤ ε̄.
int schedule_iterations(double vartheta, double eta0, double eps_bar, double delta);

struct IpmIteration {
  int k = 0;
  double eta = 0.0;
  Vector x;
  Vector central;  // x(η_k)
  double proximity = 0.0;        // ‖x_k − x(η_k)‖_{x(η_k)}
  double gap_bound = 0.0;        // iterate_gap_bound at η_k
  double objective_gap = 0.0;    // θ̂ᵀx_k − min
  // Filled when a step is taken from this iterate.
  std::optional<double> direction_error;
  std::optional<double> certified_eps;
  std::optional<std::size_t> n_samples;
  std::optional<double> step_distance;   // ‖x_{k+1} − x(η_k)‖_{x(η_k)}
  std::optional<double> target_drift;    // ‖x(η_{k+1}) − x(η_k)‖_{x(η_k)}
  std::optional<double> cross_distance;  // ‖x_{k+1} − x(η_{k+1})‖_{x(η_k)}
};

struct IpmTrace {
  enum class Status { Converged, ProximityViolation, InteriorExit, IterationCap };
  Status status = Status::IterationCap;
  std::vector<IpmIteration> iterations;
  double gamma = 0.0;
  double eps = 0.0;
  double vartheta = 0.0;
  int ceiling = 0;
  std::string message;

  /// Steps taken (the last record is the final iterate).
  int steps() const { return iterations.empty() ? 0 : static_cast<int>(iterations.size()) - 1; }
  double max_proximity() const;
  const IpmIteration& final() const { return iterations.back(); }
};

IpmTrace ipm_run(const IpmConfig& config);

/// One JSON object per iteration.
std::string ipm_trace_to_jsonl(const IpmTrace& trace);
std::string to_string(IpmTrace::Status s);

struct IpmAudit {
  bool proximity_ok = true;   // every proximity ≤ δ/2
  bool within_ceiling = true;
  bool gap_ok = true;         // final θ̂ᵀx − min ≤ ε̄
  bool conversion_ok = true;  // self-concordance metric conversion on every step
  double max_proximity = 0.0;
  double max_drift = 0.0;
  bool ok() const { return proximity_ok && within_ceiling && gap_ok && conversion_ok; }
};
IpmAudit audit_ipm(const IpmTrace& trace, const IpmConfig& config, double tol = 1e-9);

/// Bounds of the one-iteration proximity argument, evaluated from their
/// formulas: target drift k + 3k²/(1−k)³, step contraction
/// (1−κ_δ)/(1+κ_δ) + ε with κ_δ = (1−δ)⁴, the post-step distance, the
/// triangle sum and the metric conversion.
struct ProofChain {
  double drift = 0.0;
  double contraction = 0.0;
  double step = 0.0;
  double triangle = 0.0;
  double conversion = 0.0;
  double target = 0.0;  // δ/2
  bool closes() const { return conversion < target; }
};
ProofChain proof_chain(double delta, double k, double eps);

/// θ̂ᵀx − min_box θ̂ᵀx.
double objective_gap(const Box& box, std::span<const double> theta_hat, std::span<const double> x);

}  // namespace pepkit
