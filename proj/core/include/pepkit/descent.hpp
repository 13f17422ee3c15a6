#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pepkit/cert.hpp"
#include "pepkit/funcs.hpp"
#include "pepkit/metric.hpp"
#include "pepkit/pep.hpp"

namespace pepkit {

enum class DirectionMode { Exact, AdversarialWorst, RandomCone };

/// Inner product used for gradients, directions and norms.
///   Reference             fixed operator (Euclidean unless given)
///   IntrinsicAt           Hessian at a fixed point
///   IntrinsicAtMinimizer  Hessian at the oracle's known minimizer
///   IntrinsicAtIterate    Hessian at the current iterate (re-centred every step)
struct MetricChoice {
  enum class Kind { Reference, IntrinsicAt, IntrinsicAtMinimizer, IntrinsicAtIterate };
  Kind kind = Kind::Reference;
  Vector point;                          // IntrinsicAt
  std::optional<MetricOperator> reference;  // Reference; Euclidean when empty

  static MetricChoice euclidean() { return {}; }
  static MetricChoice with_reference(MetricOperator b) { return {Kind::Reference, {}, std::move(b)}; }
  static MetricChoice intrinsic_at(Vector x) { return {Kind::IntrinsicAt, std::move(x), std::nullopt}; }
  static MetricChoice intrinsic_at_minimizer() { return {Kind::IntrinsicAtMinimizer, {}, std::nullopt}; }
  static MetricChoice intrinsic_at_iterate() { return {Kind::IntrinsicAtIterate, {}, std::nullopt}; }
};

struct DescentConfig {
  StepRule step = StepRule::exact_line_search();
  double eps = 0.0;
  DirectionMode mode = DirectionMode::Exact;
  std::uint64_t seed = 0;  // RandomCone
  MetricChoice metric;
  int max_iter = 100;
  /// Stop once ‖g‖ in the configured metric falls to this value.
  double stop_grad = 1e-10;
  /// Quantity the adversary maximizes in AdversarialWorst mode.
  Variant adversary_target = Variant::GradientNorm;
  /// Ratios are recorded only while the denominator is at least this fraction
  /// of its value at x0; below it, roundoff dominates the quotient.
  double ratio_floor = 1e-6;

  void validate() const;
};

struct DescentStep {
  int k = 0;
  Vector x;
  double f = 0.0;
  double grad_norm = 0.0;  // in the metric of this step
  Vector d;                // empty on the final record
  double gamma = 0.0;
  double direction_error = 0.0;  // ‖d − g‖/‖g‖
  double orthogonality = 0.0;    // |⟨∇f(x_{k+1}), d⟩| / (‖∇f(x_{k+1})‖‖d‖), exact line search only
  // Ratios for the step k → k+1, measured in the metric of step k.
  std::optional<double> f_ratio;
  std::optional<double> g_ratio;
  std::optional<double> x_ratio;
};

struct DescentTrace {
  enum class Status { Converged, MaxIter };
  Status status = Status::MaxIter;
  std::vector<DescentStep> steps;
  std::optional<double> f_star;
  std::optional<Vector> x_star;
};

/// An iterate left the oracle's domain. Carries the trace up to that point.
class DomainExitError : public DomainError {
 public:
  DomainExitError(const std::string& what, Vector iterate, int iteration, DescentTrace partial)
      : DomainError(what), iterate_(std::move(iterate)), iteration_(iteration), partial_(std::move(partial)) {}
  const Vector& iterate() const { return iterate_; }
  int iteration() const { return iteration_; }
  const DescentTrace& partial() const { return partial_; }

 private:
  Vector iterate_;
  int iteration_;
  DescentTrace partial_;
};

/// Gradient with respect to ⟨·,·⟩_B: B⁻¹∇f.
Vector metric_gradient(std::span<const double> euclidean_gradient, const MetricOperator& b);

/// d with ‖d − g‖_B ≤ ε‖g‖_B. Exact returns g; RandomCone draws uniformly from
/// the B-ball of radius ε‖g‖_B around g. AdversarialWorst needs the oracle; use
/// adversarial_direction.
Vector direction(std::span<const double> g, double eps, DirectionMode mode, const MetricOperator& b,
                 std::mt19937_64* rng = nullptr);

/// Worst direction in the ε-cone for one step from x, restricted to the plane
/// spanned by g and B⁻¹Hg. ELS: rotations of g by |α| ≤ asin ε (length is
/// irrelevant). Fixed step: the circle g + ε‖g‖(cos t·u + sin t·w). The chosen
/// target ratio is maximized by a grid followed by golden-section refinement.
Vector adversarial_direction(const FunctionOracle& f, std::span<const double> x, std::span<const double> g,
                             double eps, const StepRule& step, const MetricOperator& b, Variant target,
                             std::span<const double> x_star);

/// argmin_γ f(x − γd). Closed form for quadratics; otherwise the root of
/// γ ↦ ⟨∇f(x − γd), d⟩ after an expansion phase. Throws std::invalid_argument
/// when d is not a descent direction.
double exact_line_search(const FunctionOracle& f, std::span<const double> x, std::span<const double> d);

DescentTrace run(const FunctionOracle& f, std::span<const double> x0, const DescentConfig& config);

/// Generalized eigenvalue bounds of H relative to B (the class constants of a
/// quadratic with Hessian H in the metric B).
EigBounds relative_spectrum(const SymMatrix& h, const SymMatrix& b);

struct RateAudit {
  double max_f_ratio = 0.0;
  double max_g_ratio = 0.0;
  double max_x_ratio = 0.0;
  /// Largest ratio − rate over audited quantities (negative when sound).
  double worst_excess = -1.0;
  std::size_t audited = 0;
  bool sound = true;
};

/// Compares every recorded ratio with its rate (+tol). f ratios are skipped
/// when check_f is false.
RateAudit audit(const DescentTrace& trace, const Rates& rates, double tol = 1e-9, bool check_f = true);

struct SharpnessResult {
  double achieved = 0.0;
  double rate = 0.0;
  double fraction = 0.0;
  Vector worst_x0;
};

/// Largest one-step ratio of `target` reached by AdversarialWorst on
/// f = ½(μx₁² + Lx₂²) over unit starts x0 = (cos φ, sin φ), φ ∈ [0, π/2].
/// rate is the matching analytic rate for config.step.
SharpnessResult adversarial_sharpness(double mu, double L, const DescentConfig& config, Variant target,
                                      std::size_t starts = 256);

/// f(T y) for an invertible T; used to compare against metric changes.
class TransformedOracle final : public FunctionOracle {
 public:
  TransformedOracle(const FunctionOracle& inner, Matrix t);
  std::size_t dim() const override { return t_.cols(); }
  double value(std::span<const double> y) const override;
  Vector gradient(std::span<const double> y) const override;
  SymMatrix hessian(std::span<const double> y) const override;
  ClassMeta meta() const override { return {}; }
  std::optional<Vector> minimizer() const override;

 private:
  const FunctionOracle& inner_;
  Matrix t_;
};

std::string trace_to_csv(const DescentTrace& trace);
std::string trace_to_json(const DescentTrace& trace, int indent = 2);

std::string to_string(DirectionMode m);
DirectionMode direction_mode_from_string(const std::string& s);

}  // namespace pepkit
