#pragma once

#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "pepkit/linalg.hpp"
#include "pepkit/metric.hpp"

namespace pepkit {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct DomainSpec {
  enum class Kind { AllSpace, Ball, Box };
  Kind kind = Kind::AllSpace;
  Vector center;  // Ball
  double radius = 0.0;
  Vector lo, hi;  // Box

  static DomainSpec all_space() { return {}; }
  static DomainSpec ball(Vector center, double radius);
  static DomainSpec box(Vector lo, Vector hi);

  /// Open-set membership.
  bool contains(std::span<const double> x) const;
};

struct ClassMeta {
  std::optional<double> mu;
  std::optional<double> L;
  bool self_concordant = false;
  std::optional<double> theta;  // barrier parameter ϑ
};

class FunctionOracle {
 public:
  virtual ~FunctionOracle() = default;
  virtual std::size_t dim() const = 0;
  virtual double value(std::span<const double> x) const = 0;
  virtual Vector gradient(std::span<const double> x) const = 0;
  virtual SymMatrix hessian(std::span<const double> x) const = 0;
  virtual DomainSpec domain() const { return DomainSpec::all_space(); }
  virtual ClassMeta meta() const = 0;
  /// Known minimizer, if the oracle has one in closed form.
  virtual std::optional<Vector> minimizer() const { return std::nullopt; }
};

/// f(x) = ½ xᵀQx + cᵀx with Q positive definite.
class QuadraticFunction final : public FunctionOracle {
 public:
  QuadraticFunction(SymMatrix q, Vector c);
  explicit QuadraticFunction(SymMatrix q);

  std::size_t dim() const override { return q_.dim(); }
  double value(std::span<const double> x) const override;
  Vector gradient(std::span<const double> x) const override;
  SymMatrix hessian(std::span<const double>) const override { return q_; }
  ClassMeta meta() const override;
  std::optional<Vector> minimizer() const override { return xstar_; }

  const SymMatrix& q() const { return q_; }
  const Vector& c() const { return c_; }

 private:
  SymMatrix q_;
  Vector c_;
  EigBounds spectrum_{};
  Vector xstar_;
};

/// f(x) = cᵀx − Σ ln(x_i − a_i) − Σ ln(b_i − x_i) on the open box (a, b).
/// The linear term defaults to zero; it moves the minimizer off the center.
class LogBarrierBox final : public FunctionOracle {
 public:
  LogBarrierBox(Vector a, Vector b, Vector c = {});

  std::size_t dim() const override { return a_.size(); }
  double value(std::span<const double> x) const override;
  Vector gradient(std::span<const double> x) const override;
  SymMatrix hessian(std::span<const double> x) const override;
  DomainSpec domain() const override { return DomainSpec::box(a_, b_); }
  ClassMeta meta() const override;
  std::optional<Vector> minimizer() const override;

 private:
  void require_interior(std::span<const double> x) const;
  Vector a_, b_, c_;
};

// Membership residuals. Nonnegative means the pair satisfies the inequality.
// All of them reject κ = μ/L ≥ 1 − 1e-8; use check_condition_d_limit there.
double check_condition_d(const FunctionOracle& f, std::span<const double> x, std::span<const double> y,
                         double mu, double L);
double check_condition_f(const FunctionOracle& f, std::span<const double> x, std::span<const double> y,
                         double mu, double L);
double check_smoothness_c(const FunctionOracle& f, std::span<const double> x, std::span<const double> y, double L);

/// κ = 1 limit of condition (d): ⟨g(x)−g(y), x−y⟩ − μ‖x−y‖², zero for f = (μ/2)‖x‖².
double check_condition_d_limit(const FunctionOracle& f, std::span<const double> x, std::span<const double> y,
                               double mu);

MetricOperator intrinsic_metric(const FunctionOracle& f, std::span<const double> x);

/// ‖u‖_x computed through an arbitrary reference metric B: the Hessian with
/// respect to ⟨·,·⟩_B is B⁻¹H, so ‖u‖_x² = ⟨u, B⁻¹H u⟩_B.
double intrinsic_norm(const FunctionOracle& f, std::span<const double> x, std::span<const double> u,
                      const MetricOperator& reference);

struct SandwichResult {
  double mu = 0.0;
  double L = 0.0;
  bool verified = false;
  double min_eig = 0.0;  // over all samples
  double max_eig = 0.0;
  /// Largest violation of the radius-dependent interval [(1−r)², (1−r)⁻²].
  double radius_violation = 0.0;
  std::size_t samples = 0;
};

/// Samples y uniformly in radius over the intrinsic ball ‖y−x‖_x < δ and checks
/// the relative Hessian spectrum against [(1−δ)², (1−δ)⁻²].
SandwichResult sc_sandwich(const FunctionOracle& f, std::span<const double> x, double delta, std::size_t samples,
                           std::mt19937_64& rng, double tol = 1e-8);

/// max over points of ‖H⁻¹g‖_x² = gᵀH⁻¹g.
double barrier_parameter_check(const FunctionOracle& f, const std::vector<Vector>& points);

/// Relative error between the gradient and central differences of value(),
/// step 1e-6·(1+‖x‖).
double gradient_fd_error(const FunctionOracle& f, std::span<const double> x);

/// Relative Frobenius error between the Hessian and central differences of
/// gradient(), same step rule.
double hessian_fd_error(const FunctionOracle& f, std::span<const double> x);

}  // namespace pepkit
