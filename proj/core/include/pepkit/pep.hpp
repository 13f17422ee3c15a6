#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pepkit/linalg.hpp"

namespace pepkit {

enum class Variant { FunctionValue, GradientNorm, Distance };

struct StepRule {
  enum class Kind { ExactLineSearch, FixedStep };
  Kind kind = Kind::ExactLineSearch;
  double gamma = 0.0;

  static StepRule exact_line_search() { return {}; }
  static StepRule fixed(double gamma) { return {Kind::FixedStep, gamma}; }
};

/// Which interpolation inequality the builder emits.
/// Default follows the formulation per variant: the ordered (function value)
/// form for FunctionValue, the symmetric gradient form otherwise.
enum class InterpolationForm { Default, Symmetric, Ordered };

struct PepInstance {
  Variant variant = Variant::GradientNorm;
  StepRule step = StepRule::exact_line_search();
  double mu = 1.0;
  double L = 4.0;
  double eps = 0.0;
  double R = 1.0;
  InterpolationForm form = InterpolationForm::Default;

  double kappa() const { return mu / L; }
  /// Resolved interpolation form (never Default).
  InterpolationForm resolved_form() const;
  /// Throws std::invalid_argument on bad fields. κ is capped below 1 − 1e-8:
  /// the interpolation inequalities carry 1/(1−κ).
  void validate() const;
};

/// c + Σ_k s_k·scalar_k + Σ_ij C_ij G_ij with C symmetric.
struct AffineForm {
  SymMatrix gram;
  Vector scalars;
  double constant = 0.0;

  AffineForm() = default;
  AffineForm(std::size_t gram_dim, std::size_t n_scalars) : gram(gram_dim), scalars(n_scalars, 0.0) {}

  double eval(const SymMatrix& g, std::span<const double> s) const;
  bool is_zero(double tol = 0.0) const;
  bool all_finite() const;

  AffineForm& operator+=(const AffineForm& o);
  AffineForm& operator*=(double a);
};

AffineForm operator+(AffineForm a, const AffineForm& b);
AffineForm operator-(AffineForm a, const AffineForm& b);
AffineForm operator*(double a, AffineForm f);

/// expr ≥ 0 (inequalities) or expr = 0 (equalities).
struct Constraint {
  std::string id;
  AffineForm expr;
};

/// Symmetric matrix of affine forms required to be PSD.
struct PsdBlock {
  std::string id;
  std::size_t size = 0;
  std::vector<AffineForm> entries;  // row-major, size*size, symmetric

  const AffineForm& at(std::size_t i, std::size_t j) const { return entries[i * size + j]; }
  SymMatrix eval(const SymMatrix& g, std::span<const double> s) const;
};

/// A performance estimation problem in Gram form, maximization sense.
struct GramSdpProblem {
  std::vector<std::string> labels;
  std::vector<std::string> scalars;
  AffineForm objective;
  std::vector<Constraint> equalities;
  std::vector<Constraint> inequalities;
  std::vector<PsdBlock> psd_blocks;
  bool gram_psd = true;

  std::size_t gram_dim() const { return labels.size(); }
  std::size_t n_scalars() const { return scalars.size(); }

  /// Checks that every form matches the declared labels/scalars, that PSD
  /// blocks are symmetric and that all coefficients are finite.
  void validate() const;

  const Constraint* find_inequality(const std::string& id) const;
  const Constraint* find_equality(const std::string& id) const;
};

GramSdpProblem build_els(const PepInstance& instance);
GramSdpProblem build_fixed(const PepInstance& instance);
/// Dispatches on instance.step.
GramSdpProblem build(const PepInstance& instance);

/// Point index in {*, 0, 1}; -1 stands for the optimum *.
using PointIndex = int;
inline constexpr PointIndex kStar = -1;

std::vector<std::pair<PointIndex, PointIndex>> enumerate_interpolation_pairs(const std::vector<PointIndex>& points);
/// Unordered version used by the symmetric form.
std::vector<std::pair<PointIndex, PointIndex>> enumerate_unordered_pairs(const std::vector<PointIndex>& points);
std::string point_name(PointIndex i);

/// Same problem with Gram index k renamed to perm[k].
GramSdpProblem permute_labels(const GramSdpProblem& p, const std::vector<std::size_t>& perm);

std::string to_json(const GramSdpProblem& p, int indent = 2);
GramSdpProblem problem_from_json(const std::string& text);

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

}  // namespace pepkit
