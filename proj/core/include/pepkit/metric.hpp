#pragma once

#include <span>
#include <utility>

#include "pepkit/linalg.hpp"

namespace pepkit {

struct Tolerances {
  double eig_tol = 1e-10;
  double sdp_rel_tol = 1e-7;
  double identity_tol = 1e-9;

  /// Throws std::invalid_argument unless every field is strictly positive.
  void validate() const;
};

/// Positive definite operator B defining ⟨u,v⟩_B = uᵀBv.
class MetricOperator {
 public:
  explicit MetricOperator(SymMatrix b, double eig_tol = Tolerances{}.eig_tol);
  static MetricOperator euclidean(std::size_t n);

  const SymMatrix& matrix() const { return b_; }
  std::size_t dim() const { return b_.dim(); }
  double norm(std::span<const double> u) const;

 private:
  SymMatrix b_;
};

double inner(const MetricOperator& b, std::span<const double> u, std::span<const double> v);

struct EigBounds {
  double min;
  double max;
};

EigBounds eig_bounds(const SymMatrix& m);

bool is_psd(const SymMatrix& m, double tol);

}  // namespace pepkit
