#include "pepkit/metric.hpp"

#include <cmath>
#include <stdexcept>

namespace pepkit {

void Tolerances::validate() const {
  if (!(eig_tol > 0.0) || !(sdp_rel_tol > 0.0) || !(identity_tol > 0.0))
    throw std::invalid_argument("Tolerances: all tolerances must be strictly positive");
}

MetricOperator::MetricOperator(SymMatrix b, double eig_tol) : b_(std::move(b)) {
  if (b_.dim() == 0) throw DimensionError("MetricOperator: empty matrix");
  const auto bounds = eig_bounds(b_);
  if (!(bounds.min > eig_tol)) throw std::domain_error("MetricOperator: matrix is not positive definite");
}

MetricOperator MetricOperator::euclidean(std::size_t n) { return MetricOperator(SymMatrix::identity(n)); }

double MetricOperator::norm(std::span<const double> u) const { return std::sqrt(inner(*this, u, u)); }

double inner(const MetricOperator& b, std::span<const double> u, std::span<const double> v) {
  if (u.size() != b.dim() || v.size() != b.dim()) throw DimensionError("inner: dimension mismatch");
  return dot(u, b.matrix() * v);
}

EigBounds eig_bounds(const SymMatrix& m) {
  if (!m.all_finite()) throw std::domain_error("eig_bounds: non-finite entries");
  if (m.dim() == 0) throw DimensionError("eig_bounds: empty matrix");
  const auto eig = jacobi_eigen(m);
  return {eig.values.front(), eig.values.back()};
}

bool is_psd(const SymMatrix& m, double tol) {
  if (m.dim() == 0) return true;
  if (!m.all_finite()) return false;
  return jacobi_eigen(m).values.front() >= -tol;
}

}  // namespace pepkit
