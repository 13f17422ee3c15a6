#pragma once

#include <string>
#include <vector>

#include "pepkit/linalg.hpp"

namespace pepkit {

/// minimize cᵀx  subject to  Gx + s = h, Ax = b, s ∈ K
/// where K is a product of PSD cones. Each block of order p occupies
/// p(p+1)/2 rows of G, stored as svec: upper triangle row by row with
/// off-diagonal entries scaled by √2. A block of order 1 is a nonnegative ray.
struct ConicProblem {
  Vector c;
  Matrix G;
  Vector h;
  Matrix A;  // may have zero rows
  Vector b;
  std::vector<std::size_t> blocks;

  std::size_t n() const { return c.size(); }
  std::size_t m() const { return h.size(); }
  std::size_t p() const { return b.size(); }
  /// Sum of block orders (the cone's barrier degree).
  std::size_t degree() const;
  void validate() const;
};

enum class ConicStatus { Optimal, PrimalInfeasible, DualInfeasible, MaxIter };

struct ConicIterate {
  int k = 0;
  double pcost = 0.0;
  double dcost = 0.0;
  double gap = 0.0;
  double pres = 0.0;
  double dres = 0.0;
  double tau = 0.0;
  double kappa = 0.0;
  double step = 0.0;
  double sigma = 0.0;
};

struct ConicOptions {
  int max_iter = 200;
  double step_fraction = 0.98;
  double feas_tol = 1e-8;
  double gap_tol = 1e-8;
  int refinement_steps = 2;
  bool record_iterates = true;
};

struct ConicResult {
  ConicStatus status = ConicStatus::MaxIter;
  std::string message;
  // For Optimal these are divided by τ. For infeasibility they are the
  // normalized certificate (x for dual infeasibility, y,z for primal).
  Vector x, y, z, s;
  double pcost = 0.0;
  double dcost = 0.0;
  double primal_residual = 0.0;  // max(‖Ax−b‖, ‖Gx+s−h‖)
  double dual_residual = 0.0;    // ‖Aᵀy+Gᵀz+c‖
  double gap = 0.0;              // sᵀz
  double certificate_residual = 0.0;
  int iterations = 0;
  std::vector<ConicIterate> iterates;
};

/// Homogeneous self-dual embedding, Nesterov–Todd scaling, Mehrotra
/// predictor-corrector. Dense; deterministic.
ConicResult solve_conic(const ConicProblem& problem, const ConicOptions& options = {});

std::size_t svec_size(std::size_t order);
Vector svec(const SymMatrix& m);
SymMatrix smat(std::span<const double> v, std::size_t order);

std::string to_string(ConicStatus s);

}  // namespace pepkit
