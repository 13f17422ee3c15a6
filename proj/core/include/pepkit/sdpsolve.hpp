#pragma once

#include <map>
#include <string>
#include <vector>

#include "pepkit/certificate.hpp"
#include "pepkit/conic.hpp"
#include "pepkit/metric.hpp"
#include "pepkit/pep.hpp"

namespace pepkit {

enum class SdpStatus { Optimal, Infeasible, Unbounded, MaxIter };

struct SdpResiduals {
  double primal_feas = 0.0;      // largest constraint violation
  double dual_feas = 0.0;        // ‖Aᵀy + Gᵀz + c‖ of the reduced conic problem
  double gap = 0.0;              // |primal − dual| objective
  double complementarity = 0.0;  // largest |multiplier·slack|, including PSD blocks
};

struct SdpOptions {
  int max_iter = 200;
  double step_fraction = 0.98;
  /// Facial reduction, zero-diagonal block reduction and removal of unused
  /// variables and dependent equalities.
  bool presolve = true;
  bool record_iterates = true;
};

struct SdpSolution {
  SdpStatus status = SdpStatus::MaxIter;
  std::string message;
  SymMatrix gram;
  std::map<std::string, double> scalars;
  double objective_value = 0.0;
  double dual_value = 0.0;
  /// Multiplier m per constraint id with
  ///   objective + Σ m·expr + Σ ⟨S_blk, M_blk⟩ + ⟨Z, Gram⟩ ≡ dual_value.
  /// Inequality multipliers are ≥ 0; equality multipliers are free.
  std::map<std::string, double> duals;
  /// PSD block duals by block id; the Gram dual is stored under "gram".
  std::map<std::string, SymMatrix> block_duals;
  /// Constraints eliminated by facial reduction: their multipliers are not
  /// identified by the reduced problem and are absent from `duals`.
  std::vector<std::string> unidentified;
  std::size_t reduced_gram_dim = 0;
  SdpResiduals residuals;
  double certificate_residual = 0.0;
  int iterations = 0;
  std::vector<ConicIterate> iterates;

  double dual(const std::string& id) const;
};

SdpSolution solve(const GramSdpProblem& problem, const Tolerances& tol = {}, const SdpOptions& options = {});

/// Certificate-normalized multipliers from an optimal solution of a built PEP.
/// Multipliers do not depend on R (the budget multiplier is rate²).
/// Throws for non-optimal solutions and for ELS function-value instances,
/// which have no certificate family.
Certificate dual_report(const SdpSolution& solution, const PepInstance& instance);

/// Rows are the labels' vectors in ℝ^rank with V Vᵀ = Gram (eigenvalues
/// below tol·λ_max dropped).
Matrix vector_realization(const SymMatrix& gram, double tol = 1e-9);

std::string iterates_to_json(const SdpSolution& solution, int indent = 2);

std::string to_string(SdpStatus s);

}  // namespace pepkit
