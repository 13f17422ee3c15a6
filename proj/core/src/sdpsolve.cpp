#include "pepkit/sdpsolve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <optional>
#include <stdexcept>

namespace pepkit {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kZeroTol = 1e-12;

double scale_of(const AffineForm& f) {
  double s = std::abs(f.constant);
  for (double v : f.scalars) s = std::max(s, std::abs(v));
  return std::max(s, f.gram.matrix().max_abs());
}

AffineForm reduce(const AffineForm& f, const Matrix& basis) {
  AffineForm g;
  g.gram = congruence(f.gram, basis);
  g.scalars = f.scalars;
  g.constant = f.constant;
  return g;
}

/// When f = ⟨C, G⟩ with C semidefinite of an admissible sign (no scalars or
/// constant), returns the PSD matrix Q with {QG = 0} the implied face.
std::optional<SymMatrix> face_matrix(const AffineForm& f, double scale, bool allow_psd) {
  if (std::abs(f.constant) > kZeroTol * scale) return std::nullopt;
  for (double v : f.scalars)
    if (std::abs(v) > kZeroTol * scale) return std::nullopt;
  if (f.gram.dim() == 0) return std::nullopt;
  const double cmax = f.gram.matrix().max_abs();
  if (cmax <= kZeroTol * scale) return std::nullopt;
  const auto eb = eig_bounds(f.gram);
  const double t = 1e-11 * cmax;
  if (eb.max <= t) return f.gram * -1.0;
  if (allow_psd && eb.min >= -t) return f.gram;
  return std::nullopt;
}

struct EqRecord {
  std::string id;
  AffineForm form;          // in reduced coordinates
  long block = -1;          // source PSD block for zero-diagonal equalities
  std::size_t i = 0, j = 0;
  long row = -1;            // row of A, or -1 when dropped as dependent
};

struct BlockRecord {
  std::size_t source;                 // index into problem.psd_blocks
  std::vector<std::size_t> kept;      // surviving indices
  std::size_t offset = 0;             // first cone row
};

/// Coefficients of a reduced form on the conic variables (upper Gram entries, then scalars).
Vector coefficients(const AffineForm& f, std::size_t r, std::size_t ns) {
  Vector a(svec_size(r) + ns, 0.0);
  std::size_t k = 0;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = i; j < r; ++j, ++k) a[k] = i == j ? f.gram(i, i) : 2.0 * f.gram(i, j);
  for (std::size_t q = 0; q < ns; ++q) a[svec_size(r) + q] = f.scalars[q];
  return a;
}

SymMatrix gram_from_vars(std::span<const double> v, std::size_t r) {
  SymMatrix h(r);
  std::size_t k = 0;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = i; j < r; ++j, ++k) h.set(i, j, v[k]);
  return h;
}

double trace_inner(const SymMatrix& a, const SymMatrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t j = 0; j < a.dim(); ++j) s += a(i, j) * b(i, j);
  return s;
}

}  // namespace

double SdpSolution::dual(const std::string& id) const {
  auto it = duals.find(id);
  if (it == duals.end()) throw std::out_of_range("SdpSolution: no dual for '" + id + "'");
  return it->second;
}

std::string to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::Optimal:
      return "optimal";
    case SdpStatus::Infeasible:
      return "infeasible";
    case SdpStatus::Unbounded:
      return "unbounded";
    case SdpStatus::MaxIter:
      return "max_iter";
  }
  return "?";
}

SdpSolution solve(const GramSdpProblem& problem, const Tolerances& tol, const SdpOptions& options) {
  problem.validate();
  tol.validate();
  const std::size_t n = problem.gram_dim();
  const std::size_t ns = problem.n_scalars();

  // Facial reduction: constraints ⟨Q, G⟩ ≤ 0 with Q ⪰ 0 (or = 0 with Q
  // semidefinite) confine G to {G : QG = 0}; parametrize G = B H Bᵀ.
  Matrix basis = Matrix::identity(n);
  std::vector<bool> ineq_face(problem.inequalities.size(), false);
  std::vector<bool> eq_face(problem.equalities.size(), false);
  if (options.presolve && problem.gram_psd) {
    bool changed = true;
    while (changed && basis.cols() > 0) {
      changed = false;
      auto try_reduce = [&](const AffineForm& f, bool allow_psd) {
        const auto q = face_matrix(reduce(f, basis), std::max(scale_of(f), 1e-300), allow_psd);
        if (!q) return false;
        basis = basis * null_space(q->matrix(), 1e-9);
        return true;
      };
      for (std::size_t k = 0; k < problem.inequalities.size() && !changed; ++k)
        if (!ineq_face[k] && try_reduce(problem.inequalities[k].expr, false)) ineq_face[k] = changed = true;
      for (std::size_t k = 0; k < problem.equalities.size() && !changed; ++k)
        if (!eq_face[k] && try_reduce(problem.equalities[k].expr, true)) eq_face[k] = changed = true;
    }
  }
  const std::size_t r = basis.cols();

  SdpSolution sol;
  sol.reduced_gram_dim = r;
  for (std::size_t k = 0; k < problem.inequalities.size(); ++k)
    if (ineq_face[k]) sol.unidentified.push_back(problem.inequalities[k].id);
  for (std::size_t k = 0; k < problem.equalities.size(); ++k)
    if (eq_face[k]) sol.unidentified.push_back(problem.equalities[k].id);

  const std::size_t nv = svec_size(r) + ns;

  // Inequalities that became identically zero after reduction carry no information.
  std::vector<std::size_t> ineq_rows;
  std::vector<AffineForm> ineq_forms;
  for (std::size_t k = 0; k < problem.inequalities.size(); ++k) {
    if (ineq_face[k]) continue;
    AffineForm red = reduce(problem.inequalities[k].expr, basis);
    if (options.presolve && red.is_zero(kZeroTol * std::max(scale_of(problem.inequalities[k].expr), 1e-300))) {
      sol.unidentified.push_back(problem.inequalities[k].id);
      continue;
    }
    ineq_rows.push_back(k);
    ineq_forms.push_back(std::move(red));
  }

  std::vector<EqRecord> eqs;
  for (std::size_t k = 0; k < problem.equalities.size(); ++k)
    if (!eq_face[k]) eqs.push_back({problem.equalities[k].id, reduce(problem.equalities[k].expr, basis)});

  // PSD blocks: an identically zero diagonal entry forces its row to vanish.
  std::vector<BlockRecord> blocks;
  for (std::size_t bi = 0; bi < problem.psd_blocks.size(); ++bi) {
    const PsdBlock& blk = problem.psd_blocks[bi];
    std::vector<AffineForm> red;
    for (const auto& e : blk.entries) red.push_back(reduce(e, basis));
    auto entry = [&](std::size_t i, std::size_t j) -> const AffineForm& { return red[i * blk.size + j]; };
    BlockRecord rec{bi, {}, 0};
    std::vector<bool> dead(blk.size, false);
    if (options.presolve)
      for (std::size_t i = 0; i < blk.size; ++i)
        dead[i] = entry(i, i).is_zero(kZeroTol * std::max(scale_of(blk.at(i, i)), 1.0));
    for (std::size_t i = 0; i < blk.size; ++i) {
      if (!dead[i]) {
        rec.kept.push_back(i);
        continue;
      }
      for (std::size_t j = 0; j < blk.size; ++j) {
        if (j == i || (dead[j] && j < i)) continue;
        if (entry(i, j).is_zero(kZeroTol * std::max(scale_of(blk.at(i, j)), 1.0))) continue;
        eqs.push_back({blk.id + "[" + std::to_string(std::min(i, j)) + "," + std::to_string(std::max(i, j)) + "]",
                       entry(i, j), static_cast<long>(bi), std::min(i, j), std::max(i, j)});
      }
    }
    blocks.push_back(std::move(rec));
  }

  // Cone rows.
  ConicProblem cp;
  std::vector<std::size_t> cone_blocks;
  std::vector<Vector> g_rows;
  Vector h;
  for (const auto& f : ineq_forms) {
    g_rows.push_back(scaled(coefficients(f, r, ns), -1.0));
    h.push_back(f.constant);
    cone_blocks.push_back(1);
  }
  for (auto& rec : blocks) {
    if (rec.kept.empty()) continue;
    rec.offset = h.size();
    const PsdBlock& blk = problem.psd_blocks[rec.source];
    const std::size_t q = rec.kept.size();
    for (std::size_t a = 0; a < q; ++a)
      for (std::size_t b = a; b < q; ++b) {
        const AffineForm f = reduce(blk.at(rec.kept[a], rec.kept[b]), basis);
        const double w = a == b ? 1.0 : kSqrt2;
        g_rows.push_back(scaled(coefficients(f, r, ns), -w));
        h.push_back(w * f.constant);
      }
    cone_blocks.push_back(q);
  }
  std::size_t gram_offset = h.size();
  if (problem.gram_psd && r > 0) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = i; j < r; ++j, ++k) {
        Vector row(nv, 0.0);
        row[k] = i == j ? -1.0 : -kSqrt2;
        g_rows.push_back(std::move(row));
        h.push_back(0.0);
      }
    cone_blocks.push_back(r);
  }

  Vector c = scaled(coefficients(reduce(problem.objective, basis), r, ns), -1.0);
  std::vector<Vector> a_rows;
  Vector b;
  for (const auto& e : eqs) {
    a_rows.push_back(coefficients(e.form, r, ns));
    b.push_back(-e.form.constant);
  }

  // Unused variables are fixed at zero.
  std::vector<std::size_t> used;
  for (std::size_t k = 0; k < nv; ++k) {
    bool any = c[k] != 0.0;
    for (const auto& row : g_rows) any = any || row[k] != 0.0;
    for (const auto& row : a_rows) any = any || row[k] != 0.0;
    if (any || !options.presolve) used.push_back(k);
  }
  auto compress = [&](const Vector& v) {
    Vector out;
    for (std::size_t k : used) out.push_back(v[k]);
    return out;
  };

  // Dependent equalities are dropped (multiplier zero); inconsistent ones make the problem infeasible.
  std::vector<Vector> ortho;
  std::vector<Vector> kept_rows;
  Vector kept_b;
  for (std::size_t e = 0; e < eqs.size(); ++e) {
    const Vector row = compress(a_rows[e]);
    Vector resid = row;
    for (const auto& q : ortho) axpy(-dot(q, resid), q, resid);
    const double rn = norm2(resid);
    if (rn <= 1e-10 * std::max(norm2(row), 1e-300)) continue;
    ortho.push_back(scaled(resid, 1.0 / rn));
    eqs[e].row = static_cast<long>(kept_rows.size());
    kept_rows.push_back(row);
    kept_b.push_back(b[e]);
  }

  // A variable in the objective but in no constraint can grow without bound.
  for (std::size_t k : used) {
    bool constrained = false;
    for (const auto& row : g_rows) constrained = constrained || row[k] != 0.0;
    for (const auto& row : a_rows) constrained = constrained || row[k] != 0.0;
    if (!constrained && c[k] != 0.0) {
      sol.status = SdpStatus::Unbounded;
      sol.message = "objective variable appears in no constraint";
      return sol;
    }
  }

  cp.c = compress(c);
  cp.h = h;
  cp.G = Matrix(h.size(), used.size());
  for (std::size_t i = 0; i < g_rows.size(); ++i) {
    const Vector row = compress(g_rows[i]);
    std::copy(row.begin(), row.end(), cp.G.row(i).begin());
  }
  cp.A = Matrix(kept_rows.size(), used.size());
  for (std::size_t i = 0; i < kept_rows.size(); ++i) std::copy(kept_rows[i].begin(), kept_rows[i].end(), cp.A.row(i).begin());
  cp.b = kept_b;
  cp.blocks = cone_blocks;

  // Consistency of dropped equalities against the kept ones.
  bool eq_inconsistent = false;
  if (!kept_rows.empty()) {
    for (std::size_t e = 0; e < eqs.size(); ++e) {
      if (eqs[e].row >= 0) continue;
      // Solve (A Aᵀ) w = A row for the representation of the dependent row.
      const Vector row = compress(a_rows[e]);
      Matrix aat(kept_rows.size(), kept_rows.size());
      for (std::size_t i = 0; i < kept_rows.size(); ++i)
        for (std::size_t j = 0; j < kept_rows.size(); ++j) aat(i, j) = dot(kept_rows[i], kept_rows[j]);
      Vector ar(kept_rows.size());
      for (std::size_t i = 0; i < kept_rows.size(); ++i) ar[i] = dot(kept_rows[i], row);
      const Vector w = LuFactorization(aat).solve(ar);
      if (std::abs(dot(w, kept_b) - b[e]) > 1e-9 * std::max(1.0, std::abs(b[e]))) eq_inconsistent = true;
    }
  } else {
    for (std::size_t e = 0; e < eqs.size(); ++e)
      if (std::abs(b[e]) > 1e-12) eq_inconsistent = true;
  }
  if (eq_inconsistent) {
    sol.status = SdpStatus::Infeasible;
    sol.message = "inconsistent linear equalities";
    return sol;
  }

  ConicOptions copt;
  copt.max_iter = options.max_iter;
  copt.step_fraction = options.step_fraction;
  copt.record_iterates = options.record_iterates;
  copt.feas_tol = 1e-2 * tol.sdp_rel_tol;
  copt.gap_tol = 1e-2 * tol.sdp_rel_tol;
  const ConicResult cr = solve_conic(cp, copt);
  sol.iterations = cr.iterations;
  sol.iterates = cr.iterates;
  sol.message = cr.message;
  sol.certificate_residual = cr.certificate_residual;

  if (cr.status == ConicStatus::PrimalInfeasible) {
    sol.status = SdpStatus::Infeasible;
    return sol;
  }
  if (cr.status == ConicStatus::DualInfeasible) {
    sol.status = SdpStatus::Unbounded;
    return sol;
  }

  if (cr.x.size() != used.size()) {
    sol.status = SdpStatus::MaxIter;
    return sol;
  }

  // Primal recovery.
  Vector v(nv, 0.0);
  for (std::size_t k = 0; k < used.size(); ++k) v[used[k]] = cr.x[k];
  const SymMatrix hred = gram_from_vars(v, r);
  sol.gram = r > 0 ? SymMatrix(basis * hred.matrix() * basis.transpose(), 1e-8) : SymMatrix(n);
  const Vector svals(v.begin() + static_cast<std::ptrdiff_t>(svec_size(r)), v.end());
  for (std::size_t q = 0; q < ns; ++q) sol.scalars[problem.scalars[q]] = svals[q];
  sol.objective_value = problem.objective.eval(sol.gram, svals);
  sol.dual_value = problem.objective.constant - cr.dcost;

  // Dual recovery.
  for (std::size_t k = 0; k < ineq_rows.size(); ++k) sol.duals[problem.inequalities[ineq_rows[k]].id] = cr.z[k];
  std::map<std::size_t, SymMatrix> block_s;
  for (const auto& rec : blocks) {
    const PsdBlock& blk = problem.psd_blocks[rec.source];
    SymMatrix s(blk.size);
    if (!rec.kept.empty()) {
      const SymMatrix zk = smat(std::span<const double>(cr.z).subspan(rec.offset, svec_size(rec.kept.size())), rec.kept.size());
      for (std::size_t a = 0; a < rec.kept.size(); ++a)
        for (std::size_t bb = a; bb < rec.kept.size(); ++bb) s.set(rec.kept[a], rec.kept[bb], zk(a, bb));
    }
    block_s[rec.source] = s;
  }
  for (const auto& e : eqs) {
    const double nu = e.row >= 0 ? -cr.y[static_cast<std::size_t>(e.row)] : 0.0;
    if (e.block >= 0) {
      block_s[static_cast<std::size_t>(e.block)].set(e.i, e.j, 0.5 * nu);
    } else {
      sol.duals[e.id] = nu;
    }
  }
  for (auto& [bi, s] : block_s) sol.block_duals[problem.psd_blocks[bi].id] = s;
  if (problem.gram_psd) {
    if (r > 0) {
      const SymMatrix zh = smat(std::span<const double>(cr.z).subspan(gram_offset, svec_size(r)), r);
      sol.block_duals["gram"] = SymMatrix(basis * zh.matrix() * basis.transpose(), 1e-8);
    } else {
      sol.block_duals["gram"] = SymMatrix(n);
    }
  }

  // Residuals against the original problem.
  double pf = 0.0;
  double comp = 0.0;
  for (const auto& con : problem.inequalities) {
    const double val = con.expr.eval(sol.gram, svals);
    pf = std::max(pf, -val);
    if (sol.duals.count(con.id)) comp = std::max(comp, std::abs(sol.duals[con.id] * val));
  }
  for (const auto& con : problem.equalities) pf = std::max(pf, std::abs(con.expr.eval(sol.gram, svals)));
  for (const auto& blk : problem.psd_blocks) {
    const SymMatrix mval = blk.eval(sol.gram, svals);
    pf = std::max(pf, -eig_bounds(mval).min);
    comp = std::max(comp, std::abs(trace_inner(sol.block_duals[blk.id], mval)));
  }
  if (problem.gram_psd) {
    pf = std::max(pf, -eig_bounds(sol.gram).min);
    comp = std::max(comp, std::abs(trace_inner(sol.block_duals["gram"], sol.gram)));
  }
  sol.residuals.primal_feas = std::max(pf, 0.0);
  sol.residuals.dual_feas = cr.dual_residual;
  sol.residuals.gap = std::abs(sol.dual_value - sol.objective_value);
  sol.residuals.complementarity = comp;

  const double scale = tol.sdp_rel_tol * (1.0 + std::abs(sol.objective_value));
  const bool within = sol.residuals.primal_feas <= scale && sol.residuals.dual_feas <= scale && sol.residuals.gap <= scale;
  if (cr.status == ConicStatus::Optimal && within) {
    sol.status = SdpStatus::Optimal;
  } else if (within) {
    sol.status = SdpStatus::Optimal;
    sol.message = "accepted at requested tolerance (" + cr.message + ")";
  } else {
    sol.status = SdpStatus::MaxIter;
    if (sol.message.empty()) sol.message = "residuals above tolerance";
  }
  return sol;
}

Certificate dual_report(const SdpSolution& s, const PepInstance& inst) {
  if (s.status != SdpStatus::Optimal) throw std::invalid_argument("dual_report: solution is not optimal");
  const bool els = inst.step.kind == StepRule::Kind::ExactLineSearch;
  if (inst.resolved_form() != (inst.variant == Variant::FunctionValue ? InterpolationForm::Ordered : InterpolationForm::Symmetric))
    throw std::invalid_argument("dual_report: certificates are stated for the default interpolation form");
  Certificate c;
  c.mu = inst.mu;
  c.L = inst.L;
  c.eps = inst.eps;
  c.gamma = els ? 0.0 : inst.step.gamma;
  c.rate = std::sqrt(std::max(0.0, s.dual("budget")));
  auto maybe = [&](const std::string& id, const std::string& name, double factor = 1.0) {
    auto it = s.duals.find(id);
    if (it != s.duals.end()) c.multipliers[name] = factor * it->second;
  };
  if (els) {
    switch (inst.variant) {
      case Variant::GradientNorm:
        c.family = CertFamily::ElsGradient;
        maybe("interp(0,1)", "lambda", 1.0 / (inst.L - inst.mu));
        maybe("linesearch", "linesearch", -1.0);
        break;
      case Variant::Distance:
        c.family = CertFamily::ElsDistance;
        maybe("interp(*,0)", "lambda0");
        maybe("interp(*,1)", "lambda1");
        maybe("linesearch", "lambda2", -1.0);
        break;
      case Variant::FunctionValue:
        throw std::invalid_argument("dual_report: no certificate family for the exact line search function-value PEP");
    }
    auto it = s.block_duals.find("cone");
    if (it != s.block_duals.end()) c.S = it->second;
    return c;
  }
  switch (inst.variant) {
    case Variant::GradientNorm:
      c.family = CertFamily::FixedGradient;
      maybe("interp(0,1)", "lambda0");
      maybe("inexact", "lambda1");
      break;
    case Variant::Distance:
      c.family = CertFamily::FixedDistance;
      maybe("interp(*,0)", "lambda0");
      maybe("inexact", "lambda1");
      break;
    case Variant::FunctionValue:
      c.family = CertFamily::FixedFunctionValue;
      maybe("interp(0,1)", "lambda01");
      maybe("interp(*,0)", "lambda*0");
      maybe("interp(*,1)", "lambda*1");
      maybe("inexact", "lambda2");
      break;
  }
  return c;
}

Matrix vector_realization(const SymMatrix& gram, double tol) {
  const auto eig = jacobi_eigen(gram);
  const double top = std::max(eig.values.back(), 0.0);
  std::vector<std::size_t> keep;
  for (std::size_t k = eig.values.size(); k-- > 0;)
    if (eig.values[k] > tol * top && eig.values[k] > 0.0) keep.push_back(k);
  Matrix v(gram.dim(), keep.size());
  for (std::size_t c = 0; c < keep.size(); ++c) {
    const double s = std::sqrt(eig.values[keep[c]]);
    for (std::size_t i = 0; i < gram.dim(); ++i) v(i, c) = s * eig.vectors(i, keep[c]);
  }
  return v;
}

std::string iterates_to_json(const SdpSolution& s, int indent) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& it : s.iterates)
    arr.push_back({{"k", it.k},
                   {"pcost", it.pcost},
                   {"dcost", it.dcost},
                   {"gap", it.gap},
                   {"pres", it.pres},
                   {"dres", it.dres},
                   {"tau", it.tau},
                   {"kappa", it.kappa},
                   {"step", it.step},
                   {"sigma", it.sigma}});
  nlohmann::json j = {{"status", to_string(s.status)}, {"iterations", s.iterations}, {"iterates", arr}};
  return j.dump(indent);
}

}  // namespace pepkit
