#include "pepkit/conic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>

namespace pepkit {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

struct Layout {
  std::vector<std::size_t> order;
  std::vector<std::size_t> offset;

  explicit Layout(const std::vector<std::size_t>& blocks) : order(blocks) {
    std::size_t off = 0;
    for (std::size_t p : blocks) {
      offset.push_back(off);
      off += svec_size(p);
    }
  }
  std::size_t count() const { return order.size(); }
  std::span<const double> view(std::span<const double> v, std::size_t k) const {
    return v.subspan(offset[k], svec_size(order[k]));
  }
  std::span<double> view(std::span<double> v, std::size_t k) const {
    return v.subspan(offset[k], svec_size(order[k]));
  }
};

/// Visits (i, j, svec index) over the upper triangle of an order-p block.
template <typename F>
void for_upper(std::size_t p, F&& f) {
  std::size_t k = 0;
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i; j < p; ++j) f(i, j, k++);
}

/// NT scaling of one block: W z = svec(rᵀ Z r) = λ = W⁻ᵀ s = svec(r⁻¹ S r⁻ᵀ).
struct BlockScaling {
  Matrix r;
  Matrix rinv;
  Vector lambda;
};

Matrix sym_product(const Matrix& a, const Matrix& m, bool transpose_left) {
  // transpose_left ? aᵀ m a : a m aᵀ
  return transpose_left ? a.transpose() * m * a : a * m * a.transpose();
}

Vector svec_of(const Matrix& m) {
  const std::size_t p = m.rows();
  Vector v(svec_size(p));
  for_upper(p, [&](std::size_t i, std::size_t j, std::size_t k) {
    v[k] = i == j ? m(i, i) : kSqrt2 * 0.5 * (m(i, j) + m(j, i));
  });
  return v;
}

/// Builds the scaling from Ls (chol of S) and Lz (chol of Z), composed onto
/// an existing (r, rinv) pair.
std::optional<BlockScaling> nt_from_factors(const Matrix& ls, const Matrix& lz, const Matrix& r0, const Matrix& r0inv) {
  const Svd svd = jacobi_svd(lz.transpose() * ls);
  const std::size_t p = ls.rows();
  BlockScaling out;
  out.lambda = svd.sigma;
  for (double l : out.lambda)
    if (!(l > 0.0) || !std::isfinite(l)) return std::nullopt;
  Matrix vl = svd.v;  // V Λ^{-1/2}
  Matrix vt_ls_inv = svd.v.transpose() * invert_lower(ls);  // Λ^{1/2} Vᵀ Ls⁻¹
  for (std::size_t j = 0; j < p; ++j) {
    const double sq = std::sqrt(out.lambda[j]);
    for (std::size_t i = 0; i < p; ++i) {
      vl(i, j) /= sq;
      vt_ls_inv(j, i) *= sq;
    }
  }
  out.r = r0 * ls * vl;
  out.rinv = vt_ls_inv * r0inv;
  return out;
}

class Scaling {
 public:
  explicit Scaling(const Layout& layout) : layout_(layout) {}

  bool init(std::span<const double> s, std::span<const double> z) {
    blocks_.clear();
    for (std::size_t k = 0; k < layout_.count(); ++k) {
      const std::size_t p = layout_.order[k];
      auto ls = cholesky(smat(layout_.view(s, k), p));
      auto lz = cholesky(smat(layout_.view(z, k), p));
      if (!ls || !lz) return false;
      auto b = nt_from_factors(*ls, *lz, Matrix::identity(p), Matrix::identity(p));
      if (!b) return false;
      blocks_.push_back(std::move(*b));
    }
    return true;
  }

  /// Moves to scaled iterates Λ + α·DS, Λ + α·DZ and rescales.
  bool update(std::span<const double> ds, std::span<const double> dz, double alpha) {
    for (std::size_t k = 0; k < layout_.count(); ++k) {
      const std::size_t p = layout_.order[k];
      BlockScaling& b = blocks_[k];
      SymMatrix shat = smat(layout_.view(ds, k), p) * alpha;
      SymMatrix zhat = smat(layout_.view(dz, k), p) * alpha;
      for (std::size_t i = 0; i < p; ++i) {
        shat.add(i, i, b.lambda[i]);
        zhat.add(i, i, b.lambda[i]);
      }
      auto ls = cholesky(shat);
      auto lz = cholesky(zhat);
      if (!ls || !lz) return false;
      auto nb = nt_from_factors(*ls, *lz, b.r, b.rinv);
      if (!nb) return false;
      b = std::move(*nb);
    }
    return true;
  }

  Vector lambda() const {
    Vector v(total());
    for (std::size_t k = 0; k < layout_.count(); ++k) {
      auto out = layout_.view(std::span<double>(v), k);
      for_upper(layout_.order[k], [&](std::size_t i, std::size_t j, std::size_t q) {
        out[q] = i == j ? blocks_[k].lambda[i] : 0.0;
      });
    }
    return v;
  }

  // Linear maps in svec coordinates.
  Vector winv_t(std::span<const double> u) const { return apply(u, [](const BlockScaling& b) { return b.rinv; }, false); }
  Vector w_t(std::span<const double> u) const { return apply(u, [](const BlockScaling& b) { return b.r; }, false); }
  Vector winv(std::span<const double> u) const { return apply(u, [](const BlockScaling& b) { return b.rinv; }, true); }

  /// λ ∘ u (Jordan product with the diagonal λ).
  Vector lambda_prod(std::span<const double> u) const { return lambda_map(u, false); }
  /// Solves λ ∘ x = u.
  Vector lambda_div(std::span<const double> u) const { return lambda_map(u, true); }

  /// Largest α with Λ + α·D ⪰ 0 (infinity when D ⪰ 0).
  double max_step(std::span<const double> d) const {
    double worst = 0.0;
    for (std::size_t k = 0; k < layout_.count(); ++k) {
      const std::size_t p = layout_.order[k];
      const auto& lam = blocks_[k].lambda;
      SymMatrix m = smat(layout_.view(d, k), p);
      SymMatrix scaled_m(p);
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = i; j < p; ++j) scaled_m.set(i, j, m(i, j) / std::sqrt(lam[i] * lam[j]));
      worst = std::max(worst, -jacobi_eigen(scaled_m).values.front());
    }
    return worst > 0.0 ? 1.0 / worst : std::numeric_limits<double>::infinity();
  }

  /// Unscaled iterates s = Wᵀλ, z = W⁻¹λ.
  Vector s() const { return w_t(lambda()); }
  Vector z() const { return winv(lambda()); }

 private:
  std::size_t total() const { return layout_.offset.empty() ? 0 : layout_.offset.back() + svec_size(layout_.order.back()); }

  template <typename Pick>
  Vector apply(std::span<const double> u, Pick pick, bool transpose_left) const {
    Vector out(u.size());
    for (std::size_t k = 0; k < layout_.count(); ++k) {
      const std::size_t p = layout_.order[k];
      const Matrix m = smat(layout_.view(u, k), p).matrix();
      const Vector v = svec_of(sym_product(pick(blocks_[k]), m, transpose_left));
      std::copy(v.begin(), v.end(), layout_.view(std::span<double>(out), k).begin());
    }
    return out;
  }

  Vector lambda_map(std::span<const double> u, bool divide) const {
    Vector out(u.begin(), u.end());
    for (std::size_t k = 0; k < layout_.count(); ++k) {
      auto view = layout_.view(std::span<double>(out), k);
      const auto& lam = blocks_[k].lambda;
      for_upper(layout_.order[k], [&](std::size_t i, std::size_t j, std::size_t q) {
        const double f = 0.5 * (lam[i] + lam[j]);
        view[q] = divide ? view[q] / f : view[q] * f;
      });
    }
    return out;
  }

  const Layout& layout_;
  std::vector<BlockScaling> blocks_;
};

Vector jordan(const Layout& layout, std::span<const double> a, std::span<const double> b) {
  Vector out(a.size());
  for (std::size_t k = 0; k < layout.count(); ++k) {
    const std::size_t p = layout.order[k];
    const Matrix ma = smat(layout.view(a, k), p).matrix();
    const Matrix mb = smat(layout.view(b, k), p).matrix();
    Matrix prod = ma * mb + mb * ma;
    prod *= 0.5;
    const Vector v = svec_of(prod);
    std::copy(v.begin(), v.end(), layout.view(std::span<double>(out), k).begin());
  }
  return out;
}

Vector identity_element(const Layout& layout, std::size_t m) {
  Vector e(m, 0.0);
  for (std::size_t k = 0; k < layout.count(); ++k) {
    auto view = layout.view(std::span<double>(e), k);
    for_upper(layout.order[k], [&](std::size_t i, std::size_t j, std::size_t q) { view[q] = i == j ? 1.0 : 0.0; });
  }
  return e;
}

/// Largest t with −u + t·e on the boundary, i.e. −λ_min(u) over blocks.
double max_negative_eig(const Layout& layout, std::span<const double> u) {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < layout.count(); ++k)
    worst = std::max(worst, -jacobi_eigen(smat(layout.view(u, k), layout.order[k])).values.front());
  return worst;
}

Vector mat_t_vec(const Matrix& a, std::span<const double> y) {
  Vector out(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) axpy(y[i], a.row(i), out);
  return out;
}

/// Dense symmetric-indefinite KKT system [[0, Aᵀ, Gsᵀ], [A, 0, 0], [Gs, 0, −I]].
class KktSolver {
 public:
  KktSolver(const Matrix& a, const Matrix& gs, int refinement) : n_(gs.cols()), p_(a.rows()), m_(gs.rows()), refine_(refinement) {
    const std::size_t dim = n_ + p_ + m_;
    k_ = Matrix(dim, dim);
    for (std::size_t i = 0; i < p_; ++i)
      for (std::size_t j = 0; j < n_; ++j) {
        k_(n_ + i, j) = a(i, j);
        k_(j, n_ + i) = a(i, j);
      }
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        k_(n_ + p_ + i, j) = gs(i, j);
        k_(j, n_ + p_ + i) = gs(i, j);
      }
      k_(n_ + p_ + i, n_ + p_ + i) = -1.0;
    }
    lu_.emplace(k_);
  }

  bool singular() const { return lu_->singular(); }

  /// Returns [x; y; z].
  Vector solve(std::span<const double> rhs) const {
    Vector sol = lu_->solve(rhs);
    for (int it = 0; it < refine_; ++it) {
      const Vector res = sub(rhs, k_ * sol);
      const Vector corr = lu_->solve(res);
      axpy(1.0, corr, sol);
    }
    return sol;
  }

  std::size_t n() const { return n_; }
  std::size_t p() const { return p_; }
  std::size_t m() const { return m_; }

 private:
  std::size_t n_, p_, m_;
  int refine_;
  Matrix k_;
  std::optional<LuFactorization> lu_;
};

struct Split {
  Vector x, y, z;
};

Split split(const Vector& v, std::size_t n, std::size_t p) {
  return {Vector(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n)),
          Vector(v.begin() + static_cast<std::ptrdiff_t>(n), v.begin() + static_cast<std::ptrdiff_t>(n + p)),
          Vector(v.begin() + static_cast<std::ptrdiff_t>(n + p), v.end())};
}

Vector join(std::span<const double> a, std::span<const double> b, std::span<const double> c) {
  Vector v;
  v.reserve(a.size() + b.size() + c.size());
  v.insert(v.end(), a.begin(), a.end());
  v.insert(v.end(), b.begin(), b.end());
  v.insert(v.end(), c.begin(), c.end());
  return v;
}

}  // namespace

std::size_t svec_size(std::size_t order) { return order * (order + 1) / 2; }

Vector svec(const SymMatrix& m) { return svec_of(m.matrix()); }

SymMatrix smat(std::span<const double> v, std::size_t order) {
  if (v.size() != svec_size(order)) throw DimensionError("smat: wrong svec length");
  SymMatrix m(order);
  for_upper(order, [&](std::size_t i, std::size_t j, std::size_t k) { m.set(i, j, i == j ? v[k] : v[k] / kSqrt2); });
  return m;
}

std::size_t ConicProblem::degree() const { return std::accumulate(blocks.begin(), blocks.end(), std::size_t{0}); }

void ConicProblem::validate() const {
  std::size_t rows = 0;
  for (std::size_t p : blocks) {
    if (p == 0) throw std::invalid_argument("ConicProblem: empty cone block");
    rows += svec_size(p);
  }
  if (rows != h.size()) throw DimensionError("ConicProblem: block sizes do not match h");
  if (G.rows() != h.size() || G.cols() != c.size()) throw DimensionError("ConicProblem: G has wrong shape");
  if (A.rows() != b.size() || (A.rows() > 0 && A.cols() != c.size()))
    throw DimensionError("ConicProblem: A has wrong shape");
  if (!G.all_finite() || !A.all_finite()) throw std::invalid_argument("ConicProblem: non-finite data");
}

std::string to_string(ConicStatus s) {
  switch (s) {
    case ConicStatus::Optimal:
      return "optimal";
    case ConicStatus::PrimalInfeasible:
      return "primal_infeasible";
    case ConicStatus::DualInfeasible:
      return "dual_infeasible";
    case ConicStatus::MaxIter:
      return "max_iter";
  }
  return "?";
}

ConicResult solve_conic(const ConicProblem& pr, const ConicOptions& opt) {
  pr.validate();
  const std::size_t n = pr.n();
  const std::size_t m = pr.m();
  const std::size_t p = pr.p();
  const Matrix A = pr.A.rows() > 0 ? pr.A : Matrix(0, n);
  const Layout layout(pr.blocks);
  const double degree = static_cast<double>(pr.degree());
  const Vector e = identity_element(layout, m);

  const double resx0 = std::max(1.0, norm2(pr.c));
  const double resy0 = std::max(1.0, norm2(pr.b));
  const double resz0 = std::max(1.0, norm2(pr.h));

  ConicResult res;
  Vector zero_m(m, 0.0);

  // Starting point from two least-squares solves with W = I.
  Vector x, y, s, z;
  {
    const KktSolver kkt(A, pr.G, opt.refinement_steps);
    if (kkt.singular()) {
      res.message = "KKT system singular at the starting point (rank-deficient A or [A; G])";
      return res;
    }
    const Split primal = split(kkt.solve(join(Vector(n, 0.0), pr.b, pr.h)), n, p);
    x = primal.x;
    s = scaled(primal.z, -1.0);
    const Split dual = split(kkt.solve(join(scaled(pr.c, -1.0), Vector(p, 0.0), zero_m)), n, p);
    y = dual.y;
    z = dual.z;
    const double ts = max_negative_eig(layout, s);
    const double tz = max_negative_eig(layout, z);
    if (ts >= -1e-8 * std::max(norm2(s), 1.0)) axpy(1.0 + ts, e, s);
    if (tz >= -1e-8 * std::max(norm2(z), 1.0)) axpy(1.0 + tz, e, z);
  }
  double tau = 1.0;
  double kappa = 1.0;

  Scaling W(layout);
  if (!W.init(s, z)) {
    res.message = "failed to factor the starting point";
    return res;
  }

  auto finish = [&](ConicStatus status, int iters) {
    res.status = status;
    res.iterations = iters;
    if (status == ConicStatus::Optimal || status == ConicStatus::MaxIter) {
      res.x = scaled(x, 1.0 / tau);
      res.y = scaled(y, 1.0 / tau);
      res.z = scaled(z, 1.0 / tau);
      res.s = scaled(s, 1.0 / tau);
    } else {
      res.x = x;
      res.y = y;
      res.z = z;
      res.s = s;
    }
    res.pcost = dot(pr.c, res.x);
    res.dcost = -dot(pr.b, res.y) - dot(pr.h, res.z);
    const Vector ry = p > 0 ? sub(A * std::span<const double>(res.x), pr.b) : Vector{};
    const Vector rz = sub(add(pr.G * std::span<const double>(res.x), res.s), pr.h);
    res.primal_residual = std::max(norm2(ry), norm2(rz));
    Vector rx = add(mat_t_vec(pr.G, res.z), pr.c);
    if (p > 0) axpy(1.0, mat_t_vec(A, res.y), rx);
    res.dual_residual = norm2(rx);
    res.gap = dot(res.s, res.z);
    return res;
  };

  // Best iterate by the worst of the three stopping measures. On degenerate
  // problems the residuals can climb again once the cone scaling loses
  // accuracy; we then fall back to the best point seen.
  struct Snapshot {
    Vector x, y, s, z;
    double tau = 1.0, kappa = 1.0;
    double merit = std::numeric_limits<double>::infinity();
    int iter = 0;
  } best;
  constexpr int kStallWindow = 10;

  for (int iter = 0; iter <= opt.max_iter; ++iter) {
    s = W.s();
    z = W.z();
    const Vector lam = W.lambda();
    const double gap = dot(lam, lam);
    const double mu = (gap + tau * kappa) / (degree + 1.0);

    // Residuals of the embedding.
    Vector rx = add(mat_t_vec(pr.G, z), scaled(pr.c, tau));
    if (p > 0) axpy(1.0, mat_t_vec(A, y), rx);
    Vector ry = p > 0 ? sub(A * std::span<const double>(x), scaled(pr.b, tau)) : Vector{};
    Vector rz = sub(add(pr.G * std::span<const double>(x), s), scaled(pr.h, tau));
    const double cx = dot(pr.c, x);
    const double by_hz = dot(pr.b, y) + dot(pr.h, z);
    const double rt = kappa + cx + by_hz;

    const double pcost = cx / tau;
    const double dcost = -by_hz / tau;
    const double pres = std::max(norm2(ry) / resy0, norm2(rz) / resz0) / tau;
    const double dres = norm2(rx) / resx0 / tau;
    const double abs_gap = gap / (tau * tau);
    double relgap = std::numeric_limits<double>::infinity();
    if (pcost < 0.0) relgap = abs_gap / -pcost;
    else if (dcost > 0.0) relgap = abs_gap / dcost;

    Vector hx = mat_t_vec(pr.G, z);
    if (p > 0) axpy(1.0, mat_t_vec(A, y), hx);
    const double pinfres = by_hz < 0.0 ? norm2(hx) / resx0 / -by_hz : std::numeric_limits<double>::infinity();
    const double dinfres = cx < 0.0
        ? std::max(p > 0 ? norm2(A * std::span<const double>(x)) / resy0 : 0.0,
                   norm2(add(pr.G * std::span<const double>(x), s)) / resz0) / -cx
        : std::numeric_limits<double>::infinity();

    if (opt.record_iterates)
      res.iterates.push_back({iter, pcost, dcost, abs_gap, pres, dres, tau, kappa, 0.0, 0.0});

    const double merit = std::max({pres, dres, std::min(relgap, abs_gap / (1.0 + std::min(std::abs(pcost), std::abs(dcost))))});
    if (std::isfinite(merit) && merit < best.merit) best = {x, y, s, z, tau, kappa, merit, iter};

    if (pres <= opt.feas_tol && dres <= opt.feas_tol &&
        (abs_gap <= opt.gap_tol * (1.0 + std::min(std::abs(pcost), std::abs(dcost))) || relgap <= opt.gap_tol))
      return finish(ConicStatus::Optimal, iter);
    if (pinfres <= opt.feas_tol) {
      // Normalize the certificate to hᵀz + bᵀy = −1.
      const double t = -by_hz;
      y = scaled(y, 1.0 / t);
      z = scaled(z, 1.0 / t);
      x.assign(n, 0.0);
      s.assign(m, 0.0);
      res.certificate_residual = pinfres;
      return finish(ConicStatus::PrimalInfeasible, iter);
    }
    if (dinfres <= opt.feas_tol) {
      const double t = -cx;
      x = scaled(x, 1.0 / t);
      s = scaled(s, 1.0 / t);
      y.assign(p, 0.0);
      z.assign(m, 0.0);
      res.certificate_residual = dinfres;
      return finish(ConicStatus::DualInfeasible, iter);
    }
    if (iter == opt.max_iter) break;
    if (iter - best.iter > kStallWindow) {
      res.message = "no progress; returning best iterate";
      break;
    }

    // Newton system in scaled variables.
    Matrix gs(m, n);
    for (std::size_t j = 0; j < n; ++j) {
      const Vector col = W.winv_t(pr.G.col(j));
      for (std::size_t i = 0; i < m; ++i) gs(i, j) = col[i];
    }
    const Vector hs = W.winv_t(pr.h);
    const KktSolver kkt(A, gs, opt.refinement_steps);
    if (kkt.singular()) {
      res.message = "KKT system became singular";
      break;
    }
    auto wdot = [&](const Split& u) { return dot(pr.c, u.x) + dot(pr.b, u.y) + dot(hs, u.z); };
    const Split u1 = split(kkt.solve(join(scaled(pr.c, -1.0), pr.b, hs)), n, p);
    const double w1 = wdot(u1);
    const Vector wrz = W.winv_t(rz);

    struct Direction {
      Vector dx, dy, dz, ds;
      double dtau, dkappa;
    };
    auto direction = [&](double eta, const Vector& rc, double rk) {
      Vector rhs_z = scaled(wrz, -eta);
      axpy(-1.0, W.lambda_div(rc), rhs_z);
      const Split u0 = split(kkt.solve(join(scaled(rx, -eta), scaled(ry, -eta), rhs_z)), n, p);
      const double w0 = wdot(u0);
      Direction d;
      d.dtau = (rk + tau * (eta * rt + w0)) / (kappa - tau * w1);
      d.dkappa = -eta * rt - w0 - d.dtau * w1;
      d.dx = u0.x;
      axpy(d.dtau, u1.x, d.dx);
      d.dy = u0.y;
      axpy(d.dtau, u1.y, d.dy);
      d.dz = u0.z;
      axpy(d.dtau, u1.z, d.dz);
      d.ds = sub(W.lambda_div(rc), d.dz);
      return d;
    };
    auto max_alpha = [&](const Direction& d) {
      double a = std::min(W.max_step(d.ds), W.max_step(d.dz));
      if (d.dtau < 0.0) a = std::min(a, -tau / d.dtau);
      if (d.dkappa < 0.0) a = std::min(a, -kappa / d.dkappa);
      return a;
    };

    // Predictor.
    const Vector lam_sq = jordan(layout, lam, lam);
    const Direction aff = direction(1.0, scaled(lam_sq, -1.0), -tau * kappa);
    const double alpha_aff = std::min(1.0, max_alpha(aff));
    const double sigma = std::pow(1.0 - alpha_aff, 3);

    // Corrector.
    Vector rc = scaled(lam_sq, -1.0);
    axpy(sigma * mu, e, rc);
    axpy(-1.0, jordan(layout, aff.ds, aff.dz), rc);
    const double rk = -tau * kappa + sigma * mu - aff.dtau * aff.dkappa;
    const Direction dir = direction(1.0 - sigma, rc, rk);
    const double alpha = std::min(1.0, opt.step_fraction * max_alpha(dir));
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
      res.message = "step length collapsed";
      break;
    }

    axpy(alpha, dir.dx, x);
    axpy(alpha, dir.dy, y);
    tau += alpha * dir.dtau;
    kappa += alpha * dir.dkappa;
    if (!W.update(dir.ds, dir.dz, alpha)) {
      res.message = "lost positive definiteness while rescaling";
      break;
    }
    if (opt.record_iterates) {
      res.iterates.back().step = alpha;
      res.iterates.back().sigma = sigma;
    }
  }
  if (std::isfinite(best.merit)) {
    x = best.x;
    y = best.y;
    s = best.s;
    z = best.z;
    tau = best.tau;
    kappa = best.kappa;
  } else {
    s = W.s();
    z = W.z();
  }
  if (res.message.empty()) res.message = "iteration limit reached";
  return finish(ConicStatus::MaxIter, static_cast<int>(res.iterates.size()));
}

}  // namespace pepkit
