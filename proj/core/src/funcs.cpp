#include "pepkit/funcs.hpp"

#include <algorithm>
#include <cmath>

namespace pepkit {

namespace {

constexpr double kKappaGuard = 1e-8;

double fd_step(std::span<const double> x) { return 1e-6 * (1.0 + norm2(x)); }

void require_in_domain(const FunctionOracle& f, std::span<const double> x, const char* what) {
  if (x.size() != f.dim()) throw DimensionError(what);
  if (!f.domain().contains(x)) throw DomainError(std::string(what) + ": point outside domain");
}

double kappa_checked(double mu, double L) {
  if (!(L > 0.0) || !(mu > 0.0)) throw std::invalid_argument("need L > mu > 0");
  const double kappa = mu / L;
  if (kappa >= 1.0 - kKappaGuard)
    throw std::invalid_argument("kappa = mu/L too close to 1; use the limit check");
  return kappa;
}

}  // namespace

DomainSpec DomainSpec::ball(Vector center, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("ball radius must be positive");
  DomainSpec d;
  d.kind = Kind::Ball;
  d.center = std::move(center);
  d.radius = radius;
  return d;
}

DomainSpec DomainSpec::box(Vector lo, Vector hi) {
  if (lo.size() != hi.size()) throw DimensionError("box bounds differ in dimension");
  for (std::size_t i = 0; i < lo.size(); ++i)
    if (!(lo[i] < hi[i])) throw std::invalid_argument("box requires lo < hi componentwise");
  DomainSpec d;
  d.kind = Kind::Box;
  d.lo = std::move(lo);
  d.hi = std::move(hi);
  return d;
}

bool DomainSpec::contains(std::span<const double> x) const {
  if (!std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); })) return false;
  switch (kind) {
    case Kind::AllSpace:
      return true;
    case Kind::Ball:
      return x.size() == center.size() && norm2(sub(x, center)) < radius;
    case Kind::Box:
      if (x.size() != lo.size()) return false;
      for (std::size_t i = 0; i < x.size(); ++i)
        if (!(x[i] > lo[i] && x[i] < hi[i])) return false;
      return true;
  }
  return false;
}

QuadraticFunction::QuadraticFunction(SymMatrix q, Vector c) : q_(std::move(q)), c_(std::move(c)) {
  if (c_.size() != q_.dim()) throw DimensionError("QuadraticFunction: c has wrong dimension");
  spectrum_ = eig_bounds(q_);
  if (!(spectrum_.min > 0.0)) throw std::invalid_argument("QuadraticFunction: Q must be positive definite");
  auto l = cholesky(q_);
  if (!l) throw std::invalid_argument("QuadraticFunction: Q must be positive definite");
  xstar_ = scaled(solve_upper_transposed(*l, solve_lower(*l, c_)), -1.0);
}

QuadraticFunction::QuadraticFunction(SymMatrix q) : QuadraticFunction(q, Vector(q.dim(), 0.0)) {}

double QuadraticFunction::value(std::span<const double> x) const { return 0.5 * q_.quad(x) + dot(c_, x); }

Vector QuadraticFunction::gradient(std::span<const double> x) const { return add(q_ * x, c_); }

ClassMeta QuadraticFunction::meta() const {
  ClassMeta m;
  m.mu = spectrum_.min;
  m.L = spectrum_.max;
  return m;
}

LogBarrierBox::LogBarrierBox(Vector a, Vector b, Vector c) : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {
  (void)DomainSpec::box(a_, b_);
  if (c_.empty()) c_.assign(a_.size(), 0.0);
  if (c_.size() != a_.size()) throw DimensionError("LogBarrierBox: linear term has wrong dimension");
}

void LogBarrierBox::require_interior(std::span<const double> x) const {
  if (x.size() != dim()) throw DimensionError("LogBarrierBox: dimension mismatch");
  if (!domain().contains(x)) throw DomainError("LogBarrierBox: point outside the open box");
}

double LogBarrierBox::value(std::span<const double> x) const {
  require_interior(x);
  double f = dot(c_, x);
  for (std::size_t i = 0; i < dim(); ++i) f -= std::log(x[i] - a_[i]) + std::log(b_[i] - x[i]);
  return f;
}

Vector LogBarrierBox::gradient(std::span<const double> x) const {
  require_interior(x);
  Vector g(dim());
  for (std::size_t i = 0; i < dim(); ++i) g[i] = c_[i] - 1.0 / (x[i] - a_[i]) + 1.0 / (b_[i] - x[i]);
  return g;
}

SymMatrix LogBarrierBox::hessian(std::span<const double> x) const {
  require_interior(x);
  Vector d(dim());
  for (std::size_t i = 0; i < dim(); ++i) {
    const double u = x[i] - a_[i];
    const double v = b_[i] - x[i];
    d[i] = 1.0 / (u * u) + 1.0 / (v * v);
  }
  return SymMatrix::diagonal(d);
}

ClassMeta LogBarrierBox::meta() const {
  ClassMeta m;
  m.self_concordant = true;
  if (std::all_of(c_.begin(), c_.end(), [](double v) { return v == 0.0; }))
    m.theta = 2.0 * static_cast<double>(dim());
  return m;
}

std::optional<Vector> LogBarrierBox::minimizer() const {
  // Per coordinate c = 1/u − 1/(w−u) with u = x − a, w = b − a.
  Vector x(dim());
  for (std::size_t i = 0; i < dim(); ++i) {
    const double w = b_[i] - a_[i];
    const double cw = c_[i] * w;
    x[i] = a_[i] + 2.0 * w / (cw + 2.0 + std::sqrt(cw * cw + 4.0));
  }
  return x;
}

double check_condition_d(const FunctionOracle& f, std::span<const double> x, std::span<const double> y,
                         double mu, double L) {
  const double kappa = kappa_checked(mu, L);
  require_in_domain(f, x, "check_condition_d");
  require_in_domain(f, y, "check_condition_d");
  const Vector dg = sub(f.gradient(x), f.gradient(y));
  const Vector dx = sub(x, y);
  const double cross = dot(dg, dx);
  return cross - (dot(dg, dg) / L + mu * dot(dx, dx) - 2.0 * kappa * cross) / (1.0 - kappa);
}

double check_condition_f(const FunctionOracle& f, std::span<const double> x, std::span<const double> y,
                         double mu, double L) {
  const double kappa = kappa_checked(mu, L);
  if (f.domain().kind != DomainSpec::Kind::AllSpace)
    throw DomainError("check_condition_f: only valid for functions defined on all of R^n");
  if (x.size() != f.dim() || y.size() != f.dim()) throw DimensionError("check_condition_f: dimension mismatch");
  const Vector gx = f.gradient(x);
  const Vector gy = f.gradient(y);
  const Vector dg = sub(gx, gy);
  const Vector dx = sub(x, y);
  const double lhs = f.value(x) - f.value(y) - dot(gy, dx);
  return lhs - (dot(dg, dg) / L + mu * dot(dx, dx) - 2.0 * kappa * dot(dg, dx)) / (2.0 * (1.0 - kappa));
}

double check_smoothness_c(const FunctionOracle& f, std::span<const double> x, std::span<const double> y, double L) {
  if (!(L > 0.0)) throw std::invalid_argument("check_smoothness_c: L must be positive");
  require_in_domain(f, x, "check_smoothness_c");
  require_in_domain(f, y, "check_smoothness_c");
  const Vector dg = sub(f.gradient(y), f.gradient(x));
  return dot(dg, sub(y, x)) - dot(dg, dg) / L;
}

double check_condition_d_limit(const FunctionOracle& f, std::span<const double> x, std::span<const double> y,
                               double mu) {
  require_in_domain(f, x, "check_condition_d_limit");
  require_in_domain(f, y, "check_condition_d_limit");
  const Vector dx = sub(x, y);
  return dot(sub(f.gradient(x), f.gradient(y)), dx) - mu * dot(dx, dx);
}

MetricOperator intrinsic_metric(const FunctionOracle& f, std::span<const double> x) {
  require_in_domain(f, x, "intrinsic_metric");
  return MetricOperator(f.hessian(x));
}

double intrinsic_norm(const FunctionOracle& f, std::span<const double> x, std::span<const double> u,
                      const MetricOperator& reference) {
  require_in_domain(f, x, "intrinsic_norm");
  auto l = cholesky(reference.matrix());
  if (!l) throw std::domain_error("intrinsic_norm: reference metric not positive definite");
  const Vector hu = f.hessian(x) * u;
  const Vector hb = solve_upper_transposed(*l, solve_lower(*l, hu));
  return std::sqrt(std::max(0.0, inner(reference, u, hb)));
}

SandwichResult sc_sandwich(const FunctionOracle& f, std::span<const double> x, double delta, std::size_t samples,
                           std::mt19937_64& rng, double tol) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("sc_sandwich: need 0 < delta < 1");
  require_in_domain(f, x, "sc_sandwich");
  SandwichResult out;
  out.mu = (1.0 - delta) * (1.0 - delta);
  out.L = 1.0 / out.mu;
  out.verified = true;
  out.min_eig = 1.0;
  out.max_eig = 1.0;

  const SymMatrix hx = f.hessian(x);
  const SymMatrix hx_isqrt = inv_sqrt_spd(hx);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif(0.0, delta);
  const std::size_t n = f.dim();

  for (std::size_t s = 0; s < samples; ++s) {
    Vector w(n);
    for (double& wi : w) wi = gauss(rng);
    const double r = unif(rng);
    const Vector dir = hx_isqrt * scaled(w, 1.0 / norm2(w));
    const Vector y = add(x, scaled(dir, r));
    if (!f.domain().contains(y)) {
      out.verified = false;
      continue;
    }
    const auto rel = congruence(f.hessian(y), hx_isqrt.matrix());
    const auto eb = eig_bounds(rel);
    out.min_eig = std::min(out.min_eig, eb.min);
    out.max_eig = std::max(out.max_eig, eb.max);
    if (eb.min < out.mu - tol || eb.max > out.L + tol) out.verified = false;
    const double lo = (1.0 - r) * (1.0 - r);
    out.radius_violation = std::max({out.radius_violation, lo - eb.min, eb.max - 1.0 / lo});
    ++out.samples;
  }
  return out;
}

double barrier_parameter_check(const FunctionOracle& f, const std::vector<Vector>& points) {
  double best = 0.0;
  for (const auto& p : points) {
    require_in_domain(f, p, "barrier_parameter_check");
    auto l = cholesky(f.hessian(p));
    if (!l) throw std::domain_error("barrier_parameter_check: Hessian not positive definite");
    const Vector w = solve_lower(*l, f.gradient(p));
    best = std::max(best, dot(w, w));
  }
  return best;
}

double gradient_fd_error(const FunctionOracle& f, std::span<const double> x) {
  require_in_domain(f, x, "gradient_fd_error");
  const double h = fd_step(x);
  const Vector g = f.gradient(x);
  Vector fd(g.size());
  Vector xp(x.begin(), x.end());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double xi = xp[i];
    xp[i] = xi + h;
    const double fp = f.value(xp);
    xp[i] = xi - h;
    const double fm = f.value(xp);
    xp[i] = xi;
    fd[i] = (fp - fm) / (2.0 * h);
  }
  return norm2(sub(g, fd)) / std::max(1.0, norm2(g));
}

double hessian_fd_error(const FunctionOracle& f, std::span<const double> x) {
  require_in_domain(f, x, "hessian_fd_error");
  const double h = fd_step(x);
  const SymMatrix hx = f.hessian(x);
  Matrix fd(hx.dim(), hx.dim());
  Vector xp(x.begin(), x.end());
  for (std::size_t j = 0; j < hx.dim(); ++j) {
    const double xj = xp[j];
    xp[j] = xj + h;
    const Vector gp = f.gradient(xp);
    xp[j] = xj - h;
    const Vector gm = f.gradient(xp);
    xp[j] = xj;
    for (std::size_t i = 0; i < hx.dim(); ++i) fd(i, j) = (gp[i] - gm[i]) / (2.0 * h);
  }
  return (hx.matrix() - fd).frobenius_norm() / std::max(1.0, hx.frobenius_norm());
}

}  // namespace pepkit
