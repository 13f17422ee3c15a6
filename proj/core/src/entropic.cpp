#include "pepkit/entropic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pepkit/cert.hpp"

namespace pepkit {

namespace {

// B_{2k}/(2k)! for k = 1..8.
constexpr std::array<double, 8> kBern = {
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
    1.0 / 74724249600.0,
    -3617.0 / 10670622842880000.0,
};

constexpr double kSeriesSwitch = 0.5;

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

void check_box(const Box& box) {
  if (box.lo.empty() || box.lo.size() != box.hi.size()) throw DimensionError("box: lo and hi must be nonempty and of equal size");
  for (std::size_t i = 0; i < box.lo.size(); ++i) {
    if (!std::isfinite(box.lo[i]) || !std::isfinite(box.hi[i])) throw DomainError("box: unbounded side");
    if (!(box.lo[i] < box.hi[i])) throw DomainError("box: empty interior");
  }
}

bool box_contains(const Box& box, std::span<const double> x) {
  if (x.size() != box.lo.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!(x[i] > box.lo[i] && x[i] < box.hi[i])) return false;
  return true;
}

// Per-coordinate A_i(θ_i) = −θ_i a_i + ln w_i + φ(θ_i w_i).
double coord_log_partition(double a, double w, double th) { return -th * a + std::log(w) + unit_log_partition(th * w); }

// ‖u‖ in the metric Σ⁻¹ for diagonal Σ given as a vector.
double diag_inv_norm(std::span<const double> u, std::span<const double> var) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * u[i] / var[i];
  return std::sqrt(s);
}

Vector diag_of(const SymMatrix& m) {
  Vector d(m.dim());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = m(i, i);
  return d;
}

}  // namespace

// ------------------------------------------------------------------ bodies

std::size_t body_dim(const ConvexBody& k) {
  if (const auto* b = std::get_if<Box>(&k)) return b->lo.size();
  return std::get<Polytope>(k).A.cols();
}

bool body_contains(const ConvexBody& k, std::span<const double> x) {
  if (const auto* b = std::get_if<Box>(&k)) return box_contains(*b, x);
  const auto& p = std::get<Polytope>(k);
  if (x.size() != p.A.cols()) return false;
  for (std::size_t r = 0; r < p.A.rows(); ++r)
    if (!(dot(p.A.row(r), x) < p.b[r])) return false;
  return true;
}

Polytope to_polytope(const Box& box) {
  check_box(box);
  const std::size_t n = box.lo.size();
  Polytope p{Matrix(2 * n, n), Vector(2 * n)};
  for (std::size_t i = 0; i < n; ++i) {
    p.A(2 * i, i) = 1.0;
    p.b[2 * i] = box.hi[i];
    p.A(2 * i + 1, i) = -1.0;
    p.b[2 * i + 1] = -box.lo[i];
  }
  return p;
}

void BoltzmannModel::validate() const {
  if (const auto* b = std::get_if<Box>(&domain)) {
    check_box(*b);
  } else {
    const auto& p = std::get<Polytope>(domain);
    if (p.A.rows() == 0 || p.A.cols() == 0 || p.A.rows() != p.b.size())
      throw DimensionError("polytope: A and b sizes disagree");
    if (p.A.rows() <= p.A.cols()) throw DomainError("polytope: needs more than n rows to be bounded");
  }
  if (theta.size() != dim()) throw DimensionError("BoltzmannModel: theta has wrong size");
  for (double t : theta)
    if (!std::isfinite(t)) throw std::invalid_argument("BoltzmannModel: theta must be finite");
}

// ------------------------------------------------------------- unit interval

double unit_log_partition(double t) {
  if (std::fabs(t) < kSeriesSwitch) {
    const double t2 = t * t;
    double p = t2, s = 0.0;
    for (std::size_t k = 0; k < kBern.size(); ++k) {
      s += kBern[k] * p / (2.0 * static_cast<double>(k + 1));
      p *= t2;
    }
    return -0.5 * t + s;
  }
  if (t > 0.0) return std::log(-std::expm1(-t)) - std::log(t);
  return -t + unit_log_partition(-t);
}

double unit_mean(double t) {
  if (std::fabs(t) < kSeriesSwitch) {
    const double t2 = t * t;
    double p = t, s = 0.0;
    for (double c : kBern) {
      s += c * p;
      p *= t2;
    }
    return 0.5 - s;
  }
  if (t > 0.0) return 1.0 / t - 1.0 / std::expm1(t);
  return 1.0 - unit_mean(-t);
}

double unit_variance(double t) {
  if (std::fabs(t) < kSeriesSwitch) {
    const double t2 = t * t;
    double p = 1.0, s = 0.0;
    for (std::size_t k = 0; k < kBern.size(); ++k) {
      s += kBern[k] * static_cast<double>(2 * k + 1) * p;
      p *= t2;
    }
    return s;
  }
  const double a = std::fabs(t);
  const double em = -std::expm1(-a);
  return 1.0 / (a * a) - std::exp(-a) / (em * em);
}

double unit_mean_inverse(double y, double one_minus_y) {
  if (!(y > 0.0 && one_minus_y > 0.0)) throw DomainError("unit_mean_inverse: mean must lie strictly inside (0, 1)");
  if (y > 0.5) return -unit_mean_inverse(one_minus_y, y);
  if (y == 0.5) return 0.0;
  // m is decreasing and convex on t ≥ 0 with m(1/y) < y, so the root lies in
  // (0, 1/y) and Newton from the left increases monotonically.
  double lo = 0.0, hi = 1.0 / y;
  double t = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double h = unit_mean(t) - y;
    if (h > 0.0) lo = t; else hi = t;
    double next = t + h / unit_variance(t);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::fabs(next - t) <= 1e-15 * std::max(1.0, std::fabs(t))) return next;
    t = next;
  }
  return t;
}

// ------------------------------------------------------------ log partition

LogPartition log_partition_box(const Box& box, std::span<const double> theta) {
  check_box(box);
  const std::size_t n = box.lo.size();
  if (theta.size() != n) throw DimensionError("log_partition_box: theta has wrong size");
  LogPartition out{0.0, Vector(n), SymMatrix(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const double a = box.lo[i], w = box.hi[i] - box.lo[i];
    const double t = theta[i] * w;
    out.A += coord_log_partition(a, w, theta[i]);
    out.grad[i] = -(a + w * unit_mean(t));
    out.hess.set(i, i, w * w * unit_variance(t));
  }
  return out;
}

LogPartition log_partition_box(const BoltzmannModel& model) {
  const auto* box = std::get_if<Box>(&model.domain);
  if (!box) throw std::invalid_argument("log_partition_box: closed forms need a box domain");
  model.validate();
  return log_partition_box(*box, model.theta);
}

Vector central_path_point(const Box& box, std::span<const double> theta_hat, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("central_path_point: eta must be positive");
  check_box(box);
  if (theta_hat.size() != box.lo.size()) throw DimensionError("central_path_point: theta_hat has wrong size");
  Vector x(box.lo.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = box.hi[i] - box.lo[i];
    const double t = eta * theta_hat[i] * w;
    // Take the mean from the nearer endpoint.
    x[i] = t >= 0.0 ? box.lo[i] + w * unit_mean(t) : box.hi[i] - w * unit_mean(-t);
  }
  return x;
}

Vector conjugate_point(const Box& box, std::span<const double> x) {
  check_box(box);
  if (!box_contains(box, x)) throw DomainError("conjugate_point: x must lie strictly inside the box");
  Vector th(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = box.hi[i] - box.lo[i];
    th[i] = unit_mean_inverse((x[i] - box.lo[i]) / w, (box.hi[i] - x[i]) / w) / w;
  }
  return th;
}

Vector entropic_gradient(std::span<const double> x0, double eta, std::span<const double> theta_hat, const Box& box) {
  if (theta_hat.size() != x0.size()) throw DimensionError("entropic_gradient: theta_hat has wrong size");
  Vector g = conjugate_point(box, x0);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = eta * theta_hat[i] - g[i];
  return g;
}

// --------------------------------------------------------- barrier oracle

EntropicBarrierBox::EntropicBarrierBox(Box box, Vector c) : box_(std::move(box)), c_(std::move(c)) {
  check_box(box_);
  if (c_.empty()) c_.assign(box_.lo.size(), 0.0);
  if (c_.size() != box_.lo.size()) throw DimensionError("EntropicBarrierBox: linear term has wrong size");
}

void EntropicBarrierBox::require_interior(std::span<const double> x) const {
  if (x.size() != dim()) throw DimensionError("EntropicBarrierBox: wrong dimension");
  if (!box_contains(box_, x)) throw DomainError("EntropicBarrierBox: point outside the open box");
}

double EntropicBarrierBox::value(std::span<const double> x) const {
  require_interior(x);
  const Vector th = conjugate_point(box_, x);
  double v = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = box_.hi[i] - box_.lo[i];
    v += c_[i] * x[i] - th[i] * x[i] - coord_log_partition(box_.lo[i], w, th[i]);
  }
  return v;
}

Vector EntropicBarrierBox::gradient(std::span<const double> x) const {
  require_interior(x);
  Vector g = conjugate_point(box_, x);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = c_[i] - g[i];
  return g;
}

SymMatrix EntropicBarrierBox::hessian(std::span<const double> x) const {
  require_interior(x);
  const Vector th = conjugate_point(box_, x);
  SymMatrix h(dim());
  for (std::size_t i = 0; i < dim(); ++i) {
    const double w = box_.hi[i] - box_.lo[i];
    h.set(i, i, 1.0 / (w * w * unit_variance(th[i] * w)));
  }
  return h;
}

ClassMeta EntropicBarrierBox::meta() const {
  ClassMeta m;
  m.self_concordant = true;
  m.theta = static_cast<double>(dim());
  return m;
}

std::optional<Vector> EntropicBarrierBox::minimizer() const {
  Vector x = log_partition_box(box_, c_).grad;
  for (double& v : x) v = -v;
  return x;
}

double hessian_conjugacy_check(const Box& box, double eta, std::span<const double> theta_hat) {
  const Vector xs = central_path_point(box, theta_hat, eta);
  const std::size_t n = xs.size();
  Matrix jac(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    const double room = std::min(xs[j] - box.lo[j], box.hi[j] - xs[j]);
    const double h = 1e-5 * room;
    Vector xp = xs, xm = xs;
    xp[j] += h;
    xm[j] -= h;
    const Vector gp = entropic_gradient(xp, eta, theta_hat, box);
    const Vector gm = entropic_gradient(xm, eta, theta_hat, box);
    for (std::size_t i = 0; i < n; ++i) jac(i, j) = (gp[i] - gm[i]) / (2.0 * h);
  }
  const SymMatrix hess_f(jac, 1e-4);
  const SymMatrix cov = log_partition_box(box, scaled(theta_hat, eta)).hess;
  const SymMatrix diff = inverse_spd(hess_f) - cov;
  return diff.frobenius_norm() / cov.frobenius_norm();
}

// ------------------------------------------------------------ hit-and-run

std::vector<Vector> hit_and_run(const BoltzmannModel& model, std::span<const double> x_start, std::size_t count,
                                std::uint64_t seed, HitAndRunOptions options) {
  model.validate();
  const std::size_t n = model.dim();
  if (x_start.size() != n) throw DimensionError("hit_and_run: start has wrong size");
  if (!body_contains(model.domain, x_start)) throw DomainError("hit_and_run: start must be strictly interior");
  if (options.thinning == 0) throw std::invalid_argument("hit_and_run: thinning must be positive");
  const std::size_t burn = options.burn_in == 0 ? 50 * n : options.burn_in;

  const Box* box = std::get_if<Box>(&model.domain);
  const Polytope* poly = std::get_if<Polytope>(&model.domain);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  auto unif = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  Vector x(x_start.begin(), x_start.end());
  Vector u(n), y(n);
  constexpr double inf = std::numeric_limits<double>::infinity();

  Matrix shape;
  if (options.direction_cov) {
    if (options.direction_cov->dim() != n) throw DimensionError("hit_and_run: direction covariance has wrong size");
    auto l = cholesky(*options.direction_cov);
    if (!l) throw std::invalid_argument("hit_and_run: direction covariance must be positive definite");
    shape = std::move(*l);
  }
  Vector z(n);

  auto step = [&] {
    double nu = 0.0;
    do {
      for (double& v : z) v = normal(rng);
      nu = norm2(z);
    } while (nu == 0.0);
    if (shape.empty()) {
      for (std::size_t i = 0; i < n; ++i) u[i] = z[i] / nu;
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j <= i; ++j) acc += shape(i, j) * z[j];
        u[i] = acc;
      }
    }

    // Chord {x + s u : lo < s < hi}.
    double lo = -inf, hi = inf;
    auto clip = [&](double coef, double slack) {  // coef·s < slack
      if (coef > 0.0) hi = std::min(hi, slack / coef);
      else if (coef < 0.0) lo = std::max(lo, slack / coef);
    };
    if (box) {
      for (std::size_t i = 0; i < n; ++i) {
        clip(u[i], box->hi[i] - x[i]);
        clip(-u[i], x[i] - box->lo[i]);
      }
    } else {
      for (std::size_t r = 0; r < poly->A.rows(); ++r) clip(dot(poly->A.row(r), u), poly->b[r] - dot(poly->A.row(r), x));
    }
    if (!std::isfinite(lo) || !std::isfinite(hi)) throw DomainError("hit_and_run: unbounded chord");
    const double len = hi - lo;
    if (!(len >= 1e-14)) throw DomainError("hit_and_run: degenerate chord");

    // Density on the chord ∝ exp(−c s), c = θᵀu.
    const double c = dot(model.theta, u);
    const double r = unif();
    double s;
    if (std::fabs(c) * len < 1e-12) {
      s = lo + r * len;
    } else {
      const double off = -std::log1p(r * std::expm1(-std::fabs(c) * len)) / std::fabs(c);
      s = c > 0.0 ? lo + off : hi - off;
    }
    s = std::clamp(s, lo, hi);
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + s * u[i];
    // Endpoints are excluded; stay put if rounding put y on the boundary.
    if (body_contains(model.domain, y)) std::swap(x, y);
  };

  for (std::size_t i = 0; i < burn; ++i) step();
  std::vector<Vector> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    for (std::size_t t = 0; t < options.thinning; ++t) step();
    out.push_back(x);
  }
  return out;
}

// ------------------------------------------------------------- covariance

CovarianceEstimate empirical_covariance(const std::vector<Vector>& samples) {
  if (samples.size() < 2) throw std::invalid_argument("empirical_covariance: need at least two samples");
  const std::size_t n = samples.front().size();
  Vector mean(n, 0.0);
  for (const auto& s : samples) {
    if (s.size() != n) throw DimensionError("empirical_covariance: ragged samples");
    axpy(1.0, s, mean);
  }
  const double N = static_cast<double>(samples.size());
  for (double& m : mean) m /= N;
  Matrix acc(n, n);
  Vector dev(n);
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < n; ++i) dev[i] = s[i] - mean[i];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) acc(i, j) += dev[i] * dev[j];
  }
  SymMatrix sigma(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) sigma.set(i, j, acc(i, j) / N);
  return {std::move(sigma), samples.size(), std::nullopt};
}

SandwichSpectrum sandwich_spectrum(const SymMatrix& sigma, const SymMatrix& sigma_hat) {
  if (sigma.dim() != sigma_hat.dim() || sigma.dim() == 0) throw DimensionError("sandwich: dimension mismatch");
  const EigBounds hb = eig_bounds(sigma_hat);
  if (!(hb.min > 1e-14 * std::max(1.0, hb.max))) throw std::invalid_argument("sandwich: estimate is singular");
  const SymMatrix r = inv_sqrt_spd(sigma_hat);
  const EigBounds b = eig_bounds(congruence(sigma, r.matrix()));
  SandwichSpectrum s;
  s.lo = b.min;
  s.hi = b.max;
  // [1−ε, 1+ε] ∩ [1/(1+ε), 1/(1−ε)] = [1/(1+ε), 1+ε].
  s.tight_eps = std::max({s.hi - 1.0, s.lo > 0.0 ? 1.0 / s.lo - 1.0 : std::numeric_limits<double>::infinity(), 0.0});
  return s;
}

bool sandwich_check(const SymMatrix& sigma, const SymMatrix& sigma_hat, double eps_hat) {
  if (!(eps_hat >= 0.0 && eps_hat < 1.0)) throw std::invalid_argument("sandwich_check: eps_hat must lie in [0, 1)");
  const SandwichSpectrum s = sandwich_spectrum(sigma, sigma_hat);
  const bool direct = s.lo >= 1.0 - eps_hat && s.hi <= 1.0 + eps_hat;
  const bool inverse = 1.0 / s.hi >= 1.0 - eps_hat && 1.0 / s.lo <= 1.0 + eps_hat;
  return direct && inverse;
}

bool attest(CovarianceEstimate& est, const SymMatrix& sigma, double eps_hat) {
  if (!sandwich_check(sigma, est.sigma_hat, eps_hat)) return false;
  est.eps_hat = eps_hat;
  return true;
}

double combined_eps(double eps_hat, double eps_prime) {
  if (!(eps_hat >= 0.0 && eps_hat < 1.0)) throw std::invalid_argument("combined_eps: eps_hat must lie in [0, 1)");
  if (!(eps_prime >= 0.0)) throw std::invalid_argument("combined_eps: eps_prime must be nonnegative");
  return eps_prime * std::sqrt((1.0 + eps_hat) / (1.0 - eps_hat)) + std::sqrt(2.0 * eps_hat / (1.0 - eps_hat));
}

ApproxDirection approx_direction(const CovarianceEstimate& est, std::span<const double> g_tilde, double eps_prime) {
  if (!est.eps_hat) throw PreconditionError("approx_direction: covariance estimate has no sandwich attestation");
  if (!(eps_prime >= 0.0) || !std::isfinite(eps_prime))
    throw PreconditionError("approx_direction: gradient accuracy must be a finite nonnegative number");
  if (g_tilde.size() != est.sigma_hat.dim()) throw DimensionError("approx_direction: gradient has wrong size");
  return {est.sigma_hat * g_tilde, combined_eps(*est.eps_hat, eps_prime)};
}

double direction_error(std::span<const double> d, std::span<const double> g, const SymMatrix& sigma) {
  const Vector sg = sigma * g;
  const Vector e = sub(d, sg);
  const SymMatrix inv = inverse_spd(sigma);
  const double den = std::sqrt(std::max(0.0, dot(g, sg)));
  if (den == 0.0) return norm2(e) == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(std::max(0.0, inv.quad(e))) / den;
}

AutotuneResult autotune_sample_size(const BoltzmannModel& model, std::span<const double> x_start, double eps_target,
                                    std::size_t n_start, std::size_t n_max, std::uint64_t seed,
                                    HitAndRunOptions options) {
  if (n_start < 2) throw std::invalid_argument("autotune_sample_size: n_start must be at least 2");
  if (!(eps_target > 0.0 && eps_target < 1.0)) throw std::invalid_argument("autotune_sample_size: eps_target must lie in (0, 1)");
  AutotuneResult res;
  std::uint64_t round = 0;
  for (std::size_t n = n_start; n <= n_max; n *= 2, ++round) {
    const auto train = empirical_covariance(hit_and_run(model, x_start, n, splitmix64(seed ^ (2 * round)), options));
    const auto val = empirical_covariance(hit_and_run(model, x_start, n, splitmix64(seed ^ (2 * round + 1)), options));
    res.n_samples = n;
    res.validation_eps = sandwich_spectrum(val.sigma_hat, train.sigma_hat).tight_eps;
    res.sigma_hat = train.sigma_hat;
    if (is_psd(train.sigma_hat, 0.0) && eig_bounds(train.sigma_hat).min > 0.0) options.direction_cov = train.sigma_hat;
    if (res.validation_eps <= eps_target) {
      res.converged = true;
      break;
    }
  }
  return res;
}

// -------------------------------------------------------------------- IPM

double IpmConfig::barrier_parameter() const { return vartheta.value_or(static_cast<double>(box.lo.size())); }

void IpmConfig::validate() const {
  check_box(box);
  const std::size_t n = box.lo.size();
  if (theta_hat.size() != n) throw DimensionError("IpmConfig: theta_hat has wrong size");
  if (norm2(theta_hat) == 0.0) throw std::invalid_argument("IpmConfig: theta_hat must be nonzero");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("IpmConfig: delta must lie in (0, 1)");
  if (!(eps_bar > 0.0)) throw std::invalid_argument("IpmConfig: eps_bar must be positive");
  if (!(eta0 > 0.0)) throw std::invalid_argument("IpmConfig: eta0 must be positive");
  if (!(barrier_parameter() >= 1.0)) throw std::invalid_argument("IpmConfig: barrier parameter must be at least 1");
  if (combined() > 1.0 / 32.0)
    throw PreconditionError("IpmConfig: combined direction error " + std::to_string(combined()) + " exceeds 1/32");
  if (mode == OracleMode::Sampled && !(autotune_eps > 0.0 && autotune_eps < 1.0))
    throw std::invalid_argument("IpmConfig: autotune_eps must lie in (0, 1)");
  if (x0) {
    if (x0->size() != n) throw DimensionError("IpmConfig: x0 has wrong size");
    if (!box_contains(box, *x0)) throw DomainError("IpmConfig: x0 must lie strictly inside the box");
    const Vector c = central_path_point(box, theta_hat, eta0);
    const Vector var = diag_of(log_partition_box(box, scaled(theta_hat, eta0)).hess);
    const double prox = diag_inv_norm(sub(*x0, c), var);
    if (prox > 0.5 * delta)
      throw PreconditionError("IpmConfig: start is " + std::to_string(prox) + " from x(eta0), more than delta/2");
  }
}

int iteration_ceiling(double vartheta, double eta0, double eps_bar) {
  const double v = 20.0 * std::sqrt(vartheta) * std::log(vartheta / (eta0 * eps_bar));
  return std::max(0, static_cast<int>(std::ceil(v)));
}

double iterate_gap_bound(double vartheta, double delta, double eta) {
  return (vartheta + 0.5 * delta * std::sqrt(vartheta)) / eta;
}

int schedule_iterations(double vartheta, double eta0, double eps_bar, double delta) {
  const double f = 1.0 + 1.0 / (16.0 * std::sqrt(vartheta));
  double eta = eta0;
  int k = 0;
  while (iterate_gap_bound(vartheta, delta, eta) > eps_bar) {
    eta *= f;
    ++k;
  }
  return k;
}

double IpmTrace::max_proximity() const {
  double m = 0.0;
  for (const auto& it : iterations) m = std::max(m, it.proximity);
  return m;
}

IpmTrace ipm_run(const IpmConfig& config) {
  config.validate();
  const Box& box = config.box;
  const double vt = config.barrier_parameter();
  const bool sampled = config.mode == IpmConfig::OracleMode::Sampled;

  IpmTrace tr;
  tr.vartheta = vt;
  tr.eps = config.combined();
  tr.gamma = newton_step_params(config.delta, tr.eps).gamma;
  tr.ceiling = iteration_ceiling(vt, config.eta0, config.eps_bar);
  const double growth = 1.0 + 1.0 / (16.0 * std::sqrt(vt));

  double eta = config.eta0;
  Vector x = config.x0 ? *config.x0 : central_path_point(box, config.theta_hat, eta);

  // The schedule is fixed, so N is tuned once on the most concentrated law
  // the run will sample from.
  std::size_t n_samples = config.n_samples;
  if (sampled && n_samples == 0) {
    const int last = std::max(0, schedule_iterations(vt, config.eta0, config.eps_bar, config.delta) - 1);
    const double eta_last = config.eta0 * std::pow(growth, last);
    const BoltzmannModel hardest{box, scaled(config.theta_hat, eta_last)};
    const auto tune = autotune_sample_size(hardest, central_path_point(box, config.theta_hat, eta_last),
                                           config.autotune_eps, 256, config.autotune_max,
                                           splitmix64(config.seed ^ 0xA5A5A5A5ull), config.chain);
    n_samples = tune.n_samples;
  }
  // Direction law for the chains: the latest covariance estimate.
  std::optional<SymMatrix> shape;

  for (int k = 0;; ++k) {
    IpmIteration it;
    it.k = k;
    it.eta = eta;
    it.x = x;
    it.central = central_path_point(box, config.theta_hat, eta);
    const SymMatrix sigma = log_partition_box(box, scaled(config.theta_hat, eta)).hess;
    const Vector var = diag_of(sigma);
    it.proximity = diag_inv_norm(sub(x, it.central), var);
    it.gap_bound = iterate_gap_bound(vt, config.delta, eta);
    it.objective_gap = objective_gap(box, config.theta_hat, x);
    tr.iterations.push_back(it);
    IpmIteration& cur = tr.iterations.back();

    if (cur.proximity > 0.5 * config.delta) {
      tr.status = IpmTrace::Status::ProximityViolation;
      tr.message = "proximity " + std::to_string(cur.proximity) + " exceeds delta/2 at iteration " + std::to_string(k);
      break;
    }
    if (it.gap_bound <= config.eps_bar) {
      tr.status = IpmTrace::Status::Converged;
      break;
    }
    if (k >= tr.ceiling) {
      tr.status = IpmTrace::Status::IterationCap;
      tr.message = "iteration ceiling reached";
      break;
    }

    const Vector g = entropic_gradient(x, eta, config.theta_hat, box);
    Vector d;
    if (sampled) {
      const BoltzmannModel model{box, scaled(config.theta_hat, eta)};
      const std::uint64_t s = splitmix64(config.seed + 0x632BE59BD9B4E019ull * static_cast<std::uint64_t>(k + 1));
      HitAndRunOptions chain = config.chain;
      if (!chain.direction_cov && shape) chain.direction_cov = shape;
      CovarianceEstimate est = empirical_covariance(hit_and_run(model, x, n_samples, s, chain));
      if (eig_bounds(est.sigma_hat).min > 0.0) shape = est.sigma_hat;
      est.eps_hat = sandwich_spectrum(sigma, est.sigma_hat).tight_eps;
      if (*est.eps_hat < 1.0) {
        const ApproxDirection ad = approx_direction(est, g, config.eps_prime);
        d = ad.d;
        cur.certified_eps = ad.eps_effective;
      } else {
        d = est.sigma_hat * g;
        cur.certified_eps = std::numeric_limits<double>::infinity();
      }
      cur.n_samples = n_samples;
    } else {
      CovarianceEstimate est{sigma, 0, 0.0};
      const ApproxDirection ad = approx_direction(est, g, 0.0);
      d = ad.d;
      cur.certified_eps = ad.eps_effective;
    }
    cur.direction_error = direction_error(d, g, sigma);

    Vector xn = x;
    axpy(-tr.gamma, d, xn);
    const double eta_n = eta * growth;
    const Vector cn = central_path_point(box, config.theta_hat, eta_n);
    cur.step_distance = diag_inv_norm(sub(xn, cur.central), var);
    cur.target_drift = diag_inv_norm(sub(cn, cur.central), var);
    cur.cross_distance = diag_inv_norm(sub(xn, cn), var);
    if (!box_contains(box, xn)) {
      tr.status = IpmTrace::Status::InteriorExit;
      tr.message = "iterate left the box at iteration " + std::to_string(k + 1);
      break;
    }
    x = std::move(xn);
    eta = eta_n;
  }
  return tr;
}

double objective_gap(const Box& box, std::span<const double> theta_hat, std::span<const double> x) {
  double v = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    v += theta_hat[i] * x[i] - std::min(theta_hat[i] * box.lo[i], theta_hat[i] * box.hi[i]);
  return v;
}

IpmAudit audit_ipm(const IpmTrace& trace, const IpmConfig& config, double tol) {
  IpmAudit a;
  const double half = 0.5 * config.delta;
  for (std::size_t i = 0; i < trace.iterations.size(); ++i) {
    const auto& it = trace.iterations[i];
    a.max_proximity = std::max(a.max_proximity, it.proximity);
    if (it.proximity > half + tol) a.proximity_ok = false;
    if (it.target_drift) a.max_drift = std::max(a.max_drift, *it.target_drift);
    if (i + 1 < trace.iterations.size() && it.cross_distance && it.target_drift) {
      const double drift = *it.target_drift;
      const double bound = drift < 1.0 ? *it.cross_distance / (1.0 - drift) : std::numeric_limits<double>::infinity();
      if (trace.iterations[i + 1].proximity > bound + tol) a.conversion_ok = false;
    }
  }
  a.within_ceiling = trace.status == IpmTrace::Status::Converged && trace.steps() <= trace.ceiling;
  a.gap_ok = !trace.iterations.empty() && trace.final().objective_gap <= config.eps_bar;
  if (trace.status == IpmTrace::Status::ProximityViolation) a.proximity_ok = false;
  return a;
}

ProofChain proof_chain(double delta, double k, double eps) {
  if (!(k > 0.0 && k < 1.0)) throw std::invalid_argument("proof_chain: k must lie in (0, 1)");
  ProofChain p;
  p.target = 0.5 * delta;
  p.drift = k + 3.0 * k * k / std::pow(1.0 - k, 3);
  p.contraction = newton_step_params(delta, eps).rate;
  p.step = p.contraction * p.target;
  p.triangle = p.step + p.drift;
  p.conversion = p.triangle / (1.0 - p.drift);
  return p;
}

std::string to_string(IpmTrace::Status s) {
  switch (s) {
    case IpmTrace::Status::Converged: return "converged";
    case IpmTrace::Status::ProximityViolation: return "proximity_violation";
    case IpmTrace::Status::InteriorExit: return "interior_exit";
    case IpmTrace::Status::IterationCap: return "iteration_cap";
  }
  return "unknown";
}

std::string ipm_trace_to_jsonl(const IpmTrace& trace) {
  using nlohmann::json;
  auto opt = [](const auto& v) { return v ? json(*v) : json(nullptr); };
  std::ostringstream os;
  for (const auto& it : trace.iterations) {
    json j = {
        {"k", it.k},
        {"eta", it.eta},
        {"x", it.x},
        {"central", it.central},
        {"proximity", it.proximity},
        {"gap_bound", it.gap_bound},
        {"objective_gap", it.objective_gap},
        {"direction_error", opt(it.direction_error)},
        {"certified_eps", opt(it.certified_eps)},
        {"n_samples", opt(it.n_samples)},
        {"step_distance", opt(it.step_distance)},
        {"target_drift", opt(it.target_drift)},
        {"cross_distance", opt(it.cross_distance)},
    };
    os << j.dump() << '\n';
  }
  return os.str();
}

}  // namespace pepkit
