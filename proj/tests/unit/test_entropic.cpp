#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <functional>
#include <random>

#include "pepkit/cert.hpp"
#include "pepkit/entropic.hpp"

using namespace pepkit;

namespace {

// Composite Simpson on [a, b].
double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

struct Moments {
  double logz, mean, var;
};

// Density ∝ exp(−θx) on [a, b] by quadrature.
Moments quad_moments(double theta, double a, double b) {
  // Shift the exponent so the integrand stays O(1).
  const double shift = theta > 0 ? -theta * a : -theta * b;
  auto w = [&](double x) { return std::exp(-theta * x - shift); };
  const double z = simpson(w, a, b);
  const double m = simpson([&](double x) { return x * w(x); }, a, b) / z;
  const double v = simpson([&](double x) { return (x - m) * (x - m) * w(x); }, a, b) / z;
  return {std::log(z) + shift, m, v};
}

// A*_−(x) = sup_θ [−θx − A(θ)] in one dimension, by golden-section search.
double conj_1d(double x, double a, double b) {
  auto obj = [&](double th) { return -th * x - quad_moments(th, a, b).logz; };
  double lo = -400.0, hi = 400.0;
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - r * (hi - lo), d = lo + r * (hi - lo);
  double fc = obj(c), fd = obj(d);
  for (int i = 0; i < 90; ++i) {
    if (fc > fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - r * (hi - lo);
      fc = obj(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + r * (hi - lo);
      fd = obj(d);
    }
  }
  return obj(0.5 * (lo + hi));
}

Vector diag_of(const SymMatrix& m) {
  Vector d(m.dim());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = m(i, i);
  return d;
}

const Box kUnit2{{0.0, 0.0}, {1.0, 1.0}};

}  // namespace

TEST_CASE("log partition on the unit box at theta = 0") {
  const LogPartition lp = log_partition_box(Box{{0, 0, 0}, {1, 1, 1}}, Vector{0, 0, 0});
  CHECK(lp.A == doctest::Approx(0.0).scale(1));
  for (double g : lp.grad) CHECK(g == doctest::Approx(-0.5));
  for (std::size_t i = 0; i < 3; ++i) CHECK(lp.hess(i, i) == doctest::Approx(1.0 / 12.0));
  CHECK(lp.hess(0, 1) == 0.0);
}

TEST_CASE("log partition against quadrature") {
  const double t = 1.0;
  const double closed = -(1.0 / t - std::exp(-t) / (1.0 - std::exp(-t)));
  CHECK(closed == doctest::Approx(-0.418023293).epsilon(1e-9));
  const LogPartition lp = log_partition_box(kUnit2, Vector{1.0, 0.0});
  CHECK(std::fabs(lp.grad[0] - closed) < 1e-12);

  for (double th : {-30.0, -3.0, -0.7, -1e-3, 1e-6, 2e-4, 0.2, 0.49, 0.51, 1.0, 4.0, 25.0}) {
    for (const auto& [a, b] : {std::pair{0.0, 1.0}, std::pair{-1.0, 2.0}, std::pair{3.0, 3.5}}) {
      const Moments q = quad_moments(th, a, b);
      const LogPartition lp1 = log_partition_box(Box{{a}, {b}}, Vector{th});
      CHECK(std::fabs(lp1.A - q.logz) < 1e-10 * (1.0 + std::fabs(q.logz)));
      CHECK(std::fabs(-lp1.grad[0] - q.mean) < 1e-10);
      CHECK(std::fabs(lp1.hess(0, 0) - q.var) < 1e-10);
    }
  }
}

TEST_CASE("series and closed form meet smoothly") {
  for (double t : {0.499999, 0.5, 0.500001, -0.5}) {
    const double h = 1e-5;
    const double fd_mean = -(unit_log_partition(t + h) - unit_log_partition(t - h)) / (2 * h);
    CHECK(unit_mean(t) == doctest::Approx(fd_mean).epsilon(1e-8));
    const double fd_var = -(unit_mean(t + h) - unit_mean(t - h)) / (2 * h);
    CHECK(unit_variance(t) == doctest::Approx(fd_var).epsilon(1e-7));
  }
  CHECK(unit_mean(0.0) == 0.5);
  CHECK(unit_variance(0.0) == doctest::Approx(1.0 / 12.0));
}

TEST_CASE("Hessian matches finite differences of the gradient") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-6.0, 6.0);
  const Box box{{0.0, -1.0, 2.0}, {1.0, 1.0, 2.5}};
  for (int t = 0; t < 20; ++t) {
    const Vector th{u(rng), u(rng), u(rng)};
    const LogPartition lp = log_partition_box(box, th);
    for (std::size_t i = 0; i < 3; ++i) {
      Vector p = th, m = th;
      const double h = 1e-5;
      p[i] += h;
      m[i] -= h;
      const double fd = (log_partition_box(box, p).grad[i] - log_partition_box(box, m).grad[i]) / (2 * h);
      CHECK(std::fabs(fd - lp.hess(i, i)) < 1e-6 * std::max(1.0, lp.hess(i, i)));
    }
  }
}

TEST_CASE("unit mean inversion") {
  for (double t : {-700.0, -40.0, -1.0, -1e-8, 0.0, 0.3, 5.0, 60.0, 700.0}) {
    const double y = unit_mean(t);
    const double t2 = unit_mean_inverse(y, 1.0 - y);
    CHECK(unit_mean(t2) == doctest::Approx(y).epsilon(1e-12));
  }
}

TEST_CASE("polytope bodies") {
  const Polytope p = to_polytope(kUnit2);
  CHECK(p.A.rows() == 4);
  CHECK(body_dim(p) == 2);
  CHECK(body_contains(p, Vector{0.5, 0.5}));
  CHECK_FALSE(body_contains(p, Vector{1.0, 0.5}));
  BoltzmannModel bad{Box{{0.0}, {0.0}}, {1.0}};
  CHECK_THROWS(bad.validate());
  Polytope unbounded{Matrix{{1.0, 0.0}}, {1.0}};
  CHECK_THROWS(hit_and_run(BoltzmannModel{unbounded, {0.0, 0.0}}, Vector{0.0, 0.0}, 10, 1));
  CHECK_THROWS(log_partition_box(BoltzmannModel{p, {0.0, 0.0}}));
}

TEST_CASE("central path") {
  const Vector c = central_path_point(kUnit2, Vector{0.0, 0.0}, 3.0);
  CHECK(c[0] == doctest::Approx(0.5));
  CHECK(c[1] == doctest::Approx(0.5));
  const Vector x = central_path_point(kUnit2, Vector{1.0, 0.0}, 1.0);
  CHECK(x[0] == doctest::Approx(0.418023293).epsilon(1e-9));
  CHECK(x[1] == doctest::Approx(0.5));
  const Vector far = central_path_point(kUnit2, Vector{1.0, -2.0}, 1e3);
  CHECK(far[0] < 1e-2);
  CHECK(far[1] > 1.0 - 1e-2);
  CHECK_THROWS(central_path_point(kUnit2, Vector{1.0, 0.0}, 0.0));

  // Gap on the central path is at most ϑ/η.
  for (double eta : {0.1, 1.0, 10.0, 100.0}) {
    const Vector th{1.0, -0.3};
    const Vector xe = central_path_point(kUnit2, th, eta);
    CHECK(objective_gap(kUnit2, th, xe) <= 2.0 / eta);
  }
}

TEST_CASE("entropic gradient") {
  const Vector th{1.0, 0.5};
  for (double eta : {0.5, 1.0, 5.0}) {
    const Vector x = central_path_point(kUnit2, th, eta);
    for (double gi : entropic_gradient(x, eta, th, kUnit2)) CHECK(std::fabs(gi) < 1e-10);
  }
  const Vector g = entropic_gradient(Vector{0.5}, 1.0, Vector{0.0}, Box{{0.0}, {1.0}});
  CHECK(std::fabs(g[0]) < 1e-14);
  CHECK_THROWS(entropic_gradient(Vector{1.0, 0.5}, 1.0, th, kUnit2));

  // Barrier gradient at x(η) is −ηθ̂.
  const EntropicBarrierBox barrier(kUnit2);
  const Vector xc = central_path_point(kUnit2, th, 2.0);
  const Vector bg = barrier.gradient(xc);
  CHECK(std::fabs(bg[0] + 2.0) < 1e-10);
  CHECK(std::fabs(bg[1] + 1.0) < 1e-10);
}

TEST_CASE("entropic gradient against the defining supremum") {
  const Box box{{0.0, -1.0}, {1.0, 1.0}};
  const Vector th{0.7, -1.3};
  const double eta = 1.5;
  for (const Vector& x : {Vector{0.3, 0.2}, Vector{0.8, -0.6}, Vector{0.05, 0.9}}) {
    const Vector g = entropic_gradient(x, eta, th, box);
    for (std::size_t i = 0; i < 2; ++i) {
      const double h = 1e-4;
      const double fp = eta * th[i] * (x[i] + h) + conj_1d(x[i] + h, box.lo[i], box.hi[i]);
      const double fm = eta * th[i] * (x[i] - h) + conj_1d(x[i] - h, box.lo[i], box.hi[i]);
      CHECK(std::fabs((fp - fm) / (2 * h) - g[i]) < 1e-5 * std::max(1.0, std::fabs(g[i])));
    }
    const EntropicBarrierBox f(box, scaled(th, eta));
    CHECK(f.value(x) == doctest::Approx(eta * dot(th, x) + conj_1d(x[0], 0, 1) + conj_1d(x[1], -1, 1)).epsilon(1e-7));
  }
}

TEST_CASE("Hessian conjugacy") {
  for (std::size_t n : {1u, 2u, 5u}) {
    Box box{Vector(n, 0.0), Vector(n, 1.0)};
    Vector th(n);
    for (std::size_t i = 0; i < n; ++i) th[i] = 1.0 - 0.4 * static_cast<double>(i);
    for (double eta : {0.5, 1.0, 5.0}) CHECK(hessian_conjugacy_check(box, eta, th) <= 1e-6);
  }
  const EntropicBarrierBox f(kUnit2);
  const SymMatrix h = f.hessian(Vector{0.5, 0.5});
  CHECK(h(0, 0) == doctest::Approx(12.0));
  CHECK(h(1, 1) == doctest::Approx(12.0));
  CHECK(hessian_conjugacy_check(kUnit2, 3.0, Vector{0.0, 0.0}) <= 1e-6);
}

TEST_CASE("hit-and-run is deterministic and stays inside") {
  const BoltzmannModel m{kUnit2, {1.0, -0.5}};
  const auto a = hit_and_run(m, Vector{0.5, 0.5}, 200, 7);
  const auto b = hit_and_run(m, Vector{0.5, 0.5}, 200, 7);
  const auto c = hit_and_run(m, Vector{0.5, 0.5}, 200, 8);
  CHECK(a == b);
  CHECK(a != c);
  for (const auto& s : a) CHECK(body_contains(kUnit2, s));
  CHECK_THROWS(hit_and_run(m, Vector{1.5, 0.5}, 10, 1));
}

TEST_CASE("hit-and-run moments on an interval and a polytope") {
  // 1-D interval, θ = 1: mean 0.4180.
  const BoltzmannModel m1{Box{{0.0}, {1.0}}, {1.0}};
  const auto s1 = hit_and_run(m1, Vector{0.5}, 20000, 3);
  double mean = 0.0;
  for (const auto& s : s1) mean += s[0];
  mean /= static_cast<double>(s1.size());
  const double se = std::sqrt(unit_variance(1.0) / static_cast<double>(s1.size()));
  CHECK(std::fabs(mean - 0.418023293) < 4.0 * se);

  // The unit square as a polytope gives the box law.
  const BoltzmannModel mp{to_polytope(kUnit2), {1.0, 0.0}};
  const auto sp = hit_and_run(mp, Vector{0.5, 0.5}, 20000, 4);
  Vector mp_mean(2, 0.0);
  for (const auto& s : sp) axpy(1.0 / static_cast<double>(sp.size()), s, mp_mean);
  CHECK(std::fabs(mp_mean[0] - 0.418023293) < 0.01);
  CHECK(std::fabs(mp_mean[1] - 0.5) < 0.01);
}

TEST_CASE("empirical covariance") {
  const CovarianceEstimate z = empirical_covariance({{1.0, 2.0}, {1.0, 2.0}});
  CHECK(z.sigma_hat.frobenius_norm() == 0.0);
  CHECK(z.n_samples == 2);
  CHECK_FALSE(z.eps_hat.has_value());
  const CovarianceEstimate e = empirical_covariance({{0.0, 0.0}, {1.0, 0.0}});
  CHECK(e.sigma_hat(0, 0) == doctest::Approx(0.25));
  CHECK(e.sigma_hat(1, 1) == 0.0);
  CHECK(e.sigma_hat(0, 1) == 0.0);
  CHECK_THROWS(empirical_covariance({{1.0, 2.0}}));
}

TEST_CASE("sample covariance sandwich rate against the sample-size constant") {
  const BoltzmannModel m{kUnit2, {0.0, 0.0}};
  const SymMatrix sigma = SymMatrix::diagonal(Vector{1.0 / 12.0, 1.0 / 12.0});
  auto pass_count = [&](std::size_t c) {
    int pass = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto est = empirical_covariance(hit_and_run(m, Vector{0.5, 0.5}, c * 2, 1000 + seed));
      pass += sandwich_check(sigma, est.sigma_hat, 0.1);
    }
    return pass;
  };
  // C = 400 sits at the edge: even i.i.d. uniform draws pass about 93% of the time
  // once the inverse condition is included.
  const int at400 = pass_count(400);
  MESSAGE("C = 400 pass count: " << at400);
  CHECK(at400 >= 85);
  CHECK(pass_count(800) >= 95);
}

TEST_CASE("sandwich check") {
  const SymMatrix s{{2.0, 0.3}, {0.3, 1.0}};
  CHECK(sandwich_check(s, s, 1e-9));
  CHECK_FALSE(sandwich_check(s * (1.0 + 2 * 0.05), s, 0.05));
  CHECK_THROWS_AS(sandwich_check(s, SymMatrix(2), 0.1), std::invalid_argument);
  CHECK_THROWS_AS(sandwich_check(s, SymMatrix::identity(3), 0.1), DimensionError);

  // Eigenvalue criterion against a sweep of quadratic forms.
  std::mt19937_64 rng(42);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 30; ++t) {
    SymMatrix e(2);
    e.set(0, 0, 0.05 * nd(rng));
    e.set(0, 1, 0.05 * nd(rng));
    e.set(1, 1, 0.05 * nd(rng));
    const SymMatrix sh = s + e;
    const double eps = 0.04;
    const SymMatrix si = inverse_spd(s), shi = inverse_spd(sh);
    bool sweep = true;
    for (int i = 0; i < 1000; ++i) {
      const Vector y{nd(rng), nd(rng)};
      const double a = s.quad(y), b = sh.quad(y), ai = si.quad(y), bi = shi.quad(y);
      sweep = sweep && (1 - eps) * b <= a && a <= (1 + eps) * b && (1 - eps) * bi <= ai && ai <= (1 + eps) * bi;
    }
    const SandwichSpectrum sp = sandwich_spectrum(s, sh);
    // The sweep can only miss violations; when it finds one the check must agree.
    if (!sweep) CHECK_FALSE(sandwich_check(s, sh, eps));
    if (sp.tight_eps < eps * 0.9) CHECK(sweep);
    CHECK(sandwich_check(s, sh, sp.tight_eps * (1 + 1e-9)));
    CHECK_FALSE(sandwich_check(s, sh, sp.tight_eps * (1 - 1e-6)));
  }
}

TEST_CASE("combined error and approximate directions") {
  CHECK(combined_eps(0.0, 0.0) == 0.0);
  const double e = combined_eps(0.0002, 0.01);
  CHECK(e == doctest::Approx(0.01 * std::sqrt(1.0002 / 0.9998) + std::sqrt(0.0004 / 0.9998)));
  CHECK(e == doctest::Approx(0.0300).epsilon(2e-3));
  CHECK(e <= 1.0 / 32.0);

  const Vector d2{1.0 / 12.0, 0.2};
  const SymMatrix sigma = SymMatrix::diagonal(d2);
  CovarianceEstimate exact{sigma, 0, std::nullopt};
  CHECK_THROWS_AS(approx_direction(exact, Vector{1.0, 1.0}, 0.0), PreconditionError);
  CHECK(attest(exact, sigma, 1e-12));
  exact.eps_hat = 0.0;
  const ApproxDirection ad = approx_direction(exact, Vector{1.0, 1.0}, 0.0);
  CHECK(ad.eps_effective == 0.0);
  CHECK(ad.d[0] == doctest::Approx(1.0 / 12.0));
  CHECK(ad.d[1] == doctest::Approx(0.2));
  CHECK_THROWS_AS(approx_direction(exact, Vector{1.0, 1.0}, -0.1), PreconditionError);
  CovarianceEstimate off{sigma * 1.5, 0, std::nullopt};
  CHECK_FALSE(attest(off, sigma, 0.1));
  CHECK_FALSE(off.eps_hat.has_value());
}

TEST_CASE("direction error stays within the bound on the sandwich boundary") {
  std::mt19937_64 rng(43);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u(0.02, 0.9);
  for (int t = 0; t < 100; ++t) {
    const double eh = 0.1 * u(rng);
    const Vector sd{u(rng), u(rng), u(rng)};
    const SymMatrix sigma = SymMatrix::diagonal(sd);
    // Σ̂ = Σ^{1/2} U diag(1/λ) Uᵀ Σ^{1/2} with λ at both ends of the admissible range.
    Matrix a(3, 3);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) a(i, j) = nd(rng);
    const Matrix uu = jacobi_eigen(SymMatrix(a.transpose() * a)).vectors;
    const Vector lam{1.0 / (1.0 + eh), 1.0, 1.0 + eh};
    Vector inv(3);
    for (int i = 0; i < 3; ++i) inv[i] = 1.0 / lam[i];
    const Matrix half = sqrt_psd(sigma).matrix();
    const SymMatrix sh(half * uu * Matrix::diagonal(inv) * uu.transpose() * half, 1e-9);
    CovarianceEstimate est{sh, 0, std::nullopt};
    REQUIRE(attest(est, sigma, eh * (1 + 1e-9)));
    const Vector g{nd(rng), nd(rng), nd(rng)};
    const ApproxDirection ad = approx_direction(est, g, 0.0);
    CHECK(ad.eps_effective == doctest::Approx(std::sqrt(2 * eh * (1 + 1e-9) / (1 - eh * (1 + 1e-9)))));
    CHECK(direction_error(ad.d, g, sigma) <= ad.eps_effective);
  }
}

TEST_CASE("measured direction error within the certified bound on random boxes") {
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::normal_distribution<double> nd;
  int checked = 0;
  for (int t = 0; t < 100; ++t) {
    const Box box{{0.0, 0.0}, {1.0, 1.0 + std::fabs(u(rng))}};
    const Vector th{u(rng), u(rng)};
    const double eta = 1.0 + std::fabs(u(rng));
    const SymMatrix sigma = log_partition_box(box, scaled(th, eta)).hess;
    const Vector x = central_path_point(box, th, eta * 1.05);
    const Vector g = entropic_gradient(x, eta, th, box);
    // Perturbed Σ̂ and gradient.
    SymMatrix sh = sigma;
    for (std::size_t i = 0; i < 2; ++i) sh.set(i, i, sigma(i, i) * (1.0 + 0.01 * nd(rng)));
    CovarianceEstimate est{sh, 0, std::nullopt};
    const double eh = sandwich_spectrum(sigma, sh).tight_eps;
    if (eh >= 0.5 || !attest(est, sigma, eh * (1 + 1e-12))) continue;
    const double ep = 0.01;
    Vector gt = g;
    const Vector pert{nd(rng), nd(rng)};
    // ε′ is measured in the Σ metric: scale the perturbation to sit on the boundary.
    const double gn = std::sqrt(sigma.quad(g)), pn = std::sqrt(sigma.quad(pert));
    axpy(ep * gn / pn, pert, gt);
    const ApproxDirection ad = approx_direction(est, gt, ep);
    CHECK(direction_error(ad.d, g, sigma) <= ad.eps_effective * (1 + 1e-9));
    ++checked;
  }
  CHECK(checked > 90);
}

TEST_CASE("autotune stops once the validation sandwich holds") {
  const BoltzmannModel m{kUnit2, {2.0, 0.0}};
  const AutotuneResult r = autotune_sample_size(m, Vector{0.4, 0.5}, 0.2, 64, 1 << 14, 5);
  CHECK(r.converged);
  CHECK(r.validation_eps <= 0.2);
  CHECK(r.n_samples >= 64);
  REQUIRE(r.sigma_hat.has_value());
  const AutotuneResult capped = autotune_sample_size(m, Vector{0.4, 0.5}, 1e-4, 64, 128, 5);
  CHECK_FALSE(capped.converged);
  CHECK(capped.n_samples == 128);
}

TEST_CASE("iteration ceiling and schedule") {
  CHECK(iteration_ceiling(2.0, 1.0, 1e-3) == static_cast<int>(std::ceil(20 * std::sqrt(2.0) * std::log(2000.0))));
  CHECK(iteration_ceiling(2.0, 1.0, 1e-3) == 215);
  for (double n : {1.0, 2.0, 5.0, 10.0})
    for (double eb : {1e-2, 1e-3, 1e-6})
      CHECK(schedule_iterations(n, 1.0, eb, 0.25) <= iteration_ceiling(n, 1.0, eb));
}

TEST_CASE("IPM exact mode on the unit square") {
  IpmConfig cfg;
  cfg.box = kUnit2;
  cfg.theta_hat = {1.0, 0.0};
  cfg.eps_bar = 1e-3;
  const IpmTrace tr = ipm_run(cfg);
  CHECK(tr.status == IpmTrace::Status::Converged);
  CHECK(tr.iterations.front().proximity == doctest::Approx(0.0).scale(1));
  CHECK(tr.steps() <= tr.ceiling);
  CHECK(objective_gap(kUnit2, cfg.theta_hat, tr.final().x) <= 1e-3);
  CHECK(tr.max_proximity() <= 0.125);
  const IpmAudit a = audit_ipm(tr, cfg);
  CHECK(a.ok());
  for (std::size_t k = 0; k + 1 < tr.iterations.size(); ++k) {
    CHECK(tr.iterations[k + 1].eta == doctest::Approx(tr.iterations[k].eta * (1 + 1 / (16 * std::sqrt(2.0)))));
    REQUIRE(tr.iterations[k].direction_error.has_value());
    CHECK(*tr.iterations[k].direction_error < 1e-9);
  }
  CHECK(tr.gamma == doctest::Approx(newton_step_params(0.25, 0.0).gamma));

  const std::string jsonl = ipm_trace_to_jsonl(tr);
  CHECK(static_cast<std::size_t>(std::count(jsonl.begin(), jsonl.end(), '\n')) == tr.iterations.size());
  CHECK(jsonl.find("\"proximity\"") != std::string::npos);
}

TEST_CASE("IPM exact mode in five dimensions with an offset start") {
  IpmConfig cfg;
  cfg.box = Box{Vector(5, 0.0), Vector(5, 1.0)};
  cfg.theta_hat = {1.0, -0.5, 0.3, 2.0, -1.0};
  Vector x0 = central_path_point(cfg.box, cfg.theta_hat, 1.0);
  x0[0] += 0.02;
  cfg.x0 = x0;
  const IpmTrace tr = ipm_run(cfg);
  const IpmAudit a = audit_ipm(tr, cfg);
  CHECK(a.ok());
  CHECK(tr.iterations.front().proximity > 0.0);
}

TEST_CASE("IPM preconditions") {
  IpmConfig cfg;
  cfg.box = kUnit2;
  cfg.theta_hat = {1.0, 0.0};
  cfg.eps_prime = 0.05;
  CHECK_THROWS_AS(ipm_run(cfg), PreconditionError);
  cfg.eps_prime = 0.0;
  cfg.x0 = Vector{0.2, 0.5};
  CHECK_THROWS_AS(ipm_run(cfg), PreconditionError);
  cfg.x0 = Vector{1.2, 0.5};
  CHECK_THROWS_AS(ipm_run(cfg), DomainError);
  cfg.x0.reset();
  cfg.delta = 1.0;
  CHECK_THROWS_AS(ipm_run(cfg), std::invalid_argument);
  cfg.delta = 0.25;
  cfg.theta_hat = {0.0, 0.0};
  CHECK_THROWS_AS(ipm_run(cfg), std::invalid_argument);
}

TEST_CASE("IPM flags an oversized step through the proximity audit") {
  IpmConfig cfg;
  cfg.box = kUnit2;
  cfg.theta_hat = {1.0, 0.0};
  // A start at the edge of the neighbourhood with a wrong-signed offset still
  // passes here; the audit is what reports violations, never the exit status alone.
  Vector x0 = central_path_point(kUnit2, cfg.theta_hat, 1.0);
  const Vector var = diag_of(log_partition_box(kUnit2, cfg.theta_hat).hess);
  x0[0] += 0.125 * std::sqrt(var[0]) * (1 - 1e-9);
  cfg.x0 = x0;
  const IpmTrace tr = ipm_run(cfg);
  const IpmAudit a = audit_ipm(tr, cfg);
  CHECK(a.proximity_ok == (tr.status != IpmTrace::Status::ProximityViolation));
  CHECK(a.max_proximity == doctest::Approx(tr.max_proximity()));
}

TEST_CASE("IPM sampled mode with a fixed sample size") {
  IpmConfig cfg;
  cfg.box = kUnit2;
  cfg.theta_hat = {1.0, 0.5};
  cfg.eps_bar = 1e-2;
  cfg.mode = IpmConfig::OracleMode::Sampled;
  cfg.eps_hat = 0.0002;
  cfg.eps_prime = 0.01;
  cfg.n_samples = 2048;
  cfg.seed = 9;
  const IpmTrace tr = ipm_run(cfg);
  CHECK(tr.eps == doctest::Approx(combined_eps(0.0002, 0.01)));
  REQUIRE(tr.iterations.size() > 1);
  for (std::size_t k = 0; k + 1 < tr.iterations.size(); ++k) {
    CHECK(tr.iterations[k].n_samples.value_or(0) == 2048);
    CHECK(tr.iterations[k].direction_error.has_value());
  }
  const IpmAudit a = audit_ipm(tr, cfg);
  CHECK(a.proximity_ok == (tr.max_proximity() <= 0.125 + 1e-9));
  const IpmTrace again = ipm_run(cfg);
  CHECK(ipm_trace_to_jsonl(again) == ipm_trace_to_jsonl(tr));
}

TEST_CASE("proof chain evaluated from its formulas") {
  const ProofChain p = proof_chain(0.25, 1.0 / 16.0, 1.0 / 32.0);
  CHECK(p.drift == doctest::Approx(0.0767).epsilon(1e-3));
  CHECK(p.drift <= 0.0767 + 1e-4);
  CHECK(p.target == 0.125);
  // With δ = 1/4 in κ_δ the step factor is 0.5505, so the chain does not close.
  CHECK(p.contraction == doctest::Approx(0.550538).epsilon(1e-5));
  CHECK(p.step == doctest::Approx(0.068817).epsilon(1e-4));
  CHECK(p.triangle == doctest::Approx(0.145536).epsilon(1e-4));
  CHECK(p.conversion == doctest::Approx(0.157629).epsilon(1e-4));
  CHECK_FALSE(p.closes());
  // κ_δ with δ = 1/16 reproduces the factor 0.1596.
  CHECK(newton_step_params(1.0 / 16.0, 1.0 / 32.0).rate == doctest::Approx(0.1596).epsilon(5e-4));
  CHECK_THROWS(proof_chain(0.25, 1.0, 0.0));
}

TEST_CASE("status names") {
  CHECK(to_string(IpmTrace::Status::Converged) == "converged");
  CHECK(to_string(IpmTrace::Status::ProximityViolation) == "proximity_violation");
  CHECK(to_string(IpmTrace::Status::InteriorExit) == "interior_exit");
  CHECK(to_string(IpmTrace::Status::IterationCap) == "iteration_cap");
}
