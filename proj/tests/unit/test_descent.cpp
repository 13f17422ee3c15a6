#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "pepkit/descent.hpp"

using namespace pepkit;

namespace {

QuadraticFunction diag_quadratic(const Vector& d) { return QuadraticFunction(SymMatrix::diagonal(d)); }

double max_opt(const DescentTrace& tr, std::optional<double> DescentStep::*field) {
  double m = 0.0;
  for (const auto& s : tr.steps)
    if (s.*field) m = std::max(m, *(s.*field));
  return m;
}

SymMatrix random_spd(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::normal_distribution<double> nd;
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = nd(rng);
  const Matrix q = jacobi_eigen(SymMatrix(a.transpose() * a)).vectors;
  Vector ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return SymMatrix(q * Matrix::diagonal(ev) * q.transpose(), 1e-9);
}

}  // namespace

TEST_CASE("direction with eps = 0 is the gradient") {
  const Vector g{1.0, -2.0, 0.5};
  const MetricOperator e = MetricOperator::euclidean(3);
  std::mt19937_64 rng(1);
  CHECK(direction(g, 0.0, DirectionMode::Exact, e) == g);
  CHECK(direction(g, 0.0, DirectionMode::RandomCone, e, &rng) == g);
}

TEST_CASE("random cone directions stay in the cone") {
  const MetricOperator b(SymMatrix{{2.0, 0.5}, {0.5, 1.0}});
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  double worst = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const Vector g{nd(rng), nd(rng)};
    const Vector d = direction(g, 0.5, DirectionMode::RandomCone, b, &rng);
    worst = std::max(worst, b.norm(sub(d, g)) / b.norm(g));
  }
  CHECK(worst <= 0.5 + 1e-12);
  CHECK(worst > 0.45);
  CHECK_THROWS(direction(Vector{1.0, 0.0}, 1.0, DirectionMode::Exact, b));
}

TEST_CASE("exact line search") {
  const QuadraticFunction id = diag_quadratic({1.0, 1.0});
  const Vector x{0.3, -2.0};
  CHECK(exact_line_search(id, x, id.gradient(x)) == doctest::Approx(1.0));

  const QuadraticFunction q = diag_quadratic({1.0, 4.0});
  CHECK(exact_line_search(q, Vector{1.0, 1.0}, Vector{1.0, 4.0}) == doctest::Approx(17.0 / 65.0).epsilon(1e-14));
  CHECK_THROWS_AS(exact_line_search(q, Vector{1.0, 1.0}, Vector{-1.0, -4.0}), std::invalid_argument);

  // Orthogonality on random quadratics and log barriers.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.2, 0.8);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 50; ++t) {
    const QuadraticFunction rq(random_spd(rng, 4, 0.1, 3.0), Vector{nd(rng), nd(rng), nd(rng), nd(rng)});
    const Vector x0{nd(rng), nd(rng), nd(rng), nd(rng)};
    const Vector g0 = rq.gradient(x0);
    const Vector d = direction(g0, 0.3, DirectionMode::RandomCone, MetricOperator::euclidean(4), &rng);
    const double gam = exact_line_search(rq, x0, d);
    Vector x1 = x0;
    axpy(-gam, d, x1);
    const Vector g1 = rq.gradient(x1);
    CHECK(std::fabs(dot(g1, d)) <= 1e-9 * norm2(g1) * norm2(d) + 1e-300);

    const LogBarrierBox lb(Vector{0.0, 0.0}, Vector{1.0, 1.0}, Vector{nd(rng), nd(rng)});
    const Vector y0{u(rng), u(rng)};
    const Vector gy = lb.gradient(y0);
    const double gl = exact_line_search(lb, y0, gy);
    Vector y1 = y0;
    axpy(-gl, gy, y1);
    const Vector gy1 = lb.gradient(y1);
    CHECK(std::fabs(dot(gy1, gy)) <= 1e-9 * norm2(gy1) * norm2(gy) + 1e-14);
  }
}

TEST_CASE("steepest descent with exact line search meets the classical rate") {
  const double mu = 0.25, L = 1.0;
  const QuadraticFunction q = diag_quadratic({mu, L});
  DescentConfig cfg;
  cfg.max_iter = 20;
  // Equal gradient components give the worst one-step ratio.
  const DescentTrace worst = run(q, Vector{1.0 / mu, 1.0 / L}, cfg);
  REQUIRE(worst.steps.size() > 3);
  for (const auto& s : worst.steps)
    if (s.f_ratio) CHECK(*s.f_ratio == doctest::Approx(0.36).epsilon(1e-6));

  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 30; ++t) {
    const DescentTrace tr = run(q, Vector{nd(rng), nd(rng)}, cfg);
    CHECK(max_opt(tr, &DescentStep::f_ratio) <= 0.36 + 1e-9);
    for (std::size_t k = 0; k + 1 < tr.steps.size(); ++k) CHECK(tr.steps[k].orthogonality <= 1e-9);
  }
}

TEST_CASE("fixed step at gamma_max contracts the gradient") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  for (double kappa : {0.1, 0.25, 0.5}) {
    const double gmax = fixed_gamma_max(kappa, 1.0, 0.0);
    const Rates r = rate_fixed({kappa, 0.0, gmax, std::nullopt, 1.0});
    CHECK(r.g_rate == doctest::Approx((1 - kappa) / (1 + kappa)));
    DescentConfig cfg;
    cfg.step = StepRule::fixed(gmax);
    cfg.max_iter = 15;
    for (int t = 0; t < 10; ++t) {
      const QuadraticFunction q(random_spd(rng, 3, kappa, 1.0));
      const DescentTrace tr = run(q, Vector{nd(rng), nd(rng), nd(rng)}, cfg);
      CHECK(max_opt(tr, &DescentStep::g_ratio) <= r.g_rate + 1e-9);
      const RateAudit a = audit(tr, r);
      CHECK(a.sound);
      CHECK(a.audited > 0);
    }
  }
}

TEST_CASE("inexact runs stay under the certified rates") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd;
  for (double kappa : {0.1, 0.5}) {
    for (double eps : {0.05, 0.2}) {
      const QuadraticFunction q(random_spd(rng, 3, kappa, 1.0));
      const Vector x0{nd(rng), nd(rng), nd(rng)};
      DescentConfig cfg;
      cfg.eps = eps;
      cfg.max_iter = 20;
      for (DirectionMode m : {DirectionMode::RandomCone, DirectionMode::AdversarialWorst}) {
        cfg.mode = m;
        cfg.seed = 17;
        const DescentTrace els = run(q, x0, cfg);
        Rates r = rate_els({kappa, eps, std::nullopt, std::nullopt, 1.0});
        r.f_rate = els_function_value_rate(kappa, eps);
        CHECK(audit(els, r).sound);

        if (eps <= fixed_eps_max(kappa)) {
          DescentConfig fc = cfg;
          const double g = fixed_gamma_max(kappa, 1.0, eps);
          fc.step = StepRule::fixed(g);
          const DescentTrace fx = run(q, x0, fc);
          CHECK(audit(fx, rate_fixed({kappa, eps, g, std::nullopt, 1.0})).sound);
        }
      }
    }
  }
}

TEST_CASE("adversarial directions reach the rates on two-dimensional quadratics") {
  for (double kappa : {0.1, 0.25, 0.5}) {
    for (double eps : {0.0, 0.05, 0.2}) {
      DescentConfig cfg;
      cfg.eps = eps;
      cfg.mode = DirectionMode::AdversarialWorst;
      const SharpnessResult els = adversarial_sharpness(kappa, 1.0, cfg, Variant::GradientNorm, 64);
      CHECK(els.fraction >= 0.95);
      CHECK(els.fraction <= 1.0 + 1e-9);
      if (eps < fixed_eps_max(kappa)) {
        DescentConfig fc = cfg;
        fc.step = StepRule::fixed(fixed_gamma_max(kappa, 1.0, eps));
        const SharpnessResult fx = adversarial_sharpness(kappa, 1.0, fc, Variant::GradientNorm, 64);
        CHECK(fx.fraction >= 0.99);
        CHECK(fx.fraction <= 1.0 + 1e-9);
      }
    }
  }
}

TEST_CASE("distance sharpness on quadratics stays below the ELS distance rate") {
  // Quadratics do not attain the ELS distance rate; record the bound only.
  DescentConfig cfg;
  cfg.eps = 0.1;
  cfg.mode = DirectionMode::AdversarialWorst;
  const SharpnessResult r = adversarial_sharpness(0.25, 1.0, cfg, Variant::Distance, 64);
  CHECK(r.fraction <= 1.0 + 1e-9);
  CHECK(r.fraction > 0.5);
}

TEST_CASE("Newton-type steps on the box log barrier") {
  const double delta = 0.25;
  const LogBarrierBox f(Vector{0.0, 0.0}, Vector{1.0, 1.0}, Vector{0.8, -1.5});
  const Vector xs = *f.minimizer();
  for (double eps : {0.0, 1.0 / 32.0}) {
    const NewtonStepParams p = newton_step_params(delta, eps);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    for (int t = 0; t < 20; ++t) {
      // x0 with ‖x0 − x*‖_{x0} ≤ δ/2.
      const Vector u{nd(rng), nd(rng)};
      Vector x0 = xs;
      for (double r = 0.5 * delta; r > 1e-6; r *= 0.9) {
        x0 = xs;
        axpy(r / norm2(u), u, x0);
        if (intrinsic_norm(f, x0, sub(x0, xs), MetricOperator::euclidean(2)) <= 0.5 * delta) break;
      }
      REQUIRE(intrinsic_norm(f, x0, sub(x0, xs), MetricOperator::euclidean(2)) <= 0.5 * delta);
      DescentConfig cfg;
      cfg.step = StepRule::fixed(p.gamma);
      cfg.metric = MetricChoice::intrinsic_at(x0);
      cfg.eps = eps;
      cfg.mode = eps > 0 ? DirectionMode::RandomCone : DirectionMode::Exact;
      cfg.seed = static_cast<std::uint64_t>(t);
      cfg.max_iter = 1;
      const DescentTrace tr = run(f, x0, cfg);
      REQUIRE(tr.steps.size() == 2);
      REQUIRE(tr.steps[0].x_ratio.has_value());
      CHECK(*tr.steps[0].x_ratio <= p.rate + 1e-9);
    }
  }
}

TEST_CASE("metric change equals a whitened Euclidean run") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  const LogBarrierBox f(Vector{0.0, -1.0}, Vector{2.0, 1.0}, Vector{0.4, 0.3});
  const Vector xbar{0.9, 0.1};
  const SymMatrix h = f.hessian(xbar);
  const Matrix t = inverse_spd(sqrt_psd(h)).matrix();
  const TransformedOracle w(f, t);
  const Vector x0{1.05, 0.2};
  // y0 = H^{1/2} x0.
  const Vector y0 = sqrt_psd(h) * x0;

  for (bool els : {true, false}) {
    DescentConfig a;
    a.metric = MetricChoice::intrinsic_at(xbar);
    a.max_iter = 6;
    if (!els) a.step = StepRule::fixed(0.5);
    DescentConfig b = a;
    b.metric = MetricChoice::euclidean();
    const DescentTrace ta = run(f, x0, a);
    const DescentTrace tb = run(w, y0, b);
    REQUIRE(ta.steps.size() == tb.steps.size());
    for (std::size_t k = 0; k < ta.steps.size(); ++k) {
      const Vector mapped = t * tb.steps[k].x;
      CHECK(norm2(sub(mapped, ta.steps[k].x)) <= 1e-10);
      CHECK(ta.steps[k].grad_norm == doctest::Approx(tb.steps[k].grad_norm).epsilon(1e-10));
    }
  }
  (void)nd;
}

TEST_CASE("domain exit carries the offending iterate") {
  const LogBarrierBox f(Vector{0.0}, Vector{1.0});
  DescentConfig cfg;
  cfg.step = StepRule::fixed(1.0);
  cfg.max_iter = 5;
  try {
    run(f, Vector{0.9}, cfg);
    FAIL("expected a domain exit");
  } catch (const DomainExitError& e) {
    CHECK(e.iteration() == 1);
    CHECK((e.iterate()[0] <= 0.0 || e.iterate()[0] >= 1.0));
    CHECK(e.partial().steps.size() == 1);
  }
  CHECK_THROWS_AS(run(f, Vector{1.5}, cfg), DomainError);
}

TEST_CASE("config validation") {
  const QuadraticFunction q = diag_quadratic({1.0, 2.0});
  DescentConfig cfg;
  cfg.eps = 1.0;
  CHECK_THROWS(run(q, Vector{1.0, 1.0}, cfg));
  cfg.eps = 0.0;
  cfg.max_iter = -1;
  CHECK_THROWS(run(q, Vector{1.0, 1.0}, cfg));
  cfg.max_iter = 3;
  CHECK_THROWS(run(q, Vector{1.0, 1.0, 1.0}, cfg));
  cfg.step = StepRule::fixed(-0.1);
  CHECK_THROWS(run(q, Vector{1.0, 1.0}, cfg));
}

TEST_CASE("trace serialization") {
  const QuadraticFunction q = diag_quadratic({0.5, 1.0});
  DescentConfig cfg;
  cfg.max_iter = 3;
  const DescentTrace tr = run(q, Vector{1.0, 1.0}, cfg);
  const std::string csv = trace_to_csv(tr);
  CHECK(csv.rfind("k,f,f_gap,grad_norm", 0) == 0);
  CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == tr.steps.size() + 1);
  const std::string js = trace_to_json(tr);
  CHECK(js.find("\"steps\"") != std::string::npos);
  CHECK(trace_to_csv(run(q, Vector{1.0, 1.0}, cfg)) == csv);
  CHECK(direction_mode_from_string(to_string(DirectionMode::RandomCone)) == DirectionMode::RandomCone);
  CHECK_THROWS(direction_mode_from_string("sideways"));
}

TEST_CASE("relative spectrum") {
  const EigBounds e = relative_spectrum(SymMatrix::diagonal(Vector{2.0, 8.0}), SymMatrix::diagonal(Vector{2.0, 2.0}));
  CHECK(e.min == doctest::Approx(1.0));
  CHECK(e.max == doctest::Approx(4.0));
}
