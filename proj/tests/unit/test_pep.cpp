#include <doctest.h>

#include <cmath>
#include <random>

#include "pepkit/cert.hpp"
#include "pepkit/pep.hpp"
#include "pepkit/sdpsolve.hpp"

using namespace pepkit;

namespace {

PepInstance els(Variant v, double kappa, double eps, double R = 1.0) {
  PepInstance p;
  p.variant = v;
  p.mu = kappa;
  p.L = 1.0;
  p.eps = eps;
  p.R = R;
  return p;
}

PepInstance fixed(Variant v, double mu, double L, double eps, double gamma, double R = 1.0) {
  PepInstance p;
  p.variant = v;
  p.step = StepRule::fixed(gamma);
  p.mu = mu;
  p.L = L;
  p.eps = eps;
  p.R = R;
  return p;
}

double solved(const PepInstance& inst) {
  const SdpSolution s = solve(build(inst));
  REQUIRE(s.status == SdpStatus::Optimal);
  return s.objective_value;
}

double els_g(double k, double e) {
  const double r = e + std::sqrt(1.0 - e * e) * (1.0 - k) / (2.0 * std::sqrt(k));
  return r * r;
}

}  // namespace

TEST_CASE("ELS function-value problem shape") {
  const GramSdpProblem p = build_els(els(Variant::FunctionValue, 0.25, 0.1));
  CHECK(p.labels == std::vector<std::string>{"x0", "x1", "g0", "g1"});
  CHECK(p.scalars == std::vector<std::string>{"f0", "f1"});
  int interp = 0;
  for (const auto& c : p.inequalities) interp += c.id.rfind("interp(", 0) == 0;
  CHECK(interp == 6);
  CHECK(p.inequalities.size() == 7);  // plus the budget
  CHECK(p.find_inequality("budget") != nullptr);
  CHECK(p.equalities.size() == 1);
  CHECK(p.find_equality("linesearch") != nullptr);
  CHECK(p.psd_blocks.size() == 1);
  CHECK(p.gram_psd);
  CHECK_NOTHROW(p.validate());
}

TEST_CASE("symmetric variants use three unordered pairs") {
  for (Variant v : {Variant::GradientNorm, Variant::Distance}) {
    const GramSdpProblem p = build_els(els(v, 0.25, 0.1));
    int interp = 0;
    for (const auto& c : p.inequalities) interp += c.id.rfind("interp(", 0) == 0;
    CHECK(interp == 3);
  }
}

TEST_CASE("interpolation pair enumeration") {
  const auto pairs = enumerate_interpolation_pairs({kStar, 0, 1});
  const std::vector<std::pair<PointIndex, PointIndex>> expect{{kStar, 0}, {0, kStar}, {kStar, 1},
                                                              {1, kStar}, {0, 1},     {1, 0}};
  CHECK(pairs == expect);
  CHECK(enumerate_unordered_pairs({kStar, 0, 1}).size() == 3);
  CHECK(point_name(kStar) == "*");
}

TEST_CASE("eps = 0 cone block forces orthogonal gradients") {
  const GramSdpProblem p = build_els(els(Variant::GradientNorm, 0.25, 0.0));
  const PsdBlock& blk = p.psd_blocks.front();
  SymMatrix g(4);
  g.set(2, 2, 1.0);
  g.set(3, 3, 2.0);
  g.set(2, 3, 0.3);
  const SymMatrix m = blk.eval(g, Vector{});
  CHECK(m(0, 0) == 0.0);
  CHECK(m(1, 1) == 0.0);
  CHECK(m(0, 1) == doctest::Approx(0.3));
  CHECK_FALSE(m(0, 1) == 0.0);
}

TEST_CASE("fixed-step problem shape") {
  const GramSdpProblem p = build_fixed(fixed(Variant::GradientNorm, 1, 4, 0.1, 0.3));
  CHECK(p.labels == std::vector<std::string>{"x0", "g0", "g1", "d"});
  CHECK(p.find_equality("linesearch") == nullptr);
  CHECK(p.psd_blocks.empty());
  CHECK(p.find_inequality("inexact") != nullptr);
  CHECK_THROWS_AS(build_fixed(fixed(Variant::GradientNorm, 1, 4, 0.1, -0.1)), std::invalid_argument);
  CHECK_THROWS_AS(build_els(fixed(Variant::GradientNorm, 1, 4, 0.1, 0.1)), std::invalid_argument);
}

TEST_CASE("invalid instances") {
  PepInstance p = els(Variant::GradientNorm, 0.25, 0.1);
  p.eps = 1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = els(Variant::GradientNorm, 0.25, 0.1);
  p.R = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = els(Variant::GradientNorm, 0.25, 0.1);
  p.mu = 2.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("solver: trivial problem") {
  GramSdpProblem p;
  p.labels = {"x"};
  p.scalars = {"f1"};
  p.objective = AffineForm(1, 1);
  p.objective.scalars[0] = 1.0;
  AffineForm c(1, 1);
  c.constant = 3.0;
  c.scalars[0] = -1.0;
  p.inequalities.push_back({"cap", c});
  const SdpSolution s = solve(p);
  CHECK(s.status == SdpStatus::Optimal);
  CHECK(s.objective_value == doctest::Approx(3.0).epsilon(1e-7));
  CHECK(s.dual("cap") == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("solver: unbounded and infeasible problems") {
  GramSdpProblem p;
  p.labels = {"x"};
  p.scalars = {"f1"};
  p.objective = AffineForm(1, 1);
  p.objective.scalars[0] = 1.0;
  CHECK(solve(p).status == SdpStatus::Unbounded);

  AffineForm lo(1, 1), hi(1, 1);
  lo.scalars[0] = 1.0;
  lo.constant = -2.0;  // f1 ≥ 2
  hi.scalars[0] = -1.0;
  hi.constant = 1.0;   // f1 ≤ 1
  p.inequalities = {{"lo", lo}, {"hi", hi}};
  CHECK(solve(p).status == SdpStatus::Infeasible);
}

TEST_CASE("ELS values against the rates") {
  CHECK(solved(els(Variant::FunctionValue, 0.25, 0.0)) == doctest::Approx(0.36).epsilon(1e-4));
  CHECK(solved(els(Variant::GradientNorm, 0.25, 0.0)) == doctest::Approx(0.5625).epsilon(1e-4));
  // Boundary ε = 2√κ/(1+κ) = 0.8: (0.8 + 0.6·0.75)² = 1.5625.
  CHECK(els_g(0.25, 0.8) == doctest::Approx(1.5625));
  CHECK(solved(els(Variant::GradientNorm, 0.25, 0.8)) == doctest::Approx(1.5625).epsilon(1e-4));
  CHECK(solved(els(Variant::Distance, 0.1, 0.05)) == doctest::Approx(els_g(0.1, 0.05)).epsilon(1e-4));
}

TEST_CASE("ELS function value with eps > 0 matches the line-search PEP form, not the stated factor") {
  for (double k : {0.1, 0.25, 0.5}) {
    const double v = solved(els(Variant::FunctionValue, k, 0.05));
    CHECK(v == doctest::Approx(els_function_value_rate(k, 0.05)).epsilon(1e-4));
    CHECK(v > rate_els({k, 0.05, std::nullopt, std::nullopt, 1.0}).f_rate * (1.0 + 1e-3));
  }
}

TEST_CASE("fixed-step values") {
  CHECK(solved(fixed(Variant::Distance, 1, 4, 0.0, 0.0)) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(solved(fixed(Variant::GradientNorm, 1, 4, 0.0, 0.4)) == doctest::Approx(0.36).epsilon(1e-4));
  const double gmax = fixed_gamma_max(1, 4, 0.1);
  const double rho = 0.6 + 0.1;
  for (Variant v : {Variant::FunctionValue, Variant::GradientNorm, Variant::Distance})
    CHECK(solved(fixed(v, 1, 4, 0.1, gmax)) == doctest::Approx(rho * rho).epsilon(1e-4));
}

TEST_CASE("eps = 0 forces d = g0 in the fixed-step optimum") {
  const SdpSolution s = solve(build(fixed(Variant::GradientNorm, 1, 4, 0.0, 0.3)));
  REQUIRE(s.status == SdpStatus::Optimal);
  const SymMatrix& g = s.gram;  // x0 g0 g1 d
  const double dist = g(3, 3) - 2 * g(1, 3) + g(1, 1);
  CHECK(std::fabs(dist) < 1e-6);
}

TEST_CASE("value is invariant under label permutation") {
  const GramSdpProblem p = build(els(Variant::GradientNorm, 0.3, 0.1));
  const double base = solve(p).objective_value;
  const std::vector<std::vector<std::size_t>> perms{{3, 2, 1, 0}, {1, 0, 3, 2}, {2, 3, 0, 1}};
  for (const auto& perm : perms) CHECK(solve(permute_labels(p, perm)).objective_value == doctest::Approx(base).epsilon(1e-7));
}

TEST_CASE("value scales linearly with R") {
  for (Variant v : {Variant::FunctionValue, Variant::GradientNorm, Variant::Distance}) {
    const double base = solved(els(v, 0.25, 0.05 * (v != Variant::FunctionValue)));
    for (double t : {0.5, 2.0})
      CHECK(solved(els(v, 0.25, 0.05 * (v != Variant::FunctionValue), t)) == doctest::Approx(t * base).epsilon(1e-6));
  }
}

TEST_CASE("JSON round trip preserves the problem") {
  const GramSdpProblem p = build(fixed(Variant::FunctionValue, 1, 4, 0.1, 0.2));
  const GramSdpProblem q = problem_from_json(to_json(p));
  CHECK(q.labels == p.labels);
  CHECK(q.inequalities.size() == p.inequalities.size());
  CHECK(to_json(q) == to_json(p));
  CHECK(solve(q).objective_value == doctest::Approx(solve(p).objective_value).epsilon(1e-10));
}

TEST_CASE("optimal solutions satisfy their KKT residuals") {
  const Tolerances tol;
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> uk(0.05, 0.9);
  for (int t = 0; t < 10; ++t) {
    const double k = uk(rng);
    const double e = std::uniform_real_distribution<double>(0.0, 0.9 * els_eps_max(k))(rng);
    const SdpSolution s = solve(build(els(Variant::Distance, k, e)));
    REQUIRE(s.status == SdpStatus::Optimal);
    const double scale = tol.sdp_rel_tol * (1.0 + std::fabs(s.objective_value));
    CHECK(s.residuals.primal_feas <= scale);
    CHECK(s.residuals.dual_feas <= scale);
    CHECK(s.residuals.gap <= scale);
    for (const auto& [id, m] : s.duals)
      if (id != "linesearch") CHECK(m >= -1e-9);
    CHECK(eig_bounds(s.gram).min >= -tol.eig_tol * (1.0 + s.gram.frobenius_norm()));
    CHECK(s.objective_value == doctest::Approx(els_g(k, e)).epsilon(1e-4));
  }
}

TEST_CASE("weak duality along the iterates") {
  const SdpSolution s = solve(build(els(Variant::GradientNorm, 0.25, 0.1)));
  REQUIRE_FALSE(s.iterates.empty());
  for (const auto& it : s.iterates) CHECK(it.dcost >= it.pcost - it.gap - 1e-9);
}

TEST_CASE("vector realization reproduces the Gram matrix and the constraints") {
  const PepInstance inst = els(Variant::GradientNorm, 0.25, 0.1);
  const GramSdpProblem p = build(inst);
  const SdpSolution s = solve(p);
  const Matrix v = vector_realization(s.gram);
  CHECK(v.cols() <= 4);
  const Matrix g = v * v.transpose();
  CHECK((g - s.gram.matrix()).max_abs() < 1e-8);
  SymMatrix rebuilt(g, 1e-9);
  Vector sc;
  for (const auto& name : p.scalars) sc.push_back(s.scalars.at(name));
  for (const auto& c : p.inequalities) CHECK(std::fabs(c.expr.eval(rebuilt, sc) - c.expr.eval(s.gram, sc)) <= 1e-8);
}

TEST_CASE("solver is deterministic") {
  const GramSdpProblem p = build(fixed(Variant::Distance, 1, 4, 0.1, 0.2));
  CHECK(iterates_to_json(solve(p)) == iterates_to_json(solve(p)));
}

TEST_CASE("dual report at eps = 0") {
  const PepInstance inst = els(Variant::GradientNorm, 0.25, 0.0);
  const SdpSolution s = solve(build(inst));
  const Certificate c = dual_report(s, inst);
  CHECK(c.at("lambda") == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(c.at("linesearch") == doctest::Approx(inst.L + inst.mu).epsilon(1e-3));
  REQUIRE(c.S.has_value());
  CHECK((*c.S)(0, 1) == doctest::Approx(-1.0).epsilon(1e-3));

  CHECK_THROWS(dual_report(solve(build(els(Variant::FunctionValue, 0.25, 0.0))), els(Variant::FunctionValue, 0.25, 0.0)));
}
