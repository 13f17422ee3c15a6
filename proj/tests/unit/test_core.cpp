#include <doctest.h>

#include <cmath>
#include <random>

#include "pepkit/cert.hpp"
#include "pepkit/linalg.hpp"
#include "pepkit/metric.hpp"

using namespace pepkit;

namespace {

SymMatrix random_spd(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = nd(rng);
  SymMatrix s(a.transpose() * a);
  for (std::size_t i = 0; i < n; ++i) s.add(i, i, 0.1);
  return s;
}

Vector random_vec(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Vector v(n);
  for (double& x : v) x = nd(rng);
  return v;
}

}  // namespace

TEST_CASE("inner product") {
  CHECK(inner(MetricOperator::euclidean(2), Vector{1, 0}, Vector{1, 0}) == doctest::Approx(1.0));
  const MetricOperator b(SymMatrix{{2, 0}, {0, 3}});
  CHECK(inner(b, Vector{1, 1}, Vector{1, 1}) == doctest::Approx(5.0));

  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    const MetricOperator m(random_spd(4, rng));
    const Vector u = random_vec(4, rng), v = random_vec(4, rng);
    CHECK(inner(m, u, v) == doctest::Approx(inner(m, v, u)).epsilon(1e-13));
    CHECK(inner(m, u, u) > 0.0);
  }
  CHECK_THROWS_AS(inner(b, Vector{1, 1, 1}, Vector{1, 1}), DimensionError);
}

TEST_CASE("metric operator rejects non-PD matrices") {
  CHECK_THROWS(MetricOperator(SymMatrix{{1, 0}, {0, 0}}));
  CHECK_THROWS(MetricOperator(SymMatrix{{1, 2}, {2, 1}}));
}

TEST_CASE("eig_bounds") {
  const Vector d{1, 4};
  const EigBounds e = eig_bounds(SymMatrix::diagonal(d));
  CHECK(e.min == doctest::Approx(1.0));
  CHECK(e.max == doctest::Approx(4.0));
  const EigBounds z = eig_bounds(SymMatrix(3));
  CHECK(z.min == 0.0);
  CHECK(z.max == 0.0);

  SymMatrix bad(2);
  bad.set(0, 1, std::nan(""));
  CHECK_THROWS(eig_bounds(bad));
}

TEST_CASE("eig_bounds: positive minimum iff Cholesky succeeds") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  int pd = 0;
  for (int t = 0; t < 200; ++t) {
    SymMatrix s = random_spd(5, rng);
    // Shift so that roughly half the draws are indefinite.
    const double shift = eig_bounds(s).min + nd(rng) * 0.05;
    for (std::size_t i = 0; i < 5; ++i) s.add(i, i, -shift);
    const bool chol = cholesky(s).has_value();
    const double lmin = eig_bounds(s).min;
    if (std::fabs(lmin) < 1e-9) continue;
    CHECK((lmin > 0.0) == chol);
    pd += chol;
  }
  CHECK(pd > 20);
}

TEST_CASE("eig_bounds matches the characteristic polynomial on integer 2x2 matrices") {
  for (int a = -3; a <= 3; ++a)
    for (int b = -3; b <= 3; ++b)
      for (int c = -3; c <= 3; ++c) {
        // λ² − (a+c)λ + (ac − b²) = 0
        const double tr = a + c, det = a * c - b * b;
        const double disc = std::sqrt(tr * tr - 4.0 * det);
        const EigBounds e = eig_bounds(SymMatrix{{double(a), double(b)}, {double(b), double(c)}});
        CHECK(std::fabs(e.min - (tr - disc) / 2.0) <= 1e-8);
        CHECK(std::fabs(e.max - (tr + disc) / 2.0) <= 1e-8);
      }
}

TEST_CASE("is_psd") {
  CHECK(is_psd(SymMatrix::identity(3), 1e-10));
  CHECK_FALSE(is_psd(SymMatrix{{1, 0}, {0, -1}}, 1e-10));

  const Certificate c = els_gradient_certificate(0.25, 0.1);
  REQUIRE(c.S.has_value());
  const SymMatrix& s = *c.S;
  CHECK(is_psd(s, 1e-10));
  CHECK(std::fabs(s(0, 0) * s(1, 1) - s(0, 1) * s(0, 1)) <= 1e-12);
}

TEST_CASE("is_psd of M and -M bounds the norm") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e-9, 1e-9);
  const double tol = 1e-8;
  for (int t = 0; t < 100; ++t) {
    SymMatrix m(4);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = i; j < 4; ++j) m.set(i, j, u(rng) * (t % 3 == 0 ? 100.0 : 1.0));
    SymMatrix neg = m * -1.0;
    if (is_psd(m, tol) && is_psd(neg, tol)) CHECK(m.frobenius_norm() <= 4 * tol * 2.0);
  }
}

TEST_CASE("tolerances must be positive") {
  Tolerances t;
  CHECK(t.eig_tol == 1e-10);
  CHECK(t.sdp_rel_tol == 1e-7);
  CHECK(t.identity_tol == 1e-9);
  CHECK_NOTHROW(t.validate());
  t.sdp_rel_tol = 0.0;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
}

TEST_CASE("SymMatrix stays symmetric") {
  SymMatrix s(3);
  s.set(0, 2, 5.0);
  CHECK(s(2, 0) == 5.0);
  s.add(2, 0, 1.0);
  CHECK(s(0, 2) == 6.0);
  CHECK_THROWS(SymMatrix(Matrix{{1, 2}, {3, 4}}));
}

TEST_CASE("jacobi_svd and eigen reconstruct the input") {
  std::mt19937_64 rng(4);
  const SymMatrix s = random_spd(5, rng);
  const EigenDecomposition ed = jacobi_eigen(s);
  for (std::size_t i = 0; i < 5; ++i) {
    const Vector v = ed.vectors.col(i);
    const Vector sv = s * v;
    for (std::size_t j = 0; j < 5; ++j) CHECK(sv[j] == doctest::Approx(ed.values[i] * v[j]).epsilon(1e-10));
  }
  const Svd svd = jacobi_svd(s.matrix());
  Matrix us = svd.u;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) us(i, j) *= svd.sigma[j];
  const Matrix back = us * svd.v.transpose();
  CHECK((back - s.matrix()).max_abs() < 1e-12 * s.frobenius_norm());
}
