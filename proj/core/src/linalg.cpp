#include "pepkit/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pepkit {

namespace {

void require(bool cond, const char* what) {
  if (!cond) throw DimensionError(what);
}

}  // namespace

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    require(r.size() == cols_, "Matrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> d) {
  Matrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

Vector Matrix::col(std::size_t j) const {
  Vector c(rows_);
  for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
  return c;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

double Matrix::frobenius_norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

double Matrix::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix& Matrix::operator+=(const Matrix& other) {
  require(rows_ == other.rows_ && cols_ == other.cols_, "Matrix +=: shape mismatch");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  require(rows_ == other.rows_ && cols_ == other.cols_, "Matrix -=: shape mismatch");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }
Matrix operator*(double s, Matrix a) { return a *= s; }

Matrix operator*(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), "Matrix *: shape mismatch");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

Vector operator*(const Matrix& a, std::span<const double> x) {
  require(a.cols() == x.size(), "Matrix * vector: shape mismatch");
  Vector y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
  return y;
}

SymMatrix::SymMatrix(const Matrix& m, double tol) : m_(m) {
  require(m.rows() == m.cols(), "SymMatrix: matrix is not square");
  const double scale = std::max(1.0, m.max_abs());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j) {
      if (std::abs(m(i, j) - m(j, i)) > tol * scale)
        throw std::invalid_argument("SymMatrix: input is not symmetric");
      const double avg = 0.5 * (m(i, j) + m(j, i));
      m_(i, j) = avg;
      m_(j, i) = avg;
    }
}

SymMatrix::SymMatrix(std::initializer_list<std::initializer_list<double>> rows)
    : SymMatrix(Matrix(rows)) {}

SymMatrix SymMatrix::identity(std::size_t n) { return SymMatrix(Matrix::identity(n)); }

SymMatrix SymMatrix::diagonal(std::span<const double> d) { return SymMatrix(Matrix::diagonal(d)); }

SymMatrix SymMatrix::outer(std::span<const double> u) {
  SymMatrix s(u.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = i; j < u.size(); ++j) s.set(i, j, u[i] * u[j]);
  return s;
}

void SymMatrix::set(std::size_t i, std::size_t j, double v) {
  m_(i, j) = v;
  m_(j, i) = v;
}

void SymMatrix::add(std::size_t i, std::size_t j, double v) {
  m_(i, j) += v;
  if (i != j) m_(j, i) += v;
}

double SymMatrix::quad(std::span<const double> u) const {
  require(u.size() == dim(), "SymMatrix::quad: dimension mismatch");
  return dot(u, m_ * u);
}

SymMatrix& SymMatrix::operator+=(const SymMatrix& o) {
  m_ += o.m_;
  return *this;
}
SymMatrix& SymMatrix::operator-=(const SymMatrix& o) {
  m_ -= o.m_;
  return *this;
}
SymMatrix& SymMatrix::operator*=(double s) {
  m_ *= s;
  return *this;
}

SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
SymMatrix operator-(SymMatrix a, const SymMatrix& b) { return a -= b; }
SymMatrix operator*(SymMatrix a, double s) { return a *= s; }
Vector operator*(const SymMatrix& a, std::span<const double> x) { return a.matrix() * x; }

SymMatrix congruence(const SymMatrix& a, const Matrix& b) {
  const Matrix m = b.transpose() * a.matrix() * b;
  SymMatrix out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i; j < m.cols(); ++j) out.set(i, j, 0.5 * (m(i, j) + m(j, i)));
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

Vector add(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "add: dimension mismatch");
  Vector r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

Vector sub(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "sub: dimension mismatch");
  Vector r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

Vector scaled(std::span<const double> a, double s) {
  Vector r(a.begin(), a.end());
  for (double& v : r) v *= s;
  return r;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  require(x.size() == y.size(), "axpy: dimension mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

EigenDecomposition jacobi_eigen(const SymMatrix& sym) {
  const std::size_t n = sym.dim();
  Matrix a = sym.matrix();
  Matrix v = Matrix::identity(n);
  const double scale = std::max(a.frobenius_norm(), 1e-300);

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= 1e-17 * scale) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });
  EigenDecomposition out{Vector(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

Svd jacobi_svd(const Matrix& a_in) {
  require(a_in.rows() == a_in.cols(), "jacobi_svd: square matrix required");
  const std::size_t n = a_in.rows();
  Matrix a = a_in;
  Matrix v = Matrix::identity(n);

  for (int sweep = 0; sweep < 100; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          alpha += a(k, p) * a(k, p);
          beta += a(k, q) * a(k, q);
          gamma += a(k, p) * a(k, q);
        }
        if (std::abs(gamma) <= 1e-16 * std::sqrt(alpha * beta) || gamma == 0.0) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    if (!rotated) break;
  }

  Vector sigma(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += a(k, j) * a(k, j);
    sigma[j] = std::sqrt(s);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return sigma[i] > sigma[j]; });

  Svd out{Matrix(n, n), Vector(n), Matrix(n, n)};
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t j = order[c];
    out.sigma[c] = sigma[j];
    for (std::size_t k = 0; k < n; ++k) {
      out.v(k, c) = v(k, j);
      out.u(k, c) = sigma[j] > 0.0 ? a(k, j) / sigma[j] : 0.0;
    }
  }
  return out;
}

std::optional<Matrix> cholesky(const SymMatrix& a) {
  const std::size_t n = a.dim();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) return std::nullopt;
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

Vector solve_lower(const Matrix& l, std::span<const double> b) {
  const std::size_t n = l.rows();
  require(b.size() == n, "solve_lower: dimension mismatch");
  Vector x(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) x[i] -= l(i, k) * x[k];
    x[i] /= l(i, i);
  }
  return x;
}

Vector solve_upper_transposed(const Matrix& l, std::span<const double> b) {
  const std::size_t n = l.rows();
  require(b.size() == n, "solve_upper_transposed: dimension mismatch");
  Vector x(b.begin(), b.end());
  for (std::size_t ii = n; ii-- > 0;) {
    for (std::size_t k = ii + 1; k < n; ++k) x[ii] -= l(k, ii) * x[k];
    x[ii] /= l(ii, ii);
  }
  return x;
}

Matrix invert_lower(const Matrix& l) {
  const std::size_t n = l.rows();
  Matrix inv(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    Vector e(n, 0.0);
    e[j] = 1.0;
    const Vector c = solve_lower(l, e);
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = c[i];
  }
  return inv;
}

LuFactorization::LuFactorization(Matrix a) : lu_(std::move(a)), perm_(lu_.rows()) {
  require(lu_.rows() == lu_.cols(), "LuFactorization: square matrix required");
  const std::size_t n = lu_.rows();
  std::iota(perm_.begin(), perm_.end(), 0);
  const double scale = std::max(lu_.max_abs(), 1e-300);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(lu_(i, k)) > std::abs(lu_(piv, k))) piv = i;
    if (std::abs(lu_(piv, k)) <= 1e-300 * scale || std::abs(lu_(piv, k)) == 0.0) {
      singular_ = true;
      continue;
    }
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(piv, j));
      std::swap(perm_[k], perm_[piv]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      lu_(i, k) /= lu_(k, k);
      const double f = lu_(i, k);
      if (f == 0.0) continue;
      for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= f * lu_(k, j);
    }
  }
}

Vector LuFactorization::solve(std::span<const double> b) const {
  const std::size_t n = lu_.rows();
  require(b.size() == n, "LuFactorization::solve: dimension mismatch");
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < i; ++k) x[i] -= lu_(i, k) * x[k];
  for (std::size_t ii = n; ii-- > 0;) {
    for (std::size_t k = ii + 1; k < n; ++k) x[ii] -= lu_(ii, k) * x[k];
    x[ii] /= lu_(ii, ii);
  }
  return x;
}

SymMatrix spectral_map(const SymMatrix& a, double (*f)(double)) {
  const auto eig = jacobi_eigen(a);
  const std::size_t n = a.dim();
  SymMatrix out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double fk = f(eig.values[k]);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) out.add(i, j, fk * eig.vectors(i, k) * eig.vectors(j, k));
  }
  return out;
}

SymMatrix inverse_spd(const SymMatrix& a) {
  auto l = cholesky(a);
  if (!l) throw std::domain_error("inverse_spd: matrix is not positive definite");
  const Matrix linv = invert_lower(*l);
  return SymMatrix(linv.transpose() * linv, 1e-8);
}

SymMatrix sqrt_psd(const SymMatrix& a) {
  return spectral_map(a, [](double x) { return x > 0.0 ? std::sqrt(x) : 0.0; });
}

SymMatrix inv_sqrt_spd(const SymMatrix& a) {
  const auto eig = jacobi_eigen(a);
  if (!(eig.values.front() > 0.0)) throw std::domain_error("inv_sqrt_spd: matrix is not positive definite");
  return spectral_map(a, [](double x) { return 1.0 / std::sqrt(x); });
}

Matrix null_space(const Matrix& a, double rel_tol) {
  const std::size_t n = a.cols();
  if (a.rows() == 0) return Matrix::identity(n);
  const SymMatrix ata(a.transpose() * a, 1e-8);
  const auto eig = jacobi_eigen(ata);
  const double top = std::max(eig.values.back(), 0.0);
  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k < n; ++k)
    if (eig.values[k] <= rel_tol * rel_tol * top || top == 0.0) keep.push_back(k);
  Matrix basis(n, keep.size());
  for (std::size_t c = 0; c < keep.size(); ++c)
    for (std::size_t i = 0; i < n; ++i) basis(i, c) = eig.vectors(i, keep[c]);
  return basis;
}

}  // namespace pepkit
