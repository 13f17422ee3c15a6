#pragma once

// Small dense linear algebra used throughout pepkit. Every matrix in this
// library is tiny (Gram matrices are 4x4, interior-point domains have n <= 10,
// KKT systems stay under ~50 rows), so everything is dense and row-major.

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pepkit {

using Vector = std::vector<double>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> d);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  Vector col(std::size_t j) const;

  const std::vector<double>& data() const { return data_; }

  Matrix transpose() const;
  double frobenius_norm() const;
  double max_abs() const;
  bool all_finite() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);
Matrix operator*(const Matrix& a, const Matrix& b);
Vector operator*(const Matrix& a, std::span<const double> x);

/// Symmetric matrix. Stored densely; every write keeps (i,j) and (j,i) equal.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t dim) : m_(dim, dim) {}
  /// Symmetrizes `m`; throws if it is not square or is asymmetric beyond `tol`
  /// relative to its largest entry.
  explicit SymMatrix(const Matrix& m, double tol = 1e-12);
  SymMatrix(std::initializer_list<std::initializer_list<double>> rows);

  static SymMatrix identity(std::size_t n);
  static SymMatrix diagonal(std::span<const double> d);
  static SymMatrix outer(std::span<const double> u);

  std::size_t dim() const { return m_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  void set(std::size_t i, std::size_t j, double v);
  void add(std::size_t i, std::size_t j, double v);

  const Matrix& matrix() const { return m_; }
  double frobenius_norm() const { return m_.frobenius_norm(); }
  bool all_finite() const { return m_.all_finite(); }
  double quad(std::span<const double> u) const;

  SymMatrix& operator+=(const SymMatrix& o);
  SymMatrix& operator-=(const SymMatrix& o);
  SymMatrix& operator*=(double s);

 private:
  Matrix m_;
};

SymMatrix operator+(SymMatrix a, const SymMatrix& b);
SymMatrix operator-(SymMatrix a, const SymMatrix& b);
SymMatrix operator*(SymMatrix a, double s);
Vector operator*(const SymMatrix& a, std::span<const double> x);

/// B^T A B for square A.
SymMatrix congruence(const SymMatrix& a, const Matrix& b);

// Vector helpers.
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double norm_inf(std::span<const double> a);
Vector add(std::span<const double> a, std::span<const double> b);
Vector sub(std::span<const double> a, std::span<const double> b);
Vector scaled(std::span<const double> a, double s);
void axpy(double alpha, std::span<const double> x, std::span<double> y);

struct EigenDecomposition {
  Vector values;   // ascending
  Matrix vectors;  // column k is the eigenvector for values[k]
};

/// Cyclic Jacobi rotations; converges unconditionally for symmetric input.
EigenDecomposition jacobi_eigen(const SymMatrix& a);

struct Svd {
  Matrix u;
  Vector sigma;  // descending
  Matrix v;
};

/// One-sided (Hestenes) Jacobi SVD of a square matrix. Small singular values
/// keep high relative accuracy, which the NT scaling in the SDP solver needs.
Svd jacobi_svd(const Matrix& a);

/// Lower-triangular Cholesky factor, or nullopt when `a` is not positive definite.
std::optional<Matrix> cholesky(const SymMatrix& a);

Vector solve_lower(const Matrix& l, std::span<const double> b);
Vector solve_upper_transposed(const Matrix& l, std::span<const double> b);
Matrix invert_lower(const Matrix& l);

/// LU with partial pivoting.
class LuFactorization {
 public:
  explicit LuFactorization(Matrix a);
  bool singular() const { return singular_; }
  Vector solve(std::span<const double> b) const;

 private:
  Matrix lu_;
  std::vector<std::size_t> perm_;
  bool singular_ = false;
};

/// Spectral functions of a symmetric matrix (eigenvalues mapped through f).
SymMatrix spectral_map(const SymMatrix& a, double (*f)(double));
SymMatrix inverse_spd(const SymMatrix& a);
SymMatrix sqrt_psd(const SymMatrix& a);
SymMatrix inv_sqrt_spd(const SymMatrix& a);

/// Orthonormal basis (columns) of the null space of `a`, rank decided by
/// relative tolerance on the singular values.
Matrix null_space(const Matrix& a, double rel_tol = 1e-10);

}  // namespace pepkit
