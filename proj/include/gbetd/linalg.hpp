#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

namespace gbetd {

using Vector = std::vector<double>;

/// Dense row-major matrix. Sizes here are small (tens to a few hundred rows),
/// so everything below favors clarity over blocking tricks.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {}

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  static Matrix diagonal(const Vector& d) {
    Matrix m(static_cast<int>(d.size()), static_cast<int>(d.size()));
    for (size_t i = 0; i < d.size(); ++i) m(static_cast<int>(i), static_cast<int>(i)) = d[i];
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(int i, int j) { return data_[static_cast<size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return data_[static_cast<size_t>(i) * cols_ + j]; }

  const double* row_data(int i) const { return data_.data() + static_cast<size_t>(i) * cols_; }
  double* row_data(int i) { return data_.data() + static_cast<size_t>(i) * cols_; }
  Vector row(int i) const { return Vector(row_data(i), row_data(i) + cols_); }
  Vector col(int j) const {
    Vector c(rows_);
    for (int i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
  }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  Matrix& operator+=(const Matrix& o);
  Matrix& operator-=(const Matrix& o);
  Matrix& operator*=(double a);

  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(Matrix a, double s) { return a *= s; }
  friend Matrix operator*(double s, Matrix a) { return a *= s; }
  friend Matrix operator*(const Matrix& a, const Matrix& b);
  friend Vector operator*(const Matrix& a, const Vector& x);

  double max_abs() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// Vector helpers.
double dot(const Vector& a, const Vector& b);
double norm2(const Vector& v);
double norm_inf(const Vector& v);
Vector& axpy(double a, const Vector& x, Vector& y);  // y += a*x
Vector scaled(const Vector& x, double a);
Vector operator+(const Vector& a, const Vector& b);
Vector operator-(const Vector& a, const Vector& b);
Matrix outer(const Vector& a, const Vector& b);

struct SingularMatrixError : std::domain_error {
  using std::domain_error::domain_error;
};

/// LU with partial pivoting.
class LuDecomposition {
 public:
  explicit LuDecomposition(const Matrix& a);
  bool singular() const { return singular_; }
  Vector solve(const Vector& b) const;  // throws SingularMatrixError
  Matrix solve(const Matrix& b) const;

 private:
  Matrix lu_;
  std::vector<int> piv_;
  bool singular_ = false;
};

Vector solve_linear(const Matrix& a, const Vector& b);
Matrix inverse(const Matrix& a);

/// ‖A‖₁·‖A⁻¹‖₁; +inf when A is numerically singular.
double condition_estimate_1(const Matrix& a);

/// Thin SVD A = U·diag(sigma)·Vᵀ via one-sided Jacobi. sigma is descending.
struct Svd {
  Matrix u;
  Vector sigma;
  Matrix v;
};
Svd jacobi_svd(const Matrix& a);
int numeric_rank(const Svd& s, double rel_tol = 1e-12);
Vector min_norm_least_squares(const Matrix& a, const Vector& b, double rel_tol = 1e-12);
double spectral_norm(const Matrix& a);  // largest singular value

/// Spectral radius by shifted power iteration. Valid for matrices whose
/// spectral radius is itself an eigenvalue with a nonnegative real part
/// (nonnegative matrices, and matrices similar to symmetric PSD ones) --
/// the shift by +I makes that eigenvalue strictly dominant in modulus.
double spectral_radius_power(const Matrix& a, double tol = 1e-12, int max_iter = 10000);

std::pair<std::complex<double>, std::complex<double>> eigenvalues_2x2(const Matrix& a);

}  // namespace gbetd
