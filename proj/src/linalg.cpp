#include "gbetd/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace gbetd {

Matrix& Matrix::operator+=(const Matrix& o) {
  for (size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
  for (size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double a) {
  for (double& x : data_) x *= a;
  return *this;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows_, b.cols_);
  for (int i = 0; i < a.rows_; ++i) {
    for (int k = 0; k < a.cols_; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = b.row_data(k);
      double* crow = c.row_data(i);
      for (int j = 0; j < b.cols_; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Vector operator*(const Matrix& a, const Vector& x) {
  Vector y(a.rows_, 0.0);
  for (int i = 0; i < a.rows_; ++i) {
    const double* arow = a.row_data(i);
    double s = 0.0;
    for (int j = 0; j < a.cols_; ++j) s += arow[j] * x[j];
    y[i] = s;
  }
  return y;
}

double Matrix::max_abs() const {
  double m = 0.0;
  for (double x : data_) m = std::max(m, std::abs(x));
  return m;
}

double dot(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const Vector& v) { return std::sqrt(dot(v, v)); }

double norm_inf(const Vector& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

Vector& axpy(double a, const Vector& x, Vector& y) {
  for (size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
  return y;
}

Vector scaled(const Vector& x, double a) {
  Vector y(x);
  for (double& v : y) v *= a;
  return y;
}

Vector operator+(const Vector& a, const Vector& b) {
  Vector c(a);
  for (size_t i = 0; i < c.size(); ++i) c[i] += b[i];
  return c;
}

Vector operator-(const Vector& a, const Vector& b) {
  Vector c(a);
  for (size_t i = 0; i < c.size(); ++i) c[i] -= b[i];
  return c;
}

Matrix outer(const Vector& a, const Vector& b) {
  Matrix m(static_cast<int>(a.size()), static_cast<int>(b.size()));
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < b.size(); ++j) m(static_cast<int>(i), static_cast<int>(j)) = a[i] * b[j];
  return m;
}

LuDecomposition::LuDecomposition(const Matrix& a) : lu_(a), piv_(a.rows()) {
  const int n = a.rows();
  if (a.cols() != n) throw std::invalid_argument("LU requires a square matrix");
  std::iota(piv_.begin(), piv_.end(), 0);
  for (int k = 0; k < n; ++k) {
    int p = k;
    double best = std::abs(lu_(k, k));
    for (int i = k + 1; i < n; ++i) {
      if (std::abs(lu_(i, k)) > best) {
        best = std::abs(lu_(i, k));
        p = i;
      }
    }
    if (best == 0.0) {
      singular_ = true;
      continue;
    }
    if (p != k) {
      for (int j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(p, j));
      std::swap(piv_[k], piv_[p]);
    }
    for (int i = k + 1; i < n; ++i) {
      lu_(i, k) /= lu_(k, k);
      const double lik = lu_(i, k);
      if (lik == 0.0) continue;
      for (int j = k + 1; j < n; ++j) lu_(i, j) -= lik * lu_(k, j);
    }
  }
}

Vector LuDecomposition::solve(const Vector& b) const {
  if (singular_) throw SingularMatrixError("singular matrix in LU solve");
  const int n = lu_.rows();
  Vector x(n);
  for (int i = 0; i < n; ++i) x[i] = b[piv_[i]];
  for (int i = 1; i < n; ++i)
    for (int j = 0; j < i; ++j) x[i] -= lu_(i, j) * x[j];
  for (int i = n - 1; i >= 0; --i) {
    for (int j = i + 1; j < n; ++j) x[i] -= lu_(i, j) * x[j];
    x[i] /= lu_(i, i);
  }
  return x;
}

Matrix LuDecomposition::solve(const Matrix& b) const {
  Matrix x(b.rows(), b.cols());
  for (int j = 0; j < b.cols(); ++j) {
    Vector xc = solve(b.col(j));
    for (int i = 0; i < b.rows(); ++i) x(i, j) = xc[i];
  }
  return x;
}

Vector solve_linear(const Matrix& a, const Vector& b) { return LuDecomposition(a).solve(b); }

Matrix inverse(const Matrix& a) { return LuDecomposition(a).solve(Matrix::identity(a.rows())); }

namespace {
double norm1_matrix(const Matrix& a) {
  double best = 0.0;
  for (int j = 0; j < a.cols(); ++j) {
    double s = 0.0;
    for (int i = 0; i < a.rows(); ++i) s += std::abs(a(i, j));
    best = std::max(best, s);
  }
  return best;
}
}  // namespace

double condition_estimate_1(const Matrix& a) {
  LuDecomposition lu(a);
  if (lu.singular()) return std::numeric_limits<double>::infinity();
  Matrix inv = lu.solve(Matrix::identity(a.rows()));
  return norm1_matrix(a) * norm1_matrix(inv);
}

Svd jacobi_svd(const Matrix& a) {
  // One-sided Jacobi on the columns of a working copy W: rotations make the
  // columns pairwise orthogonal; column norms are the singular values.
  const int m = a.rows();
  const int n = a.cols();
  Matrix w(a);
  Matrix v = Matrix::identity(n);

  const double eps = std::numeric_limits<double>::epsilon();
  for (int sweep = 0; sweep < 60; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (int i = 0; i < m; ++i) {
          alpha += w(i, p) * w(i, p);
          beta += w(i, q) * w(i, q);
          gamma += w(i, p) * w(i, q);
        }
        if (std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
        off = std::max(off, std::abs(gamma));
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (int i = 0; i < m; ++i) {
          const double wp = w(i, p), wq = w(i, q);
          w(i, p) = c * wp - s * wq;
          w(i, q) = s * wp + c * wq;
        }
        for (int i = 0; i < n; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (off == 0.0) break;
  }

  Svd out;
  out.sigma.assign(n, 0.0);
  out.u = Matrix(m, n);
  out.v = Matrix(n, n);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Vector norms(n);
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += w(i, j) * w(i, j);
    norms[j] = std::sqrt(s);
  }
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return norms[x] > norms[y]; });
  for (int jj = 0; jj < n; ++jj) {
    const int j = order[jj];
    out.sigma[jj] = norms[j];
    for (int i = 0; i < n; ++i) out.v(i, jj) = v(i, j);
    if (norms[j] > 0.0) {
      for (int i = 0; i < m; ++i) out.u(i, jj) = w(i, j) / norms[j];
    }
  }
  return out;
}

int numeric_rank(const Svd& s, double rel_tol) {
  if (s.sigma.empty() || s.sigma[0] == 0.0) return 0;
  int r = 0;
  for (double sv : s.sigma)
    if (sv > rel_tol * s.sigma[0]) ++r;
  return r;
}

Vector min_norm_least_squares(const Matrix& a, const Vector& b, double rel_tol) {
  Svd s = jacobi_svd(a);
  const int n = a.cols();
  Vector x(n, 0.0);
  const double cutoff = s.sigma.empty() ? 0.0 : rel_tol * s.sigma[0];
  for (int k = 0; k < n; ++k) {
    if (s.sigma[k] <= cutoff) continue;
    double uk_b = 0.0;
    for (int i = 0; i < a.rows(); ++i) uk_b += s.u(i, k) * b[i];
    const double coeff = uk_b / s.sigma[k];
    for (int i = 0; i < n; ++i) x[i] += coeff * s.v(i, k);
  }
  return x;
}

double spectral_norm(const Matrix& a) {
  Svd s = jacobi_svd(a);
  return s.sigma.empty() ? 0.0 : s.sigma[0];
}

double spectral_radius_power(const Matrix& a, double tol, int max_iter) {
  const int n = a.rows();
  if (n == 0) return 0.0;
  // Power iteration on A + I; deterministic start with unequal components so
  // we do not begin orthogonal to the dominant eigenvector.
  Vector x(n);
  for (int i = 0; i < n; ++i) x[i] = 1.0 + 1e-3 * (i + 1);
  double nx = norm2(x);
  for (double& v : x) v /= nx;
  double lambda = 1.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector y = a * x;
    for (int i = 0; i < n; ++i) y[i] += x[i];
    const double ny = norm2(y);
    if (ny == 0.0) return 0.0;
    for (double& v : y) v /= ny;
    const double prev = lambda;
    lambda = ny;
    double diff = 0.0;
    for (int i = 0; i < n; ++i) diff = std::max(diff, std::abs(y[i] - x[i]));
    x = std::move(y);
    if (diff < tol && std::abs(lambda - prev) < tol) break;
  }
  return std::max(0.0, lambda - 1.0);
}

std::pair<std::complex<double>, std::complex<double>> eigenvalues_2x2(const Matrix& a) {
  if (a.rows() != 2 || a.cols() != 2) throw std::invalid_argument("eigenvalues_2x2 needs 2x2");
  const double tr = a(0, 0) + a(1, 1);
  const double det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
  const std::complex<double> disc = std::sqrt(std::complex<double>(tr * tr - 4.0 * det, 0.0));
  return {0.5 * (tr + disc), 0.5 * (tr - disc)};
}

}  // namespace gbetd
