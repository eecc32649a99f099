#include "ncgru/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "ncgru/errors.hpp"
#include "ncgru/rng.hpp"

namespace ncgru {

namespace {

std::string dims(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + dims(a) + " vs " + dims(b));
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("Matrix: data length " + std::to_string(data_.size()) + " != " +
                     std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("Matrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(const Vector& d) {
  Matrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

Matrix Matrix::column(const Vector& v) { return Matrix(v.size(), 1, v.storage()); }

Vector Matrix::col(std::size_t j) const {
  Vector v(rows_);
  for (std::size_t i = 0; i < rows_; ++i) v[i] = (*this)(i, j);
  return v;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix& Matrix::operator+=(const Matrix& other) {
  require_same_shape(*this, other, "operator+=");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  require_same_shape(*this, other, "operator-=");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& x : data_) x *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(double s, Matrix a) { return a *= s; }
Matrix operator-(Matrix a) { return a *= -1.0; }

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix c(a.rows(), a.cols());
  auto av = a.values();
  auto bv = b.values();
  auto cv = c.values();
  for (std::size_t k = 0; k < cv.size(); ++k) cv[k] = av[k] * bv[k];
  return c;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: " + dims(a) + " * " + dims(b));
  Matrix c(a.rows(), b.cols());
  const std::size_t inner = a.cols();
  const std::size_t ncols = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* ci = c.row(i).data();
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* bk = b.row(k).data();
      for (std::size_t j = 0; j < ncols; ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ShapeError("matmul_tn: " + dims(a) + "ᵀ * " + dims(b));
  Matrix c(a.cols(), b.cols());
  const std::size_t ncols = b.cols();
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* ak = a.row(k).data();
    const double* bk = b.row(k).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = ak[i];
      if (aki == 0.0) continue;
      double* ci = c.row(i).data();
      for (std::size_t j = 0; j < ncols; ++j) ci[j] += aki * bk[j];
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: " + dims(a) + " * " + dims(b) + "ᵀ");
  Matrix c(a.rows(), b.rows());
  const std::size_t inner = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.row(i).data();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* bj = b.row(j).data();
      double s = 0.0;
      for (std::size_t k = 0; k < inner; ++k) s += ai[k] * bj[k];
      c(i, j) = s;
    }
  }
  return c;
}

Vector matvec(const Matrix& a, const Vector& x) {
  if (a.cols() != x.size()) throw ShapeError("matvec: " + dims(a) + " * " + std::to_string(x.size()));
  Vector y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ai = a.row(i);
    y[i] = std::inner_product(ai.begin(), ai.end(), x.values().begin(), 0.0);
  }
  return y;
}

Matrix exact_inverse(const Matrix& m) {
  if (!m.is_square()) throw ShapeError("exact_inverse: non-square " + dims(m));
  if (!all_finite(m)) throw NumericError("exact_inverse: non-finite input");
  const std::size_t n = m.rows();
  const double threshold = 1e-14 * frobenius_norm(m);

  Matrix lu = m;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = std::abs(lu(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::abs(lu(i, k)) > best) {
        best = std::abs(lu(i, k));
        piv = i;
      }
    }
    if (!(best > threshold)) {
      throw SingularityError("exact_inverse: pivot " + std::to_string(best) + " at column " +
                             std::to_string(k) + " below threshold");
    }
    if (piv != k) {
      std::swap_ranges(lu.row(k).begin(), lu.row(k).end(), lu.row(piv).begin());
      std::swap(perm[k], perm[piv]);
    }
    const double pivot = lu(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = (lu(i, k) /= pivot);
      if (f == 0.0) continue;
      for (std::size_t j = k + 1; j < n; ++j) lu(i, j) -= f * lu(k, j);
    }
  }

  // Solve L U X = P I, one right-hand side per column, stored transposed so
  // each solve walks contiguous memory.
  Matrix inv_t(n, n);
  std::vector<double> y(n);
  for (std::size_t col = 0; col < n; ++col) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = perm[i] == col ? 1.0 : 0.0;
      for (std::size_t j = 0; j < i; ++j) s -= lu(i, j) * y[j];
      y[i] = s;
    }
    for (std::size_t i = n; i-- > 0;) {
      double s = y[i];
      for (std::size_t j = i + 1; j < n; ++j) s -= lu(i, j) * y[j];
      y[i] = s / lu(i, i);
    }
    std::copy(y.begin(), y.end(), inv_t.row(col).begin());
  }
  Matrix inv = inv_t.transpose();
  if (!all_finite(inv)) throw NumericError("exact_inverse: non-finite result");
  return inv;
}

double spectral_norm(const Matrix& m, const SpectralNormOptions& opts) {
  if (m.size() == 0 || max_abs(m) == 0.0) return 0.0;
  if (!all_finite(m)) throw NumericError("spectral_norm: non-finite input");

  // Cyclic Jacobi sweeps on the Gram matrix mᵀm. By Weyl's inequality the
  // largest diagonal entry is within the off-diagonal Frobenius norm of the
  // largest eigenvalue, which gives a certified stopping rule even when the
  // top singular values are clustered.
  Matrix b = matmul_tn(m, m);
  const std::size_t n = b.rows();
  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) s += b(i, j) * b(i, j);
    return std::sqrt(s);
  };
  auto top = [&] {
    double t = 0.0;
    for (std::size_t i = 0; i < n; ++i) t = std::max(t, b(i, i));
    return t;
  };

  for (std::size_t sweep = 0;; ++sweep) {
    const double lambda = top();
    if (off_norm() <= opts.tol * lambda) return std::sqrt(lambda);
    if (sweep == opts.max_iter) {
      throw ConvergenceError("spectral_norm: no convergence after " + std::to_string(opts.max_iter) +
                                 " sweeps",
                             std::sqrt(lambda));
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double bpq = b(p, q);
        if (bpq == 0.0) continue;
        const double theta = (b(q, q) - b(p, p)) / (2.0 * bpq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double bkp = b(k, p), bkq = b(k, q);
          b(k, p) = c * bkp - sn * bkq;
          b(k, q) = sn * bkp + c * bkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double bpk = b(p, k), bqk = b(q, k);
          b(p, k) = c * bpk - sn * bqk;
          b(q, k) = sn * bpk + c * bqk;
        }
        b(p, q) = 0.0;
        b(q, p) = 0.0;
      }
    }
  }
}

double spectral_norm(const Matrix& m, double tol, std::size_t max_iter) {
  SpectralNormOptions opts;
  opts.tol = tol;
  opts.max_iter = max_iter;
  return spectral_norm(m, opts);
}

double frobenius_norm(const Matrix& m) {
  double s = 0.0;
  for (double x : m.values()) s += x * x;
  return std::sqrt(s);
}

double max_abs(std::span<const double> values) {
  double best = 0.0;
  for (double x : values) best = std::max(best, std::abs(x));
  return best;
}

double fro_dist_identity(const Matrix& m) {
  if (!m.is_square()) throw ShapeError("fro_dist_identity: non-square " + dims(m));
  Matrix g = matmul_tn(m, m);
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
  return frobenius_norm(g);
}

double skew_defect(const Matrix& m) {
  if (!m.is_square()) throw ShapeError("skew_defect: non-square " + dims(m));
  double best = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i; j < m.cols(); ++j) best = std::max(best, std::abs(m(i, j) + m(j, i)));
  return best;
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace ncgru
