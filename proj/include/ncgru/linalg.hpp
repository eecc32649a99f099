#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace ncgru {

/// Dense real vector (double precision).
class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t len, double fill = 0.0) : data_(len, fill) {}
  Vector(std::initializer_list<double> values) : data_(values) {}
  explicit Vector(std::vector<double> values) : data_(std::move(values)) {}

  std::size_t size() const { return data_.size(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& storage() const { return data_; }

  bool operator==(const Vector&) const = default;

 private:
  std::vector<double> data_;
};

/// Dense real matrix, row-major.
///
/// Columns double as batch lanes throughout the recurrent code: a hidden
/// state for B sequences is an n x B matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(const Vector& d);
  /// n x 1 matrix holding v.
  static Matrix column(const Vector& v);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool is_square() const { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  Vector col(std::size_t j) const;

  Matrix transpose() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(double s, Matrix a);
Matrix operator-(Matrix a);

/// Elementwise product.
Matrix hadamard(const Matrix& a, const Matrix& b);

Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ·b without forming the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a·bᵀ without forming the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Vector matvec(const Matrix& a, const Vector& x);

/// Inverse via LU factorization with partial pivoting.
/// Throws SingularityError when a pivot falls below 1e-14·‖m‖_F.
Matrix exact_inverse(const Matrix& m);

struct SpectralNormOptions {
  double tol = 1e-12;
  std::size_t max_iter = 50;  // Jacobi sweeps
};

/// Largest singular value, from Jacobi sweeps on mᵀm until the off-diagonal
/// mass is below tol times the largest eigenvalue estimate.
/// Returns 0 for an all-zero matrix. Throws ConvergenceError (carrying the
/// last estimate) when max_iter sweeps are not enough.
double spectral_norm(const Matrix& m, const SpectralNormOptions& opts = {});
double spectral_norm(const Matrix& m, double tol, std::size_t max_iter);

double frobenius_norm(const Matrix& m);
double max_abs(std::span<const double> values);
inline double max_abs(const Matrix& m) { return max_abs(m.values()); }

/// ‖mᵀm − I‖_F, the orthogonality drift of m.
double fro_dist_identity(const Matrix& m);

/// max |m + mᵀ|, zero exactly for skew-symmetric m.
double skew_defect(const Matrix& m);

bool all_finite(std::span<const double> values);
inline bool all_finite(const Matrix& m) { return all_finite(m.values()); }

}  // namespace ncgru
