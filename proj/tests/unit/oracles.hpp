#pragma once

#include <Eigen/Dense>

#include "ncgru/linalg.hpp"
#include "ncgru/rng.hpp"

namespace oracle {

inline Eigen::MatrixXd to_eigen(const ncgru::Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

inline ncgru::Matrix from_eigen(const Eigen::MatrixXd& e) {
  ncgru::Matrix m(e.rows(), e.cols());
  for (Eigen::Index i = 0; i < e.rows(); ++i)
    for (Eigen::Index j = 0; j < e.cols(); ++j) m(i, j) = e(i, j);
  return m;
}

inline ncgru::Matrix naive_matmul(const ncgru::Matrix& a, const ncgru::Matrix& b) {
  ncgru::Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

inline ncgru::Matrix random_matrix(std::size_t r, std::size_t c, ncgru::Rng& rng, double scale = 1.0) {
  ncgru::Matrix m(r, c);
  for (double& e : m.values()) e = rng.uniform(-scale, scale);
  return m;
}

inline ncgru::Matrix random_skew(std::size_t n, ncgru::Rng& rng, double scale = 1.0) {
  ncgru::Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      a(i, j) = rng.uniform(-scale, scale);
      a(j, i) = -a(i, j);
    }
  return a;
}

inline double max_entry_diff(const ncgru::Matrix& a, const ncgru::Matrix& b) {
  return (to_eigen(a) - to_eigen(b)).cwiseAbs().maxCoeff();
}

/// Largest singular value via Eigen's SVD.
inline double sigma_max(const ncgru::Matrix& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(m));
  return svd.singularValues()(0);
}

}  // namespace oracle
