#include "ncgru/orthocore.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "ncgru/errors.hpp"
#include "ncgru/rng.hpp"

namespace ncgru {

namespace {

Matrix identity_plus(const Matrix& a, double sign) {
  Matrix m = sign * a;
  for (std::size_t i = 0; i < m.rows(); ++i) m(i, i) += 1.0;
  return m;
}

/// (I − A) D: scales column j by d_j.
Matrix minus_a_times_d(const Matrix& a, const Vector& d) {
  Matrix m = identity_plus(a, -1.0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) *= d[j];
  return m;
}

void require_skew_input(const Matrix& a, const char* op) {
  if (!a.is_square()) throw ShapeError(std::string(op) + ": A must be square");
  const double tol = 1e-12 * (1.0 + max_abs(a));
  if (skew_defect(a) > tol) throw ContractError(std::string(op) + ": matrix is not skew-symmetric");
}

NeumannDiagnostics finish_step(SkewOrthogonal& skew, double contraction) {
  NeumannDiagnostics diag;
  ++skew.steps;
  ++skew.steps_since_reset;
  if (skew.reset_every > 0 && skew.steps_since_reset >= skew.reset_every) {
    reset(skew);
    diag.reset_applied = true;
  } else {
    refresh_u(skew);
  }
  if (!all_finite(skew.u) || !all_finite(skew.a_tilde)) {
    throw NumericError("neumann_step: non-finite orthogonal weight after update");
  }
  diag.contraction_norm = contraction;
  diag.contraction_warning = contraction >= 1.0;
  diag.drift = fro_dist_identity(skew.u);
  diag.step = skew.steps;
  return diag;
}

double contraction_of(const Matrix& x) {
  try {
    return spectral_norm(x);
  } catch (const ConvergenceError& e) {
    return e.last_estimate;
  }
}

}  // namespace

Matrix init_skew_from_angles(std::size_t n, std::span<const double> angles) {
  if (n < 2) throw RangeError("init_skew: n must be >= 2");
  if (angles.size() != n / 2) throw ShapeError("init_skew: need n/2 angles");
  Matrix a(n, n);
  for (std::size_t j = 0; j < n / 2; ++j) {
    const double c = std::cos(angles[j]);
    const double s = std::sqrt((1.0 - c) / (1.0 + c));
    a(2 * j, 2 * j + 1) = s;
    a(2 * j + 1, 2 * j) = -s;
  }
  return a;
}

Matrix init_skew(std::size_t n, std::uint64_t seed) {
  if (n < 2) throw RangeError("init_skew: n must be >= 2");
  Rng rng(seed);
  std::vector<double> angles(n / 2);
  for (double& t : angles) t = rng.uniform(0.0, std::numbers::pi / 2.0);
  return init_skew_from_angles(n, angles);
}

Vector make_scaling(std::size_t n, std::size_t num_neg) {
  if (num_neg > n) {
    throw RangeError("make_scaling: num_neg " + std::to_string(num_neg) + " exceeds n " +
                     std::to_string(n));
  }
  Vector d(n, 1.0);
  for (std::size_t i = 0; i < num_neg; ++i) d[i] = -1.0;
  return d;
}

Matrix cayley_transform(const Matrix& a, const Vector& d) {
  require_skew_input(a, "cayley_transform");
  if (d.size() != a.rows()) throw ShapeError("cayley_transform: D length mismatch");
  return matmul(exact_inverse(identity_plus(a, 1.0)), minus_a_times_d(a, d));
}

SkewOrthogonal make_skew_orthogonal(Matrix a, Vector d, int neumann_order,
                                    std::size_t reset_every) {
  require_skew_input(a, "make_skew_orthogonal");
  if (d.size() != a.rows()) throw ShapeError("make_skew_orthogonal: D length mismatch");
  for (double s : d.values()) {
    if (s != 1.0 && s != -1.0) throw ContractError("make_skew_orthogonal: D entries must be ±1");
  }
  if (neumann_order < 1 || neumann_order > 3) {
    throw RangeError("make_skew_orthogonal: neumann_order must be 1, 2 or 3");
  }
  SkewOrthogonal skew;
  skew.a = std::move(a);
  skew.d = std::move(d);
  skew.neumann_order = neumann_order;
  skew.reset_every = reset_every;
  reset(skew);
  return skew;
}

void refresh_u(SkewOrthogonal& skew) {
  skew.u = matmul(skew.a_tilde, minus_a_times_d(skew.a, skew.d));
}

void reset(SkewOrthogonal& skew) {
  skew.a_tilde = exact_inverse(identity_plus(skew.a, 1.0));
  refresh_u(skew);
  skew.steps_since_reset = 0;
}

Matrix grad_pullback(const SkewOrthogonal& skew, const Matrix& grad_u) {
  const std::size_t n = skew.dim();
  if (grad_u.rows() != n || grad_u.cols() != n) {
    throw ShapeError("grad_pullback: gradient must be " + std::to_string(n) + "x" +
                     std::to_string(n));
  }
  Matrix right = skew.u.transpose();
  for (std::size_t i = 0; i < n; ++i) right(i, i) += skew.d[i];
  const Matrix v = matmul(matmul_tn(skew.a_tilde, grad_u), right);
  Matrix g(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) g(i, j) = v(j, i) - v(i, j);
  return g;
}

NeumannDiagnostics neumann_step(SkewOrthogonal& skew, const Matrix& delta_a) {
  if (delta_a.rows() != skew.dim() || delta_a.cols() != skew.dim()) {
    throw ShapeError("neumann_step: delta_a dimension mismatch");
  }
  if (!all_finite(delta_a)) throw NumericError("neumann_step: non-finite delta_a");
  require_skew_input(delta_a, "neumann_step");

  const Matrix x = matmul(skew.a_tilde, delta_a);
  const double contraction = contraction_of(x);

  // Horner form of I + X + ... + X^p.
  const std::size_t n = skew.dim();
  Matrix series = Matrix::identity(n);
  for (int i = 0; i < skew.neumann_order; ++i) {
    series = matmul(x, series);
    for (std::size_t k = 0; k < n; ++k) series(k, k) += 1.0;
  }
  skew.a_tilde = matmul(series, skew.a_tilde);
  skew.a -= delta_a;
  return finish_step(skew, contraction);
}

NeumannDiagnostics exact_step(SkewOrthogonal& skew, const Matrix& delta_a) {
  if (delta_a.rows() != skew.dim() || delta_a.cols() != skew.dim()) {
    throw ShapeError("exact_step: delta_a dimension mismatch");
  }
  if (!all_finite(delta_a)) throw NumericError("exact_step: non-finite delta_a");
  require_skew_input(delta_a, "exact_step");

  const double contraction = contraction_of(matmul(skew.a_tilde, delta_a));
  skew.a -= delta_a;
  skew.a_tilde = exact_inverse(identity_plus(skew.a, 1.0));
  auto diag = finish_step(skew, contraction);
  // cadence is meaningless when every step is exact
  skew.steps_since_reset = 0;
  return diag;
}

}  // namespace ncgru
