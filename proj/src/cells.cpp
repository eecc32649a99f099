#include "ncgru/cells.hpp"

#include <cmath>
#include <string>

#include "ncgru/errors.hpp"
#include "ncgru/rng.hpp"

namespace ncgru {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double sgn(double x) { return (x > 0.0) - (x < 0.0); }

double modrelu_scalar(double x, double b) {
  const double mag = std::abs(x) + b;
  return mag > 0.0 ? sgn(x) * mag : 0.0;
}

/// d modrelu / dx; 0 on the clipped branch and at the kink.
double modrelu_dx(double x, double b) { return (std::abs(x) + b > 0.0 && x != 0.0) ? 1.0 : 0.0; }

/// d modrelu / db.
double modrelu_db(double x, double b) { return std::abs(x) + b > 0.0 ? sgn(x) : 0.0; }

void add_bias(Matrix& m, const Matrix& b) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double bi = b(i, 0);
    for (double& e : m.row(i)) e += bi;
  }
}

void add_row_sums(Matrix& b, const Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (double e : m.row(i)) s += e;
    b(i, 0) += s;
  }
}

void check_step_shapes(const CellParams& p, const Matrix& x, const Matrix& h_prev) {
  if (x.rows() != p.input()) {
    throw ShapeError("cell forward: input has " + std::to_string(x.rows()) + " rows, expected " +
                     std::to_string(p.input()));
  }
  if (h_prev.rows() != p.hidden()) {
    throw ShapeError("cell forward: hidden state has " + std::to_string(h_prev.rows()) +
                     " rows, expected " + std::to_string(p.hidden()));
  }
  if (x.cols() != h_prev.cols()) throw ShapeError("cell forward: batch width mismatch");
}

/// Shared gate computation: r_t, u_t and the reset-gated state.
void forward_gates(const CellParams& p, StepCache& c) {
  c.pre_r = matmul(p.w_r, c.x) + matmul(p.u_r, c.h_prev);
  add_bias(c.pre_r, p.b_r);
  c.pre_u = matmul(p.w_u, c.x) + matmul(p.u_u, c.h_prev);
  add_bias(c.pre_u, p.b_u);
  c.r = c.pre_r;
  for (double& e : c.r.values()) e = sigmoid(e);
  c.u = c.pre_u;
  for (double& e : c.u.values()) e = sigmoid(e);
}

void blend(StepCache& c) {
  c.h = Matrix(c.u.rows(), c.u.cols());
  auto h = c.h.values();
  auto u = c.u.values();
  auto hp = c.h_prev.values();
  auto cand = c.c.values();
  for (std::size_t k = 0; k < h.size(); ++k) h[k] = (1.0 - u[k]) * hp[k] + u[k] * cand[k];
}

}  // namespace

std::string to_string(Variant v) { return v == Variant::GRU ? "gru" : "ncgru"; }

std::string to_string(const OrthoSet& s) {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ",";
    out += name;
  };
  add(s.u_r, "U_r");
  add(s.u_u, "U_u");
  add(s.u_c, "U_c");
  return out.empty() ? "none" : out;
}

CellParams make_zero_params(Variant variant, std::size_t n, std::size_t m) {
  CellParams p;
  p.variant = variant;
  p.w_r = p.w_u = p.w_c = Matrix(n, m);
  p.u_r = p.u_u = p.u_c = Matrix(n, n);
  p.b_r = p.b_u = p.b_c = p.modrelu_b = Matrix(n, 1);
  return p;
}

CellParams zeros_like(const CellParams& p) {
  CellParams z = make_zero_params(p.variant, p.hidden(), p.input());
  z.ortho = p.ortho;
  return z;
}

CellParams init_params(Variant variant, std::size_t n, std::size_t m, std::uint64_t seed) {
  CellParams p = make_zero_params(variant, n, m);
  Rng rng(seed);
  const double k = 1.0 / std::sqrt(static_cast<double>(n));
  for (Matrix* w : {&p.w_r, &p.w_u, &p.w_c, &p.u_r, &p.u_u, &p.u_c}) {
    for (double& e : w->values()) e = rng.uniform(-k, k);
  }
  if (variant == Variant::NCGRU) {
    for (double& e : p.modrelu_b.values()) e = rng.uniform(-0.01, 0.01);
  }
  return p;
}

void validate_shapes(const CellParams& p) {
  const std::size_t n = p.hidden();
  const std::size_t m = p.input();
  auto expect = [](const Matrix& x, std::size_t r, std::size_t c, const char* name) {
    if (x.rows() != r || x.cols() != c) {
      throw ShapeError(std::string("CellParams: ") + name + " has shape " +
                       std::to_string(x.rows()) + "x" + std::to_string(x.cols()));
    }
  };
  for (auto [w, name] : {std::pair{&p.w_r, "w_r"}, {&p.w_u, "w_u"}, {&p.w_c, "w_c"}})
    expect(*w, n, m, name);
  for (auto [w, name] : {std::pair{&p.u_r, "u_r"}, {&p.u_u, "u_u"}, {&p.u_c, "u_c"}})
    expect(*w, n, n, name);
  expect(p.b_r, n, 1, "b_r");
  expect(p.b_u, n, 1, "b_u");
  if (p.variant == Variant::GRU) expect(p.b_c, n, 1, "b_c");
  else expect(p.modrelu_b, n, 1, "modrelu_b");
}

Vector modrelu(const Vector& x, const Vector& b) {
  if (x.size() != b.size()) throw ShapeError("modrelu: length mismatch");
  Vector y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = modrelu_scalar(x[i], b[i]);
  return y;
}

Matrix modrelu(const Matrix& x, const Matrix& b) {
  if (b.rows() != x.rows() || b.cols() != 1) throw ShapeError("modrelu: bias must be n x 1");
  Matrix y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) y(i, j) = modrelu_scalar(x(i, j), b(i, 0));
  return y;
}

StepCache gru_forward(const CellParams& p, const Matrix& x, const Matrix& h_prev) {
  if (p.variant != Variant::GRU) throw ContractError("gru_forward: params are not a GRU cell");
  check_step_shapes(p, x, h_prev);
  StepCache c;
  c.x = x;
  c.h_prev = h_prev;
  forward_gates(p, c);
  c.pre_c = matmul(p.w_c, x) + matmul(p.u_c, hadamard(c.r, h_prev));
  add_bias(c.pre_c, p.b_c);
  c.c = c.pre_c;
  for (double& e : c.c.values()) e = std::tanh(e);
  blend(c);
  return c;
}

StepCache ncgru_forward(const CellParams& p, const Matrix& x, const Matrix& h_prev) {
  if (p.variant != Variant::NCGRU) throw ContractError("ncgru_forward: params are not an NC-GRU cell");
  check_step_shapes(p, x, h_prev);
  StepCache c;
  c.x = x;
  c.h_prev = h_prev;
  forward_gates(p, c);
  // no additive candidate bias; the modReLU threshold plays that role
  c.pre_c = matmul(p.w_c, x) + matmul(p.u_c, hadamard(c.r, h_prev));
  c.c = modrelu(c.pre_c, p.modrelu_b);
  blend(c);
  return c;
}

StepCache cell_forward(const CellParams& p, const Matrix& x, const Matrix& h_prev) {
  return p.variant == Variant::GRU ? gru_forward(p, x, h_prev) : ncgru_forward(p, x, h_prev);
}

Matrix cell_backward_into(const CellParams& p, const StepCache& cache, const Matrix& grad_h,
                          CellParams& grads) {
  if (grads.variant != p.variant) throw ContractError("cell_backward: gradient/parameter variant mismatch");
  if (grad_h.rows() != cache.h.rows() || grad_h.cols() != cache.h.cols()) {
    throw ShapeError("cell_backward: grad_h shape mismatch");
  }
  const std::size_t n = cache.h.rows();
  const std::size_t batch = cache.h.cols();

  Matrix d_pre_c(n, batch), d_pre_u(n, batch), grad_h_prev(n, batch);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < batch; ++j) {
      const double g = grad_h(i, j);
      const double u = cache.u(i, j);
      const double dc = g * u;
      const double du = g * (cache.c(i, j) - cache.h_prev(i, j));
      grad_h_prev(i, j) = g * (1.0 - u);
      d_pre_u(i, j) = du * u * (1.0 - u);
      if (p.variant == Variant::GRU) {
        const double c = cache.c(i, j);
        d_pre_c(i, j) = dc * (1.0 - c * c);
      } else {
        const double pre = cache.pre_c(i, j);
        const double b = p.modrelu_b(i, 0);
        d_pre_c(i, j) = dc * modrelu_dx(pre, b);
        grads.modrelu_b(i, 0) += dc * modrelu_db(pre, b);
      }
    }
  }

  const Matrix gated = hadamard(cache.r, cache.h_prev);
  grads.w_c += matmul_nt(d_pre_c, cache.x);
  grads.u_c += matmul_nt(d_pre_c, gated);
  if (p.variant == Variant::GRU) add_row_sums(grads.b_c, d_pre_c);

  const Matrix d_gated = matmul_tn(p.u_c, d_pre_c);
  Matrix d_pre_r(n, batch);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < batch; ++j) {
      const double r = cache.r(i, j);
      d_pre_r(i, j) = d_gated(i, j) * cache.h_prev(i, j) * r * (1.0 - r);
      grad_h_prev(i, j) += d_gated(i, j) * r;
    }
  }

  grads.w_u += matmul_nt(d_pre_u, cache.x);
  grads.u_u += matmul_nt(d_pre_u, cache.h_prev);
  add_row_sums(grads.b_u, d_pre_u);
  grads.w_r += matmul_nt(d_pre_r, cache.x);
  grads.u_r += matmul_nt(d_pre_r, cache.h_prev);
  add_row_sums(grads.b_r, d_pre_r);

  grad_h_prev += matmul_tn(p.u_u, d_pre_u);
  grad_h_prev += matmul_tn(p.u_r, d_pre_r);
  return grad_h_prev;
}

CellBackward cell_backward(const CellParams& p, const StepCache& cache, const Matrix& grad_h) {
  CellBackward out{zeros_like(p), {}};
  out.grad_h_prev = cell_backward_into(p, cache, grad_h, out.grads);
  return out;
}

std::vector<StepCache> sequence_forward(const CellParams& p, const std::vector<Matrix>& inputs) {
  if (inputs.empty()) throw ContractError("sequence_forward: empty sequence");
  std::vector<StepCache> caches;
  caches.reserve(inputs.size());
  Matrix h(p.hidden(), inputs.front().cols());
  for (const Matrix& x : inputs) {
    caches.push_back(cell_forward(p, x, h));
    h = caches.back().h;
  }
  return caches;
}

BpttResult sequence_bptt(const CellParams& p, const std::vector<Matrix>& inputs,
                         const LossHead& head) {
  if (inputs.empty()) throw ContractError("sequence_bptt: empty sequence");
  validate_shapes(p);
  const std::size_t steps = inputs.size();
  const std::size_t batch = inputs.front().cols();

  std::vector<StepCache> caches;
  caches.reserve(steps);
  std::vector<std::optional<Matrix>> step_grads(steps);
  BpttResult result;
  Matrix h(p.hidden(), batch);
  for (std::size_t t = 0; t < steps; ++t) {
    caches.push_back(cell_forward(p, inputs[t], h));
    h = caches.back().h;
    if (auto sl = head(t, h)) {
      result.loss += sl->loss;
      step_grads[t] = std::move(sl->grad_h);
    }
  }
  if (!std::isfinite(result.loss)) throw NumericError("sequence_bptt: non-finite loss");

  result.grads = zeros_like(p);
  Matrix carry(p.hidden(), batch);
  for (std::size_t t = steps; t-- > 0;) {
    if (step_grads[t]) carry += *step_grads[t];
    carry = cell_backward_into(p, caches[t], carry, result.grads);
  }
  result.final_h = std::move(h);
  return result;
}

JacobianResult jacobian_h(const CellParams& p, const StepCache& cache, std::size_t lane) {
  const std::size_t n = p.hidden();
  if (lane >= cache.h.cols()) throw ShapeError("jacobian_h: lane out of range");
  JacobianResult out;

  // ∂c/∂h_{t−1} = diag(Φ') U_c (diag(h_{t−1}) ∂r/∂h_{t−1} + diag(r))
  // with ∂r/∂h_{t−1} = diag(r(1−r)) U_r.
  Matrix inner(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = cache.r(i, lane);
    const double scale = cache.h_prev(i, lane) * r * (1.0 - r);
    for (std::size_t j = 0; j < n; ++j) inner(i, j) = scale * p.u_r(i, j);
    inner(i, i) += r;
  }
  Matrix dc = matmul(p.u_c, inner);
  for (std::size_t i = 0; i < n; ++i) {
    double phi_prime;
    if (p.variant == Variant::GRU) {
      const double c = cache.c(i, lane);
      phi_prime = 1.0 - c * c;
    } else {
      const double pre = cache.pre_c(i, lane);
      const double b = p.modrelu_b(i, 0);
      if (std::abs(std::abs(pre) + b) < 1e-6 || std::abs(pre) < 1e-6) out.near_kink = true;
      phi_prime = modrelu_dx(pre, b);
    }
    for (double& e : dc.row(i)) e *= phi_prime;
  }

  out.jac = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = cache.u(i, lane);
    const double du_scale = (cache.c(i, lane) - cache.h_prev(i, lane)) * u * (1.0 - u);
    for (std::size_t j = 0; j < n; ++j) {
      out.jac(i, j) = du_scale * p.u_u(i, j) + u * dc(i, j);
    }
    out.jac(i, i) += 1.0 - u;
  }
  return out;
}

}  // namespace ncgru
