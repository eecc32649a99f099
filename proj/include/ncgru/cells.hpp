#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ncgru/linalg.hpp"

namespace ncgru {

enum class Variant { GRU, NCGRU };

/// Which recurrent weights are driven by the Neumann-Cayley update.
struct OrthoSet {
  bool u_r = false;
  bool u_u = false;
  bool u_c = false;

  bool empty() const { return !(u_r || u_u || u_c); }
  bool operator==(const OrthoSet&) const = default;
};

std::string to_string(Variant v);
std::string to_string(const OrthoSet& s);

/// All weights of one GRU / NC-GRU cell. The same layout stores gradients.
///
/// Biases are n x 1 matrices so that every parameter shares one type.
/// `b_c` is used only by GRU, `modrelu_b` only by NC-GRU.
struct CellParams {
  Variant variant = Variant::GRU;
  OrthoSet ortho;
  Matrix w_r, w_u, w_c;  // n x m
  Matrix u_r, u_u, u_c;  // n x n
  Matrix b_r, b_u, b_c;  // n x 1
  Matrix modrelu_b;      // n x 1

  std::size_t hidden() const { return u_r.rows(); }
  std::size_t input() const { return w_r.cols(); }

  /// Visits every parameter as (name, matrix).
  template <typename F>
  void for_each(F&& f) {
    f("w_r", w_r); f("w_u", w_u); f("w_c", w_c);
    f("u_r", u_r); f("u_u", u_u); f("u_c", u_c);
    f("b_r", b_r); f("b_u", b_u);
    if (variant == Variant::GRU) f("b_c", b_c);
    else f("modrelu_b", modrelu_b);
  }
  template <typename F>
  void for_each(F&& f) const {
    f("w_r", w_r); f("w_u", w_u); f("w_c", w_c);
    f("u_r", u_r); f("u_u", u_u); f("u_c", u_c);
    f("b_r", b_r); f("b_u", b_u);
    if (variant == Variant::GRU) f("b_c", b_c);
    else f("modrelu_b", modrelu_b);
  }
};

/// Zero-filled parameters with the given shapes.
CellParams make_zero_params(Variant variant, std::size_t n, std::size_t m);
CellParams zeros_like(const CellParams& p);
/// Uniform(−1/√n, 1/√n) weights, zero gate biases; modReLU bias U(−0.01, 0.01).
CellParams init_params(Variant variant, std::size_t n, std::size_t m, std::uint64_t seed);
void validate_shapes(const CellParams& p);

/// Forward activations for one step; columns are batch lanes.
struct StepCache {
  Matrix x, h_prev;
  Matrix pre_r, pre_u, pre_c;
  Matrix r, u, c, h;
};

Vector modrelu(const Vector& x, const Vector& b);
/// Column-broadcast modReLU: b is n x 1, x is n x B.
Matrix modrelu(const Matrix& x, const Matrix& b);

StepCache gru_forward(const CellParams& p, const Matrix& x, const Matrix& h_prev);
StepCache ncgru_forward(const CellParams& p, const Matrix& x, const Matrix& h_prev);
/// Dispatches on p.variant.
StepCache cell_forward(const CellParams& p, const Matrix& x, const Matrix& h_prev);

struct CellBackward {
  CellParams grads;
  Matrix grad_h_prev;
};

/// Gradients of a scalar loss given dL/dh_t. modReLU subgradient at the kink is 0.
CellBackward cell_backward(const CellParams& p, const StepCache& cache, const Matrix& grad_h);

/// Accumulating form used by BPTT: adds into `grads`, returns dL/dh_{t-1}.
Matrix cell_backward_into(const CellParams& p, const StepCache& cache, const Matrix& grad_h,
                          CellParams& grads);

/// Loss contribution at one step, and dL/dh_t for it.
struct StepLoss {
  double loss = 0.0;
  Matrix grad_h;
};

/// Called after every forward step with (t, h_t). Returning nullopt means the
/// step carries no loss, which is how final-step-only losses are expressed.
using LossHead = std::function<std::optional<StepLoss>(std::size_t t, const Matrix& h)>;

struct BpttResult {
  double loss = 0.0;
  /// Includes the raw ∇_U for every recurrent weight; the orthogonal ones
  /// are handed to grad_pullback by the caller.
  CellParams grads;
  Matrix final_h;
};

/// Full unrolled forward + backward from h_0 = 0.
BpttResult sequence_bptt(const CellParams& p, const std::vector<Matrix>& inputs,
                         const LossHead& head);

/// Forward only; returns every step's cache.
std::vector<StepCache> sequence_forward(const CellParams& p, const std::vector<Matrix>& inputs);

struct JacobianResult {
  Matrix jac;              // ∂h_t/∂h_{t−1}, n x n
  bool near_kink = false;  // NC-GRU candidate pre-activation within 1e-6 of the modReLU kink
};

/// Analytic ∂h_t/∂h_{t−1} for batch lane `lane` of the cache.
JacobianResult jacobian_h(const CellParams& p, const StepCache& cache, std::size_t lane = 0);

}  // namespace ncgru
