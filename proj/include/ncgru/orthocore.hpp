#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "ncgru/linalg.hpp"

namespace ncgru {

/// Orthogonal weight U = (I + A)⁻¹ (I − A) D kept through a skew-symmetric A.
///
/// `a_tilde` caches an approximation of (I + A)⁻¹ that is advanced by a
/// truncated Neumann series on every update and recomputed exactly every
/// `reset_every` updates.
struct SkewOrthogonal {
  Matrix a;
  Vector d;
  Matrix a_tilde;
  Matrix u;
  int neumann_order = 2;
  std::size_t reset_every = 50;  // 0 disables periodic resets
  std::size_t steps_since_reset = 0;
  std::size_t steps = 0;

  std::size_t dim() const { return a.rows(); }
};

struct NeumannDiagnostics {
  double contraction_norm = 0.0;  // ‖Ã_prev · δA‖₂
  double drift = 0.0;             // ‖UᵀU − I‖_F after the update
  std::size_t step = 0;
  bool reset_applied = false;
  /// contraction_norm >= 1: the series assumption failed, update applied anyway.
  bool contraction_warning = false;
};

/// Block-diagonal skew A with 2x2 blocks [[0, s], [−s, 0]],
/// s = sqrt((1 − cos t)/(1 + cos t)), t ~ U[0, π/2]. Odd n gets a trailing zero.
Matrix init_skew(std::size_t n, std::uint64_t seed);

/// Same construction with the block angles given explicitly (n/2 of them).
Matrix init_skew_from_angles(std::size_t n, std::span<const double> angles);

/// Diagonal of ±1: the first `num_neg` entries are −1.
Vector make_scaling(std::size_t n, std::size_t num_neg);

/// U = (I + A)⁻¹ (I − A) D with an exact inverse.
Matrix cayley_transform(const Matrix& a, const Vector& d);

/// Builds the full state from A and D with an exact inverse.
SkewOrthogonal make_skew_orthogonal(Matrix a, Vector d, int neumann_order = 2,
                                    std::size_t reset_every = 50);

/// ∇_A L = Vᵀ − V with V = Ãᵀ ∇_U L (D + Uᵀ), using the cached Ã.
Matrix grad_pullback(const SkewOrthogonal& skew, const Matrix& grad_u);

/// One update A ← A − δA with the cached inverse advanced by the truncated
/// Neumann series Ã ← (Σ_{i≤p} (ÃδA)^i) Ã. Resets exactly when the cadence
/// is reached.
NeumannDiagnostics neumann_step(SkewOrthogonal& skew, const Matrix& delta_a);

/// Same update but Ã is recomputed exactly every step (inverse ablation arm).
NeumannDiagnostics exact_step(SkewOrthogonal& skew, const Matrix& delta_a);

/// Ã = (I + A)⁻¹ exactly, U recomputed, counter cleared.
void reset(SkewOrthogonal& skew);

/// Recomputes U from the current A, Ã, D.
void refresh_u(SkewOrthogonal& skew);

}  // namespace ncgru
