#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "ncgru/cells.hpp"

namespace ncgru {

/// Gradient-norm bound ‖∂h_t/∂h_{t−1}‖₂ ≤ α + β‖U_c‖₂ for one state.
///
/// α and β take max_i |[h_{t−1}]_i| and max_i |[c_t]_i|, i.e. the spectral
/// norms of the diagonal factors, so the bound is a valid inequality for any
/// sign pattern. `bound_signed` evaluates the same formula with signed maxima;
/// it agrees with `bound` whenever h_{t−1} and c_t have a nonnegative maximum
/// entry equal to their largest magnitude.
struct BoundReport {
  double delta_u = 0.0;
  double delta_r = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double u_c_norm = 0.0;
  double u_r_norm = 0.0;
  double u_u_norm = 0.0;
  double bound = 0.0;
  double bound_signed = 0.0;
  double measured = 0.0;
  double slack = 0.0;
  double gate_saturation = 0.0;  // max over r_t, u_t entries of distance to {0, 1}
  bool near_kink = false;
};

BoundReport compute_bound(const StepCache& cache, const CellParams& p, std::size_t lane = 0);

/// Gate-forcing regimes.
enum class SaturationRegime {
  Mixed,                  // each entry of u_t, r_t near 0 or 1, independently
  UpdateClosed,           // u_t ≈ 0-vector, r_t a whole 0- or 1-vector
  UpdateOpenResetClosed,  // u_t ≈ 1-vector, r_t ≈ 0-vector
  UpdateOpenResetOpen,    // u_t ≈ 1-vector, r_t ≈ 1-vector
};

std::string to_string(SaturationRegime r);
SaturationRegime saturation_regime_from_string(const std::string& s);

struct SweepOptions {
  SaturationRegime regime = SaturationRegime::Mixed;
  std::size_t samples = 100;
  std::uint64_t seed = 0;
  /// Gate bias magnitude. 0 picks, per row, 8 plus the largest possible
  /// |W x + U h| for x, h in [−1, 1], which guarantees |pre-activation| ≥ 8.
  double forcing = 0.0;
  /// Largest admissible distance of a forced gate entry from its target.
  double saturation_tol = 1e-3;
};

struct SweepSummary {
  std::size_t samples = 0;
  double max_alpha_plus_beta = 0.0;
  double max_alpha = 0.0;
  double max_beta = 0.0;
  double max_delta_u = 0.0;
  double max_delta_r = 0.0;
  double max_measured = 0.0;
  double max_bound = 0.0;
  double min_slack = 0.0;
  double max_saturation = 0.0;
};

/// Samples x, h_{t−1} uniformly in [−1, 1], forces the gates into the regime
/// through b_u and b_r, and summarizes the bound reports. Throws
/// ContractError when the forcing cannot reach the saturation tolerance.
SweepSummary saturation_sweep(const CellParams& p, const SweepOptions& opts);

}  // namespace ncgru
