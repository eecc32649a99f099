#include "ncgru/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ncgru/errors.hpp"
#include "ncgru/rng.hpp"

namespace ncgru {

namespace {

double norm2(const Matrix& m) { return spectral_norm(m); }

struct LaneStats {
  double max = -std::numeric_limits<double>::infinity();
  double max_abs = 0.0;
};

LaneStats lane_stats(const Matrix& m, std::size_t lane) {
  LaneStats s;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    s.max = std::max(s.max, m(i, lane));
    s.max_abs = std::max(s.max_abs, std::abs(m(i, lane)));
  }
  return s;
}

double gate_distance(double g) { return std::min(g, 1.0 - g); }

}  // namespace

BoundReport compute_bound(const StepCache& cache, const CellParams& p, std::size_t lane) {
  BoundReport rep;
  const std::size_t n = p.hidden();
  double max_u = 0.0, max_one_minus_u = 0.0, max_r = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = cache.u(i, lane);
    const double r = cache.r(i, lane);
    rep.delta_u = std::max(rep.delta_u, u * (1.0 - u));
    rep.delta_r = std::max(rep.delta_r, r * (1.0 - r));
    max_u = std::max(max_u, u);
    max_r = std::max(max_r, r);
    max_one_minus_u = std::max(max_one_minus_u, 1.0 - u);
    rep.gate_saturation = std::max({rep.gate_saturation, gate_distance(u), gate_distance(r)});
  }
  const LaneStats h = lane_stats(cache.h_prev, lane);
  const LaneStats c = lane_stats(cache.c, lane);

  rep.u_c_norm = norm2(p.u_c);
  rep.u_r_norm = norm2(p.u_r);
  rep.u_u_norm = norm2(p.u_u);

  auto evaluate = [&](double h_max, double c_max, double& alpha, double& beta) {
    alpha = rep.delta_u * (h_max + c_max) * rep.u_u_norm + max_one_minus_u;
    beta = max_u * (rep.delta_r * rep.u_r_norm * h_max + max_r);
    return alpha + beta * rep.u_c_norm;
  };
  rep.bound = evaluate(h.max_abs, c.max_abs, rep.alpha, rep.beta);
  double alpha_s = 0.0, beta_s = 0.0;
  rep.bound_signed = evaluate(h.max, c.max, alpha_s, beta_s);

  const JacobianResult jac = jacobian_h(p, cache, lane);
  rep.near_kink = jac.near_kink;
  rep.measured = norm2(jac.jac);
  rep.slack = rep.bound - rep.measured;
  return rep;
}

std::string to_string(SaturationRegime r) {
  switch (r) {
    case SaturationRegime::Mixed: return "mixed";
    case SaturationRegime::UpdateClosed: return "update-closed";
    case SaturationRegime::UpdateOpenResetClosed: return "update-open-reset-closed";
    case SaturationRegime::UpdateOpenResetOpen: return "update-open-reset-open";
  }
  return "?";
}

SaturationRegime saturation_regime_from_string(const std::string& s) {
  for (auto r : {SaturationRegime::Mixed, SaturationRegime::UpdateClosed,
                 SaturationRegime::UpdateOpenResetClosed, SaturationRegime::UpdateOpenResetOpen}) {
    if (to_string(r) == s) return r;
  }
  throw ContractError("unknown saturation regime '" + s + "'");
}

SweepSummary saturation_sweep(const CellParams& p, const SweepOptions& opts) {
  if (opts.samples == 0) throw ContractError("saturation_sweep: samples must be positive");
  if (opts.forcing < 0.0) throw ContractError("saturation_sweep: forcing must be nonnegative");
  validate_shapes(p);
  const std::size_t n = p.hidden();
  const std::size_t m = p.input();

  // Per-row forcing magnitude for the r and u gates.
  auto row_forcing = [&](const Matrix& w, const Matrix& u, std::size_t i) {
    if (opts.forcing > 0.0) return opts.forcing;
    double s = 8.0;
    for (double e : w.row(i)) s += std::abs(e);
    for (double e : u.row(i)) s += std::abs(e);
    return s;
  };

  Rng rng(opts.seed);
  SweepSummary sum;
  sum.min_slack = std::numeric_limits<double>::infinity();
  CellParams forced = p;
  for (std::size_t s = 0; s < opts.samples; ++s) {
    Matrix x(m, 1), h(n, 1);
    for (double& e : x.values()) e = rng.uniform(-1.0, 1.0);
    for (double& e : h.values()) e = rng.uniform(-1.0, 1.0);

    const bool r_whole_open = rng.uniform() < 0.5;
    for (std::size_t i = 0; i < n; ++i) {
      double u_sign = 1.0, r_sign = 1.0;
      switch (opts.regime) {
        case SaturationRegime::Mixed:
          u_sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
          r_sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
          break;
        case SaturationRegime::UpdateClosed:
          u_sign = -1.0;
          r_sign = r_whole_open ? 1.0 : -1.0;
          break;
        case SaturationRegime::UpdateOpenResetClosed:
          r_sign = -1.0;
          break;
        case SaturationRegime::UpdateOpenResetOpen:
          break;
      }
      forced.b_u(i, 0) = u_sign * row_forcing(p.w_u, p.u_u, i);
      forced.b_r(i, 0) = r_sign * row_forcing(p.w_r, p.u_r, i);
    }

    const StepCache cache = cell_forward(forced, x, h);
    const BoundReport rep = compute_bound(cache, forced, 0);
    if (rep.gate_saturation > opts.saturation_tol) {
      throw ContractError("saturation_sweep: regime " + to_string(opts.regime) +
                          " not realizable, gate distance " + std::to_string(rep.gate_saturation));
    }
    ++sum.samples;
    sum.max_alpha_plus_beta = std::max(sum.max_alpha_plus_beta, rep.alpha + rep.beta);
    sum.max_alpha = std::max(sum.max_alpha, rep.alpha);
    sum.max_beta = std::max(sum.max_beta, rep.beta);
    sum.max_delta_u = std::max(sum.max_delta_u, rep.delta_u);
    sum.max_delta_r = std::max(sum.max_delta_r, rep.delta_r);
    sum.max_measured = std::max(sum.max_measured, rep.measured);
    sum.max_bound = std::max(sum.max_bound, rep.bound);
    sum.min_slack = std::min(sum.min_slack, rep.slack);
    sum.max_saturation = std::max(sum.max_saturation, rep.gate_saturation);
  }
  return sum;
}

}  // namespace ncgru
