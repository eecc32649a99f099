#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ncgru/linalg.hpp"

namespace ncgru {

enum class OptimizerKind { SGD, RMSProp, Adam };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_kind_from_string(const std::string& s);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double decay = 0.9;  // RMSProp
};

/// Per-parameter optimizer state.
///
/// Every rule here is elementwise with an even denominator, so an exactly
/// skew gradient stream yields an exactly skew update.
struct OptimizerState {
  OptimizerConfig config;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::size_t step_count = 0;
};

OptimizerState make_optimizer_state(const OptimizerConfig& config, std::size_t size);

/// Returns the update to subtract from the parameter. Non-finite gradients
/// throw NumericError before any state is touched.
std::vector<double> step(OptimizerState& state, std::span<const double> grad);
Matrix step(OptimizerState& state, const Matrix& grad);

}  // namespace ncgru
