#include "ncgru/optim.hpp"

#include <cmath>

#include "ncgru/errors.hpp"

namespace ncgru {

std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::SGD: return "sgd";
    case OptimizerKind::RMSProp: return "rmsprop";
    case OptimizerKind::Adam: return "adam";
  }
  return "?";
}

OptimizerKind optimizer_kind_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::SGD;
  if (s == "rmsprop") return OptimizerKind::RMSProp;
  if (s == "adam") return OptimizerKind::Adam;
  throw ConfigError("unknown optimizer kind '" + s + "'");
}

OptimizerState make_optimizer_state(const OptimizerConfig& config, std::size_t size) {
  OptimizerState s;
  s.config = config;
  if (config.kind != OptimizerKind::SGD) s.second_moment.assign(size, 0.0);
  if (config.kind == OptimizerKind::Adam) s.first_moment.assign(size, 0.0);
  return s;
}

std::vector<double> step(OptimizerState& state, std::span<const double> grad) {
  if (!all_finite(grad)) throw NumericError("optimizer step: non-finite gradient");
  const auto& cfg = state.config;
  const std::size_t n = grad.size();
  std::vector<double> update(n);

  switch (cfg.kind) {
    case OptimizerKind::SGD:
      for (std::size_t i = 0; i < n; ++i) update[i] = cfg.learning_rate * grad[i];
      break;
    case OptimizerKind::RMSProp: {
      if (state.second_moment.size() != n) throw ShapeError("optimizer step: state size mismatch");
      for (std::size_t i = 0; i < n; ++i) {
        double& v = state.second_moment[i];
        v = cfg.decay * v + (1.0 - cfg.decay) * grad[i] * grad[i];
        update[i] = cfg.learning_rate * grad[i] / (std::sqrt(v) + cfg.epsilon);
      }
      break;
    }
    case OptimizerKind::Adam: {
      if (state.second_moment.size() != n || state.first_moment.size() != n) {
        throw ShapeError("optimizer step: state size mismatch");
      }
      const double t = static_cast<double>(state.step_count + 1);
      const double c1 = 1.0 - std::pow(cfg.beta1, t);
      const double c2 = 1.0 - std::pow(cfg.beta2, t);
      for (std::size_t i = 0; i < n; ++i) {
        double& m = state.first_moment[i];
        double& v = state.second_moment[i];
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad[i];
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad[i] * grad[i];
        update[i] = cfg.learning_rate * (m / c1) / (std::sqrt(v / c2) + cfg.epsilon);
      }
      break;
    }
  }
  ++state.step_count;
  return update;
}

Matrix step(OptimizerState& state, const Matrix& grad) {
  return Matrix(grad.rows(), grad.cols(), step(state, grad.values()));
}

}  // namespace ncgru
