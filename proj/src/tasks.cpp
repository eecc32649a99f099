#include "ncgru/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "ncgru/errors.hpp"
#include "ncgru/rng.hpp"

namespace ncgru {

namespace {

TaskBatch make_symbol_batch(std::string task, std::size_t T, std::uint64_t seed,
                            std::size_t steps, std::size_t count, std::size_t input_dim,
                            std::size_t num_classes) {
  TaskBatch b;
  b.task = std::move(task);
  b.T = T;
  b.seed = seed;
  b.loss_kind = LossKind::CrossEntropy;
  b.input_dim = input_dim;
  b.num_classes = num_classes;
  b.batch = count;
  b.inputs.assign(steps, Matrix(input_dim, count));
  b.target_class.assign(steps, std::vector<int>(count, TaskBatch::kNoTarget));
  return b;
}

/// k distinct sorted positions from [0, n) (partial Fisher-Yates).
std::vector<std::size_t> sample_positions(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(pool[i], pool[i + rng.below(n - i)]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

int TaskBatch::symbol_at(std::size_t step, std::size_t lane) const {
  const Matrix& x = inputs.at(step);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (x(i, lane) == 1.0) return static_cast<int>(i);
  }
  return kNoTarget;
}

TaskBatch gen_adding(std::size_t T, std::size_t count, std::uint64_t seed) {
  if (T < 2) throw RangeError("gen_adding: T must be >= 2");
  Rng rng(seed);
  TaskBatch b;
  b.task = "adding";
  b.T = T;
  b.seed = seed;
  b.loss_kind = LossKind::MSE;
  b.input_dim = 2;
  b.batch = count;
  b.inputs.assign(T, Matrix(2, count));
  b.target_value.assign(count, 0.0);
  const std::size_t half = T / 2;
  for (std::size_t lane = 0; lane < count; ++lane) {
    for (std::size_t t = 0; t < T; ++t) b.inputs[t](1, lane) = rng.uniform();
    const std::size_t first = rng.below(half);
    const std::size_t second = half + rng.below(T - half);
    b.inputs[first](0, lane) = 1.0;
    b.inputs[second](0, lane) = 1.0;
    b.target_value[lane] = b.inputs[first](1, lane) + b.inputs[second](1, lane);
  }
  return b;
}

TaskBatch gen_copying(std::size_t T, std::size_t count, std::uint64_t seed) {
  if (T < 1) throw RangeError("gen_copying: T must be >= 1");
  constexpr std::size_t kDigits = 10;
  const std::size_t steps = T + 20;
  Rng rng(seed);
  TaskBatch b = make_symbol_batch("copying", T, seed, steps, count, 10, 10);
  for (std::size_t lane = 0; lane < count; ++lane) {
    std::vector<int> seq(steps, 0);
    for (std::size_t i = 0; i < kDigits; ++i) seq[i] = 1 + static_cast<int>(rng.below(8));
    seq[kDigits + T] = 9;
    for (std::size_t t = 0; t < steps; ++t) {
      b.inputs[t](seq[t], lane) = 1.0;
      b.target_class[t][lane] = t + kDigits >= steps ? seq[t + kDigits - steps] : 0;
    }
  }
  return b;
}

std::vector<int> unmatched_counts(const std::vector<int>& symbols, std::size_t n_pairs, int cap) {
  const int noise = static_cast<int>(2 * n_pairs);
  std::vector<int> open(n_pairs, 0);
  std::vector<int> counts;
  counts.reserve(symbols.size());
  int total = 0;
  for (int s : symbols) {
    if (s < 0 || s > noise) throw RangeError("unmatched_counts: symbol out of range");
    if (s != noise) {
      const std::size_t type = static_cast<std::size_t>(s) / 2;
      if (s % 2 == 0) {
        ++open[type];
        ++total;
      } else if (open[type] > 0) {
        --open[type];
        --total;
      }
    }
    counts.push_back(std::min(total, cap));
  }
  return counts;
}

TaskBatch gen_parenthesis(std::size_t T, std::size_t count, std::uint64_t seed,
                          const ParenthesisOptions& opts) {
  if (T < 1) throw RangeError("gen_parenthesis: T must be >= 1");
  if (opts.n_pairs < 1 || opts.n_pairs > 10) throw RangeError("gen_parenthesis: n_pairs must be in [1, 10]");
  const std::size_t noise = 2 * opts.n_pairs;
  const std::size_t pairs = std::min(opts.n_pairs, T / 2);
  Rng rng(seed);
  TaskBatch b = make_symbol_batch("parenthesis", T, seed, T, count, noise + 1, kParenthesisClasses);
  for (std::size_t lane = 0; lane < count; ++lane) {
    // Each pair id appears twice in a shuffled event list; its first
    // appearance opens and the second closes.
    std::vector<std::size_t> events(2 * pairs);
    for (std::size_t i = 0; i < events.size(); ++i) events[i] = i / 2;
    for (std::size_t i = events.size(); i > 1; --i) std::swap(events[i - 1], events[rng.below(i)]);
    std::vector<std::size_t> type(pairs);
    for (auto& t : type) t = rng.below(opts.n_pairs);
    const auto positions = sample_positions(rng, T, events.size());

    std::vector<int> seq(T, static_cast<int>(noise));
    std::vector<bool> opened(pairs, false);
    for (std::size_t e = 0; e < events.size(); ++e) {
      const std::size_t id = events[e];
      seq[positions[e]] = static_cast<int>(2 * type[id] + (opened[id] ? 1 : 0));
      opened[id] = true;
    }
    const auto counts = unmatched_counts(seq, opts.n_pairs);
    for (std::size_t t = 0; t < T; ++t) {
      b.inputs[t](seq[t], lane) = 1.0;
      if (!opts.final_step_only || t + 1 == T) b.target_class[t][lane] = counts[t];
    }
  }
  return b;
}

TaskBatch gen_denoise(std::size_t T, std::size_t count, std::uint64_t seed, std::size_t alphabet_n) {
  constexpr std::size_t kData = 10;
  if (T < kData + 1) throw RangeError("gen_denoise: T must be >= 11");
  if (alphabet_n < 2) throw RangeError("gen_denoise: alphabet_n must be >= 2");
  const int noise = static_cast<int>(alphabet_n);
  const int marker = noise + 1;
  const int blank = static_cast<int>(alphabet_n);
  const std::size_t steps = T + kData;
  Rng rng(seed);
  TaskBatch b = make_symbol_batch("denoise", T, seed, steps, count, alphabet_n + 2, alphabet_n + 1);
  for (std::size_t lane = 0; lane < count; ++lane) {
    std::vector<int> seq(steps, noise);
    const auto positions = sample_positions(rng, T, kData);
    std::vector<int> data(kData);
    for (std::size_t i = 0; i < kData; ++i) {
      data[i] = static_cast<int>(rng.below(alphabet_n));
      seq[positions[i]] = data[i];
    }
    seq[T] = marker;
    for (std::size_t t = 0; t < steps; ++t) {
      b.inputs[t](seq[t], lane) = 1.0;
      b.target_class[t][lane] = t < T ? blank : data[t - T];
    }
  }
  return b;
}

TaskBatch generate_task(const std::string& name, std::size_t T, std::size_t count,
                        std::uint64_t seed, std::size_t alphabet_n,
                        const ParenthesisOptions& paren) {
  if (name == "adding") return gen_adding(T, count, seed);
  if (name == "copying") return gen_copying(T, count, seed);
  if (name == "parenthesis") return gen_parenthesis(T, count, seed, paren);
  if (name == "denoise") return gen_denoise(T, count, seed, alphabet_n);
  throw ConfigError("unknown task '" + name + "'");
}

double copying_baseline(std::size_t T) {
  return 10.0 * std::log(8.0) / static_cast<double>(T + 20);
}

double memoryless_copying_loss(const TaskBatch& batch) {
  if (batch.task != "copying") throw ContractError("memoryless_copying_loss: not a copying batch");
  double total = 0.0;
  std::size_t terms = 0;
  for (std::size_t lane = 0; lane < batch.batch; ++lane) {
    bool seen_marker = false;
    for (std::size_t t = 0; t < batch.steps(); ++t) {
      seen_marker = seen_marker || batch.symbol_at(t, lane) == 9;
      const int target = batch.target_class[t][lane];
      double p;
      if (!seen_marker) p = target == 0 ? 1.0 : 0.0;
      else p = (target >= 1 && target <= 8) ? 1.0 / 8.0 : 0.0;
      total += -std::log(p);
      ++terms;
    }
  }
  return total / static_cast<double>(terms);
}

double constant_predictor_mse(const TaskBatch& batch, double prediction) {
  if (batch.loss_kind != LossKind::MSE) throw ContractError("constant_predictor_mse: not a regression batch");
  double s = 0.0;
  for (double y : batch.target_value) s += (y - prediction) * (y - prediction);
  return s / static_cast<double>(batch.target_value.size());
}

void write_jsonl(const TaskBatch& batch, std::ostream& out) {
  for (std::size_t lane = 0; lane < batch.batch; ++lane) {
    nlohmann::json input = nlohmann::json::array();
    for (const Matrix& x : batch.inputs) {
      std::vector<double> col(x.rows());
      for (std::size_t i = 0; i < x.rows(); ++i) col[i] = x(i, lane);
      input.push_back(col);
    }
    nlohmann::json target = nlohmann::json::array();
    if (batch.loss_kind == LossKind::MSE) {
      target.push_back(std::vector<double>{batch.target_value[lane]});
    } else {
      for (const auto& step : batch.target_class) {
        std::vector<double> one_hot(batch.num_classes, 0.0);
        if (step[lane] != TaskBatch::kNoTarget) one_hot[step[lane]] = 1.0;
        target.push_back(one_hot);
      }
    }
    nlohmann::json row = {{"task", batch.task}, {"T", batch.T}, {"seed", batch.seed},
                          {"input", std::move(input)}, {"target", std::move(target)}};
    out << row.dump() << '\n';
  }
}

}  // namespace ncgru
