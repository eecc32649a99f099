#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ncgru/linalg.hpp"

namespace ncgru {

enum class LossKind { MSE, CrossEntropy };

/// A batch of sequences for one synthetic task.
///
/// inputs[t] is input_dim x batch (one-hot columns for symbol tasks).
/// Classification tasks store target class indices per step and lane;
/// a step with target `kNoTarget` carries no loss. Regression tasks store
/// one scalar per lane, scored on the final step.
struct TaskBatch {
  static constexpr int kNoTarget = -1;

  std::string task;
  std::size_t T = 0;
  std::uint64_t seed = 0;
  LossKind loss_kind = LossKind::CrossEntropy;
  std::size_t input_dim = 0;
  std::size_t num_classes = 0;  // 0 for regression
  std::size_t batch = 0;

  std::vector<Matrix> inputs;
  std::vector<std::vector<int>> target_class;  // [step][lane]
  std::vector<double> target_value;            // [lane]

  std::size_t steps() const { return inputs.size(); }
  /// argmax of a one-hot input column.
  int symbol_at(std::size_t step, std::size_t lane) const;
};

/// Two-dimensional adding problem: marker channel with one 1 in each half,
/// value channel U[0, 1); target is the sum of the two marked values.
TaskBatch gen_adding(std::size_t T, std::size_t count, std::uint64_t seed);

/// Copying: 10 digits from {1..8}, T zeros, the marker 9, 9 zeros (T + 20 steps).
/// Targets are 0 except the final 10 steps, which replay the digits.
TaskBatch gen_copying(std::size_t T, std::size_t count, std::uint64_t seed);

struct ParenthesisOptions {
  std::size_t n_pairs = 10;
  bool final_step_only = false;
};

/// Parenthesis counting over 2·n_pairs bracket symbols (2k opens type k,
/// 2k+1 closes it) plus a noise symbol 2·n_pairs. Each stream holds n_pairs
/// bracket pairs, types uniform, at uniformly random positions in a random
/// valid interleaving. Target at each step: total unmatched opens, capped at 10
/// (11 classes).
TaskBatch gen_parenthesis(std::size_t T, std::size_t count, std::uint64_t seed,
                          const ParenthesisOptions& opts = {});

inline constexpr std::size_t kParenthesisClasses = 11;
inline constexpr int kParenthesisCap = 10;

/// Denoise: symbols 0..n−1 are data, n is noise, n+1 the marker. T noisy
/// steps holding 10 data symbols, then the marker, then 9 noise steps.
/// Targets: blank (class n) before the marker, then the 10 data symbols.
TaskBatch gen_denoise(std::size_t T, std::size_t count, std::uint64_t seed,
                      std::size_t alphabet_n = 10);

TaskBatch generate_task(const std::string& name, std::size_t T, std::size_t count,
                        std::uint64_t seed, std::size_t alphabet_n = 10,
                        const ParenthesisOptions& paren = {});

/// Running count of unmatched opens over a parenthesis symbol stream, capped.
std::vector<int> unmatched_counts(const std::vector<int>& symbols, std::size_t n_pairs,
                                  int cap = kParenthesisCap);

/// 10·ln(8)/(T + 20).
double copying_baseline(std::size_t T);

/// Mean cross-entropy of the memoryless copying strategy: class 0 with
/// certainty until the marker appears, uniform over 1..8 from the marker on.
double memoryless_copying_loss(const TaskBatch& batch);

/// MSE of a constant predictor on an adding batch.
double constant_predictor_mse(const TaskBatch& batch, double prediction = 1.0);

/// One JSON object per sample: {"task","T","seed","input","target"}.
void write_jsonl(const TaskBatch& batch, std::ostream& out);

}  // namespace ncgru
