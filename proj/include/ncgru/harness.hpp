#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncgru/cells.hpp"
#include "ncgru/optim.hpp"
#include "ncgru/orthocore.hpp"
#include "ncgru/tasks.hpp"

namespace ncgru {

struct TaskConfig {
  std::string name = "adding";
  std::size_t T = 100;
  std::size_t alphabet_n = 10;  // denoise
  std::size_t n_pairs = 10;     // parenthesis
  bool final_step_only = false; // parenthesis
};

struct ModelConfig {
  Variant variant = Variant::NCGRU;
  std::size_t hidden = 32;
  OrthoSet ortho_set{false, false, true};
  std::optional<std::size_t> num_neg;  // defaults to hidden / 2
  int neumann_order = 2;
  std::size_t reset_every = 50;
  bool exact_inverse_mode = false;
};

struct OptimizerSection {
  OptimizerKind kind = OptimizerKind::Adam;
  double lr = 1e-3;
  std::optional<double> lr_a;  // defaults to lr
};

struct TrainConfig {
  std::size_t iterations = 1000;
  std::size_t batch_size = 50;
  std::size_t eval_every = 100;
  std::size_t eval_batch_size = 500;
  std::uint64_t seed = 1;
  bool record_wall_time = false;
};

struct ExperimentConfig {
  TaskConfig task;
  ModelConfig model;
  OptimizerSection optimizer;
  TrainConfig train;
  std::string output_dir = "runs/default";

  std::size_t num_neg() const { return model.num_neg.value_or(model.hidden / 2); }
  double lr_a() const { return optimizer.lr_a.value_or(optimizer.lr); }
};

/// Parses and validates; unknown keys and out-of-range values throw ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
void validate(const ExperimentConfig& cfg);

/// Input width and output classes (1 for regression) of a task.
std::pair<std::size_t, std::size_t> task_dims(const TaskConfig& task);

/// Trainable parameter count: skew weights count n(n−1)/2, readout included.
std::size_t parameter_count(Variant variant, const OrthoSet& ortho, std::size_t hidden,
                            std::size_t input_dim, std::size_t output_dim);

/// Smallest hidden size whose parameter count reaches `budget`.
std::size_t match_hidden_size(std::size_t budget, Variant variant, const OrthoSet& ortho,
                              std::size_t input_dim, std::size_t output_dim);

/// Recurrent cell, linear readout, and one SkewOrthogonal per orthogonal weight.
struct Model {
  CellParams cell;
  Matrix readout_w;  // k x n
  Matrix readout_b;  // k x 1
  std::map<std::string, SkewOrthogonal> skews;  // keyed "U_r", "U_u", "U_c"
};

Model init_model(const ExperimentConfig& cfg);

struct LossResult {
  double loss = 0.0;
  std::optional<BpttResult> bptt;
  Matrix grad_readout_w;
  Matrix grad_readout_b;
};

/// Mean loss over lanes and scored steps; with `with_grad` also runs BPTT.
LossResult model_loss(const Model& model, const TaskBatch& batch, bool with_grad);

struct MetricRow {
  std::size_t step = 0;
  double train_loss = 0.0;
  std::optional<double> eval_loss;
  std::optional<double> drift;             // max over orthogonal weights
  std::optional<double> contraction_norm;  // max over orthogonal weights
  std::int64_t wall_ms = 0;
};

inline constexpr const char* kMetricsHeader = "step,train_loss,eval_loss,drift,contraction_norm,wall_ms";
std::string format_metric_row(const MetricRow& row);

struct TrainingState {
  Model model;
  std::map<std::string, OptimizerState> optimizers;
  std::size_t step = 0;
};

nlohmann::json checkpoint_to_json(const TrainingState& state, const ExperimentConfig& cfg);
TrainingState checkpoint_from_json(const nlohmann::json& j);

struct RunResult {
  std::vector<MetricRow> rows;
  TrainingState final_state;
  bool aborted = false;
  std::string abort_reason;
  std::size_t contraction_warnings = 0;
};

/// Trains per the config. With `out_dir` set, writes metrics.csv,
/// checkpoint_initial.json and checkpoint.json there.
RunResult run_training(const ExperimentConfig& cfg,
                       const std::optional<std::filesystem::path>& out_dir = std::nullopt);

enum class AblationMode { NeumannVsInverse, OrthoPlacement, NormMonitor };
std::string to_string(AblationMode m);
AblationMode ablation_mode_from_string(const std::string& s);

struct ArmResult {
  std::string label;
  ExperimentConfig config;
  RunResult run;
};

/// One run per arm, same seed everywhere. Writes <out>/<label>/... and
/// <out>/summary.csv when `out_dir` is set.
std::vector<ArmResult> run_ablation(AblationMode mode, const ExperimentConfig& cfg,
                                    const std::optional<std::filesystem::path>& out_dir = std::nullopt);

std::optional<double> final_eval_loss(const RunResult& run);
double max_contraction(const RunResult& run);

}  // namespace ncgru
