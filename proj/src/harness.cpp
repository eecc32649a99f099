#include "ncgru/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "ncgru/errors.hpp"
#include "ncgru/rng.hpp"
#include "ncgru/serialize.hpp"

namespace ncgru {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& section) {
  if (!j.is_object()) throw ConfigError("config: '" + section + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.contains(key)) throw ConfigError("config: unknown key '" + section + "." + key + "'");
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& section) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config: bad value for '" + section + "." + key + "': " + e.what());
  }
}

OrthoSet parse_ortho_set(const json& j) {
  if (!j.is_array()) throw ConfigError("config: model.ortho_set must be an array");
  OrthoSet s;
  for (const auto& e : j) {
    const auto name = e.get<std::string>();
    if (name == "U_r") s.u_r = true;
    else if (name == "U_u") s.u_u = true;
    else if (name == "U_c") s.u_c = true;
    else throw ConfigError("config: unknown orthogonal weight '" + name + "'");
  }
  return s;
}

json ortho_set_to_json(const OrthoSet& s) {
  json a = json::array();
  if (s.u_r) a.push_back("U_r");
  if (s.u_u) a.push_back("U_u");
  if (s.u_c) a.push_back("U_c");
  return a;
}

Matrix& param_by_name(CellParams& p, const std::string& name) {
  if (name == "w_r") return p.w_r;
  if (name == "w_u") return p.w_u;
  if (name == "w_c") return p.w_c;
  if (name == "u_r") return p.u_r;
  if (name == "u_u") return p.u_u;
  if (name == "u_c") return p.u_c;
  if (name == "b_r") return p.b_r;
  if (name == "b_u") return p.b_u;
  if (name == "b_c") return p.b_c;
  if (name == "modrelu_b") return p.modrelu_b;
  throw ContractError("unknown cell parameter '" + name + "'");
}

/// (skew key, cell parameter name, optimizer id) for each orthogonal weight.
struct OrthoSlot {
  const char* key;
  const char* param;
  const char* optimizer_id;
};
constexpr OrthoSlot kOrthoSlots[] = {
    {"U_r", "u_r", "A_r"}, {"U_u", "u_u", "A_u"}, {"U_c", "u_c", "A_c"}};

bool in_set(const OrthoSet& s, const std::string& key) {
  return (key == "U_r" && s.u_r) || (key == "U_u" && s.u_u) || (key == "U_c" && s.u_c);
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : ""; }

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  check_keys(j, {"task", "model", "optimizer", "train", "output"}, "root");
  ExperimentConfig cfg;

  if (j.contains("task")) {
    const json& t = j.at("task");
    check_keys(t, {"name", "T", "alphabet_n", "n_pairs", "final_step_only"}, "task");
    cfg.task.name = get_or<std::string>(t, "name", cfg.task.name, "task");
    cfg.task.T = get_or<std::size_t>(t, "T", cfg.task.T, "task");
    cfg.task.alphabet_n = get_or<std::size_t>(t, "alphabet_n", cfg.task.alphabet_n, "task");
    cfg.task.n_pairs = get_or<std::size_t>(t, "n_pairs", cfg.task.n_pairs, "task");
    cfg.task.final_step_only = get_or<bool>(t, "final_step_only", cfg.task.final_step_only, "task");
  }

  bool ortho_given = false;
  if (j.contains("model")) {
    const json& m = j.at("model");
    check_keys(m, {"variant", "hidden", "ortho_set", "num_neg", "neumann_order", "reset_every",
                   "exact_inverse_mode"},
               "model");
    const auto variant = get_or<std::string>(m, "variant", "ncgru", "model");
    if (variant == "gru") cfg.model.variant = Variant::GRU;
    else if (variant == "ncgru") cfg.model.variant = Variant::NCGRU;
    else throw ConfigError("config: unknown model.variant '" + variant + "'");
    cfg.model.hidden = get_or<std::size_t>(m, "hidden", cfg.model.hidden, "model");
    if (m.contains("ortho_set")) {
      cfg.model.ortho_set = parse_ortho_set(m.at("ortho_set"));
      ortho_given = true;
    }
    if (m.contains("num_neg") && !m.at("num_neg").is_null()) {
      cfg.model.num_neg = get_or<std::size_t>(m, "num_neg", 0, "model");
    }
    cfg.model.neumann_order = get_or<int>(m, "neumann_order", cfg.model.neumann_order, "model");
    cfg.model.reset_every = get_or<std::size_t>(m, "reset_every", cfg.model.reset_every, "model");
    cfg.model.exact_inverse_mode =
        get_or<bool>(m, "exact_inverse_mode", cfg.model.exact_inverse_mode, "model");
  }
  if (cfg.model.variant == Variant::GRU && !ortho_given) cfg.model.ortho_set = {};

  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    check_keys(o, {"kind", "lr", "lr_A"}, "optimizer");
    cfg.optimizer.kind = optimizer_kind_from_string(get_or<std::string>(o, "kind", "adam", "optimizer"));
    cfg.optimizer.lr = get_or<double>(o, "lr", cfg.optimizer.lr, "optimizer");
    if (o.contains("lr_A") && !o.at("lr_A").is_null()) {
      cfg.optimizer.lr_a = get_or<double>(o, "lr_A", 0.0, "optimizer");
    }
  }

  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t, {"iterations", "batch_size", "eval_every", "eval_batch_size", "seed",
                   "record_wall_time"},
               "train");
    cfg.train.iterations = get_or<std::size_t>(t, "iterations", cfg.train.iterations, "train");
    cfg.train.batch_size = get_or<std::size_t>(t, "batch_size", cfg.train.batch_size, "train");
    cfg.train.eval_every = get_or<std::size_t>(t, "eval_every", cfg.train.eval_every, "train");
    cfg.train.eval_batch_size =
        get_or<std::size_t>(t, "eval_batch_size", cfg.train.eval_batch_size, "train");
    cfg.train.seed = get_or<std::uint64_t>(t, "seed", cfg.train.seed, "train");
    cfg.train.record_wall_time =
        get_or<bool>(t, "record_wall_time", cfg.train.record_wall_time, "train");
  }

  if (j.contains("output")) {
    const json& o = j.at("output");
    check_keys(o, {"dir"}, "output");
    cfg.output_dir = get_or<std::string>(o, "dir", cfg.output_dir, "output");
  }

  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

json config_to_json(const ExperimentConfig& cfg) {
  return {
      {"task",
       {{"name", cfg.task.name},
        {"T", cfg.task.T},
        {"alphabet_n", cfg.task.alphabet_n},
        {"n_pairs", cfg.task.n_pairs},
        {"final_step_only", cfg.task.final_step_only}}},
      {"model",
       {{"variant", to_string(cfg.model.variant)},
        {"hidden", cfg.model.hidden},
        {"ortho_set", ortho_set_to_json(cfg.model.ortho_set)},
        {"num_neg", cfg.num_neg()},
        {"neumann_order", cfg.model.neumann_order},
        {"reset_every", cfg.model.reset_every},
        {"exact_inverse_mode", cfg.model.exact_inverse_mode}}},
      {"optimizer", {{"kind", to_string(cfg.optimizer.kind)}, {"lr", cfg.optimizer.lr}, {"lr_A", cfg.lr_a()}}},
      {"train",
       {{"iterations", cfg.train.iterations},
        {"batch_size", cfg.train.batch_size},
        {"eval_every", cfg.train.eval_every},
        {"eval_batch_size", cfg.train.eval_batch_size},
        {"seed", cfg.train.seed},
        {"record_wall_time", cfg.train.record_wall_time}}},
      {"output", {{"dir", cfg.output_dir}}},
  };
}

void validate(const ExperimentConfig& cfg) {
  const auto& t = cfg.task;
  if (t.name == "adding") {
    if (t.T < 2) throw ConfigError("config: adding needs T >= 2");
  } else if (t.name == "copying") {
    if (t.T < 1) throw ConfigError("config: copying needs T >= 1");
  } else if (t.name == "parenthesis") {
    if (t.T < 1) throw ConfigError("config: parenthesis needs T >= 1");
    if (t.n_pairs < 1 || t.n_pairs > 10) throw ConfigError("config: n_pairs must be in [1, 10]");
  } else if (t.name == "denoise") {
    if (t.T < 11) throw ConfigError("config: denoise needs T >= 11");
    if (t.alphabet_n < 2) throw ConfigError("config: alphabet_n must be >= 2");
  } else {
    throw ConfigError("config: unknown task '" + t.name + "'");
  }

  const auto& m = cfg.model;
  if (m.hidden < 2) throw ConfigError("config: model.hidden must be >= 2");
  if (m.variant == Variant::GRU && !m.ortho_set.empty()) {
    throw ConfigError("config: ortho_set requires variant 'ncgru'");
  }
  if (cfg.num_neg() > m.hidden) throw ConfigError("config: num_neg exceeds hidden size");
  if (m.neumann_order < 1 || m.neumann_order > 3) throw ConfigError("config: neumann_order must be 1, 2 or 3");

  const auto positive = [](double x) { return std::isfinite(x) && x > 0.0; };
  if (!positive(cfg.optimizer.lr)) throw ConfigError("config: optimizer.lr must be positive");
  if (!positive(cfg.lr_a())) throw ConfigError("config: optimizer.lr_A must be positive");

  if (cfg.train.batch_size == 0) throw ConfigError("config: train.batch_size must be positive");
  if (cfg.train.eval_every == 0) throw ConfigError("config: train.eval_every must be positive");
  if (cfg.train.eval_batch_size == 0) throw ConfigError("config: train.eval_batch_size must be positive");
}

std::pair<std::size_t, std::size_t> task_dims(const TaskConfig& task) {
  if (task.name == "adding") return {2, 1};
  if (task.name == "copying") return {10, 10};
  if (task.name == "parenthesis") return {2 * task.n_pairs + 1, kParenthesisClasses};
  if (task.name == "denoise") return {task.alphabet_n + 2, task.alphabet_n + 1};
  throw ConfigError("unknown task '" + task.name + "'");
}

std::size_t parameter_count(Variant variant, const OrthoSet& ortho, std::size_t hidden,
                            std::size_t input_dim, std::size_t output_dim) {
  const std::size_t n = hidden;
  const std::size_t full = n * n;
  const std::size_t skew = n * (n - 1) / 2;
  const bool nc = variant == Variant::NCGRU;
  std::size_t count = 3 * n * input_dim + 3 * n + output_dim * n + output_dim;
  count += (nc && ortho.u_r) ? skew : full;
  count += (nc && ortho.u_u) ? skew : full;
  count += (nc && ortho.u_c) ? skew : full;
  return count;
}

std::size_t match_hidden_size(std::size_t budget, Variant variant, const OrthoSet& ortho,
                              std::size_t input_dim, std::size_t output_dim) {
  std::size_t n = 1;
  while (parameter_count(variant, ortho, n, input_dim, output_dim) < budget) ++n;
  return n;
}

Model init_model(const ExperimentConfig& cfg) {
  validate(cfg);
  const auto [input_dim, output_dim] = task_dims(cfg.task);
  const std::size_t n = cfg.model.hidden;
  const std::uint64_t seed = cfg.train.seed;

  Model model;
  model.cell = init_params(cfg.model.variant, n, input_dim, mix_seed(seed, 101));
  model.cell.ortho = cfg.model.ortho_set;

  Rng rng(mix_seed(seed, 102));
  const double k = 1.0 / std::sqrt(static_cast<double>(n));
  model.readout_w = Matrix(output_dim, n);
  for (double& e : model.readout_w.values()) e = rng.uniform(-k, k);
  model.readout_b = Matrix(output_dim, 1);

  std::uint64_t stream = 200;
  for (const auto& slot : kOrthoSlots) {
    ++stream;
    if (!in_set(cfg.model.ortho_set, slot.key)) continue;
    SkewOrthogonal skew = make_skew_orthogonal(init_skew(n, mix_seed(seed, stream)),
                                               make_scaling(n, cfg.num_neg()),
                                               cfg.model.neumann_order, cfg.model.reset_every);
    param_by_name(model.cell, slot.param) = skew.u;
    model.skews.emplace(slot.key, std::move(skew));
  }
  return model;
}

LossResult model_loss(const Model& model, const TaskBatch& batch, bool with_grad) {
  const std::size_t lanes = batch.batch;
  const std::size_t steps = batch.steps();
  const Matrix& w = model.readout_w;
  const Matrix& bias = model.readout_b;
  const bool regression = batch.loss_kind == LossKind::MSE;
  if (regression && w.rows() != 1) throw ShapeError("model_loss: regression needs a 1-row readout");
  if (!regression && w.rows() != batch.num_classes) throw ShapeError("model_loss: readout/classes mismatch");

  std::size_t scored = 0;
  if (regression) {
    scored = lanes;
  } else {
    for (const auto& row : batch.target_class)
      for (int c : row) scored += c != TaskBatch::kNoTarget;
  }
  const double inv_scored = scored ? 1.0 / static_cast<double>(scored) : 0.0;

  LossResult out;
  if (with_grad) {
    out.grad_readout_w = Matrix(w.rows(), w.cols());
    out.grad_readout_b = Matrix(bias.rows(), 1);
  }

  LossHead head = [&](std::size_t t, const Matrix& h) -> std::optional<StepLoss> {
    if (regression && t + 1 != steps) return std::nullopt;
    if (!regression) {
      const auto& targets = batch.target_class[t];
      if (std::none_of(targets.begin(), targets.end(),
                       [](int c) { return c != TaskBatch::kNoTarget; })) {
        return std::nullopt;
      }
    }
    Matrix logits = matmul(w, h);
    for (std::size_t i = 0; i < logits.rows(); ++i)
      for (double& e : logits.row(i)) e += bias(i, 0);

    StepLoss sl;
    Matrix d_logits(logits.rows(), lanes);
    if (regression) {
      for (std::size_t j = 0; j < lanes; ++j) {
        const double err = logits(0, j) - batch.target_value[j];
        sl.loss += err * err * inv_scored;
        d_logits(0, j) = 2.0 * err * inv_scored;
      }
    } else {
      const auto& targets = batch.target_class[t];
      for (std::size_t j = 0; j < lanes; ++j) {
        if (targets[j] == TaskBatch::kNoTarget) continue;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < logits.rows(); ++i) mx = std::max(mx, logits(i, j));
        double z = 0.0;
        for (std::size_t i = 0; i < logits.rows(); ++i) z += std::exp(logits(i, j) - mx);
        const double log_z = mx + std::log(z);
        sl.loss += (log_z - logits(targets[j], j)) * inv_scored;
        for (std::size_t i = 0; i < logits.rows(); ++i) {
          d_logits(i, j) = std::exp(logits(i, j) - log_z) * inv_scored;
        }
        d_logits(targets[j], j) -= inv_scored;
      }
    }
    if (with_grad) {
      out.grad_readout_w += matmul_nt(d_logits, h);
      for (std::size_t i = 0; i < d_logits.rows(); ++i) {
        double s = 0.0;
        for (double e : d_logits.row(i)) s += e;
        out.grad_readout_b(i, 0) += s;
      }
      sl.grad_h = matmul_tn(w, d_logits);
    }
    return sl;
  };

  if (with_grad) {
    out.bptt = sequence_bptt(model.cell, batch.inputs, head);
    out.loss = out.bptt->loss;
  } else {
    Matrix h(model.cell.hidden(), lanes);
    for (std::size_t t = 0; t < steps; ++t) {
      h = cell_forward(model.cell, batch.inputs[t], h).h;
      if (auto sl = head(t, h)) out.loss += sl->loss;
    }
    if (!std::isfinite(out.loss)) throw NumericError("model_loss: non-finite loss");
  }
  return out;
}

std::string format_metric_row(const MetricRow& row) {
  return fmt::format("{},{},{},{},{},{}", row.step, row.train_loss, fmt_opt(row.eval_loss),
                     fmt_opt(row.drift), fmt_opt(row.contraction_norm), row.wall_ms);
}

json checkpoint_to_json(const TrainingState& state, const ExperimentConfig& cfg) {
  json skews = json::object();
  for (const auto& [key, skew] : state.model.skews) skews[key] = skew_to_json(skew);
  json optimizers = json::object();
  for (const auto& [key, opt] : state.optimizers) optimizers[key] = optimizer_to_json(opt);
  return {{"format", "ncgru-checkpoint/1"},
          {"step", state.step},
          {"config", config_to_json(cfg)},
          {"cell", cell_to_json(state.model.cell)},
          {"readout", {{"w", matrix_to_json(state.model.readout_w)},
                       {"b", matrix_to_json(state.model.readout_b)}}},
          {"skews", skews},
          {"optimizers", optimizers}};
}

TrainingState checkpoint_from_json(const json& j) {
  if (j.at("format") != "ncgru-checkpoint/1") throw ConfigError("checkpoint: unsupported format");
  TrainingState s;
  s.step = j.at("step").get<std::size_t>();
  s.model.cell = cell_from_json(j.at("cell"));
  s.model.readout_w = matrix_from_json(j.at("readout").at("w"));
  s.model.readout_b = matrix_from_json(j.at("readout").at("b"));
  for (const auto& [key, val] : j.at("skews").items()) s.model.skews.emplace(key, skew_from_json(val));
  for (const auto& [key, val] : j.at("optimizers").items()) s.optimizers.emplace(key, optimizer_from_json(val));
  return s;
}

RunResult run_training(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& out_dir) {
  validate(cfg);
  RunResult result;
  TrainingState& state = result.final_state;
  state.model = init_model(cfg);
  Model& model = state.model;

  OptimizerConfig base;
  base.kind = cfg.optimizer.kind;
  base.learning_rate = cfg.optimizer.lr;
  OptimizerConfig skew_cfg = base;
  skew_cfg.learning_rate = cfg.lr_a();

  model.cell.for_each([&](const char* name, const Matrix& m) {
    const bool ortho = std::any_of(std::begin(kOrthoSlots), std::end(kOrthoSlots), [&](const OrthoSlot& s) {
      return std::string(s.param) == name && model.skews.contains(s.key);
    });
    if (!ortho) state.optimizers.emplace(name, make_optimizer_state(base, m.size()));
  });
  state.optimizers.emplace("readout_w", make_optimizer_state(base, model.readout_w.size()));
  state.optimizers.emplace("readout_b", make_optimizer_state(base, model.readout_b.size()));
  for (const auto& slot : kOrthoSlots) {
    if (model.skews.contains(slot.key)) {
      state.optimizers.emplace(slot.optimizer_id, make_optimizer_state(skew_cfg, model.skews.at(slot.key).a.size()));
    }
  }

  const ParenthesisOptions paren{cfg.task.n_pairs, cfg.task.final_step_only};
  auto make_batch = [&](std::size_t count, std::uint64_t seed) {
    return generate_task(cfg.task.name, cfg.task.T, count, seed, cfg.task.alphabet_n, paren);
  };
  const TaskBatch eval_batch = make_batch(cfg.train.eval_batch_size, cfg.train.seed + 1);

  std::ofstream metrics;
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    std::ofstream(*out_dir / "checkpoint_initial.json") << checkpoint_to_json(state, cfg).dump() << '\n';
    metrics.open(*out_dir / "metrics.csv");
    if (!metrics) throw ConfigError("cannot write " + (*out_dir / "metrics.csv").string());
    metrics << kMetricsHeader << '\n';
  }

  for (std::size_t k = 1; k <= cfg.train.iterations; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    MetricRow row;
    row.step = k;
    try {
      const TaskBatch batch = make_batch(cfg.train.batch_size, mix_seed(cfg.train.seed, k));
      LossResult lr = model_loss(model, batch, true);
      row.train_loss = lr.loss;
      const CellParams& grads = lr.bptt->grads;

      grads.for_each([&](const char* name, const Matrix& g) {
        auto it = state.optimizers.find(name);
        if (it == state.optimizers.end()) return;  // driven by its skew parameter
        param_by_name(model.cell, name) -= step(it->second, g);
      });
      model.readout_w -= step(state.optimizers.at("readout_w"), lr.grad_readout_w);
      model.readout_b -= step(state.optimizers.at("readout_b"), lr.grad_readout_b);

      for (const auto& slot : kOrthoSlots) {
        auto it = model.skews.find(slot.key);
        if (it == model.skews.end()) continue;
        SkewOrthogonal& skew = it->second;
        const Matrix grad_a = grad_pullback(skew, param_by_name(const_cast<CellParams&>(grads), slot.param));
        const Matrix delta_a = step(state.optimizers.at(slot.optimizer_id), grad_a);
        const NeumannDiagnostics diag =
            cfg.model.exact_inverse_mode ? exact_step(skew, delta_a) : neumann_step(skew, delta_a);
        param_by_name(model.cell, slot.param) = skew.u;
        row.drift = std::max(row.drift.value_or(0.0), diag.drift);
        row.contraction_norm = std::max(row.contraction_norm.value_or(0.0), diag.contraction_norm);
        if (diag.contraction_warning) {
          if (result.contraction_warnings < 10) {
            std::cerr << "warning: step " << k << " " << slot.key << " contraction norm "
                      << diag.contraction_norm << " >= 1\n";
          }
          ++result.contraction_warnings;
        }
      }

      if (k % cfg.train.eval_every == 0 || k == cfg.train.iterations) {
        row.eval_loss = model_loss(model, eval_batch, false).loss;
      }
    } catch (const NumericError& e) {
      row.train_loss = std::numeric_limits<double>::quiet_NaN();
      row.eval_loss.reset();
      result.aborted = true;
      result.abort_reason = fmt::format("step {}: {}", k, e.what());
    }
    if (cfg.train.record_wall_time) {
      row.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    }
    if (metrics.is_open()) metrics << format_metric_row(row) << '\n';
    result.rows.push_back(row);
    if (result.aborted) break;
    state.step = k;
  }

  if (out_dir && cfg.train.iterations > 0) {
    std::ofstream(*out_dir / "checkpoint.json") << checkpoint_to_json(state, cfg).dump() << '\n';
  }
  return result;
}

std::string to_string(AblationMode m) {
  switch (m) {
    case AblationMode::NeumannVsInverse: return "neumann-vs-inverse";
    case AblationMode::OrthoPlacement: return "ortho-placement";
    case AblationMode::NormMonitor: return "norm-monitor";
  }
  return "?";
}

AblationMode ablation_mode_from_string(const std::string& s) {
  for (auto m : {AblationMode::NeumannVsInverse, AblationMode::OrthoPlacement, AblationMode::NormMonitor}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown ablation mode '" + s + "'");
}

std::optional<double> final_eval_loss(const RunResult& run) {
  for (auto it = run.rows.rbegin(); it != run.rows.rend(); ++it) {
    if (it->eval_loss) return it->eval_loss;
  }
  return std::nullopt;
}

double max_contraction(const RunResult& run) {
  double best = 0.0;
  for (const auto& r : run.rows) best = std::max(best, r.contraction_norm.value_or(0.0));
  return best;
}

std::vector<ArmResult> run_ablation(AblationMode mode, const ExperimentConfig& cfg,
                                    const std::optional<std::filesystem::path>& out_dir) {
  validate(cfg);
  if (cfg.model.variant != Variant::NCGRU) throw ConfigError("ablation: requires variant 'ncgru'");

  std::vector<std::pair<std::string, ExperimentConfig>> arms;
  switch (mode) {
    case AblationMode::NeumannVsInverse:
      if (cfg.model.ortho_set.empty()) throw ConfigError("ablation: ortho_set must be non-empty");
      for (int order = 1; order <= 3; ++order) {
        ExperimentConfig c = cfg;
        c.model.neumann_order = order;
        c.model.exact_inverse_mode = false;
        arms.emplace_back(fmt::format("neumann{}", order), c);
      }
      {
        ExperimentConfig c = cfg;
        c.model.exact_inverse_mode = true;
        arms.emplace_back("inverse", c);
      }
      break;
    case AblationMode::OrthoPlacement:
      for (const auto& [label, set] : {std::pair{"U_c", OrthoSet{false, false, true}},
                                       std::pair{"U_r+U_c", OrthoSet{true, false, true}},
                                       std::pair{"U_r+U_u+U_c", OrthoSet{true, true, true}}}) {
        ExperimentConfig c = cfg;
        c.model.ortho_set = set;
        arms.emplace_back(label, c);
      }
      break;
    case AblationMode::NormMonitor:
      if (cfg.model.ortho_set.empty()) throw ConfigError("ablation: ortho_set must be non-empty");
      arms.emplace_back("monitor", cfg);
      break;
  }

  std::vector<ArmResult> results;
  std::ofstream summary;
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    summary.open(*out_dir / "summary.csv");
    summary << "arm,final_eval_loss,min_eval_loss,max_contraction,max_drift,contraction_warnings,aborted\n";
  }
  for (auto& [label, c] : arms) {
    std::optional<std::filesystem::path> arm_dir;
    if (out_dir) arm_dir = *out_dir / label;
    c.output_dir = arm_dir ? arm_dir->string() : c.output_dir;
    RunResult run = run_training(c, arm_dir);
    if (summary.is_open()) {
      std::optional<double> min_eval;
      double max_drift = 0.0;
      for (const auto& r : run.rows) {
        if (r.eval_loss) min_eval = std::min(min_eval.value_or(*r.eval_loss), *r.eval_loss);
        max_drift = std::max(max_drift, r.drift.value_or(0.0));
      }
      summary << fmt::format("{},{},{},{},{},{},{}\n", label, fmt_opt(final_eval_loss(run)),
                             fmt_opt(min_eval), max_contraction(run), max_drift,
                             run.contraction_warnings, run.aborted ? 1 : 0);
    }
    results.push_back({label, c, std::move(run)});
  }
  return results;
}

}  // namespace ncgru
