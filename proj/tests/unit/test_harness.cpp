#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ncgru/errors.hpp"
#include "ncgru/harness.hpp"
#include "ncgru/serialize.hpp"
#include "oracles.hpp"

using namespace ncgru;
using nlohmann::json;

namespace {

json small_config(const std::string& task = "adding") {
  return json{{"task", {{"name", task}, {"T", 12}}},
              {"model", {{"variant", "ncgru"}, {"hidden", 6}, {"ortho_set", {"U_r", "U_c"}}, {"reset_every", 4}}},
              {"optimizer", {{"kind", "adam"}, {"lr", 1e-2}}},
              {"train", {{"iterations", 12}, {"batch_size", 4}, {"eval_every", 5}, {"eval_batch_size", 8}, {"seed", 3}}}};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ncgru_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("config parsing and defaults") {
  const ExperimentConfig cfg = config_from_json(small_config());
  CHECK(cfg.task.T == 12);
  CHECK(cfg.model.ortho_set == OrthoSet{true, false, true});
  CHECK(cfg.num_neg() == 3);
  CHECK(cfg.lr_a() == 1e-2);

  const ExperimentConfig gru = config_from_json(json{{"model", {{"variant", "gru"}}}});
  CHECK(gru.model.ortho_set.empty());
  const ExperimentConfig dflt = config_from_json(json::object());
  CHECK(dflt.model.ortho_set == OrthoSet{false, false, true});
}

TEST_CASE("invalid configs are rejected before any run") {
  auto bad = [](json j) { CHECK_THROWS_AS(config_from_json(j), ConfigError); };
  json j = small_config();
  j["task"]["lenght"] = 3;
  bad(j);
  bad(json{{"extra", 1}});
  bad(json{{"model", {{"variant", "gru"}, {"ortho_set", {"U_c"}}}}});
  bad(json{{"model", {{"ortho_set", {"U_x"}}}}});
  bad(json{{"model", {{"neumann_order", 4}}}});
  bad(json{{"model", {{"hidden", 4}, {"num_neg", 5}}}});
  bad(json{{"optimizer", {{"lr", -1.0}}}});
  bad(json{{"optimizer", {{"kind", "adagrad"}}}});
  bad(json{{"train", {{"batch_size", 0}}}});
  bad(json{{"task", {{"name", "sorting"}}}});
  bad(json{{"task", {{"name", "denoise"}, {"T", 5}}}});
  bad(json{{"task", {{"T", "long"}}}});
}

TEST_CASE("config json round-trips") {
  const ExperimentConfig cfg = config_from_json(small_config("parenthesis"));
  const json once = config_to_json(cfg);
  CHECK(config_to_json(config_from_json(once)) == once);
}

TEST_CASE("parameter counting and matching") {
  CHECK(parameter_count(Variant::GRU, {}, 2, 1, 1) == 3 * 2 + 3 * 4 + 3 * 2 + 2 + 1);
  CHECK(parameter_count(Variant::NCGRU, {true, true, true}, 4, 1, 1) == 12 + 3 * 6 + 12 + 5);
  const std::size_t budget = parameter_count(Variant::NCGRU, {true, false, true}, 48, 21, 11);
  CHECK(budget == 8267);
  CHECK(match_hidden_size(budget, Variant::GRU, {}, 21, 11) == 42);
  CHECK(match_hidden_size(parameter_count(Variant::GRU, {}, 30, 2, 1), Variant::GRU, {}, 2, 1) == 30);
}

TEST_CASE("initial model uses orthogonal recurrent weights") {
  const Model m = init_model(config_from_json(small_config()));
  CHECK(m.skews.size() == 2);
  CHECK(fro_dist_identity(m.cell.u_r) < 1e-12);
  CHECK(fro_dist_identity(m.cell.u_c) < 1e-12);
  CHECK(m.cell.u_c == m.skews.at("U_c").u);
  CHECK(m.readout_w.rows() == 1);
}

TEST_CASE("model_loss gradients match finite differences") {
  for (const char* task : {"adding", "parenthesis"}) {
    Model m = init_model(config_from_json(small_config(task)));
    const TaskBatch b = generate_task(task, 12, 3, 11, 10, ParenthesisOptions{2, false});
    if (std::string(task) == "parenthesis") {
      json j = small_config(task);
      j["task"]["n_pairs"] = 2;
      m = init_model(config_from_json(j));
    }
    const LossResult lr = model_loss(m, b, true);
    CHECK(lr.loss == doctest::Approx(model_loss(m, b, false).loss).epsilon(1e-14));
    const double h = 1e-6;
    for (Matrix* w : {&m.readout_w, &m.readout_b}) {
      const Matrix& g = w == &m.readout_w ? lr.grad_readout_w : lr.grad_readout_b;
      for (std::size_t k = 0; k < w->size(); ++k) {
        const double saved = w->values()[k];
        w->values()[k] = saved + h;
        const double lp = model_loss(m, b, false).loss;
        w->values()[k] = saved - h;
        const double lm = model_loss(m, b, false).loss;
        w->values()[k] = saved;
        CHECK((lp - lm) / (2 * h) == doctest::Approx(g.values()[k]).epsilon(1e-6).scale(1e-6));
      }
    }
    for (std::size_t k = 0; k < m.cell.w_c.size(); ++k) {
      const double saved = m.cell.w_c.values()[k];
      m.cell.w_c.values()[k] = saved + h;
      const double lp = model_loss(m, b, false).loss;
      m.cell.w_c.values()[k] = saved - h;
      const double lm = model_loss(m, b, false).loss;
      m.cell.w_c.values()[k] = saved;
      CHECK((lp - lm) / (2 * h) == doctest::Approx(lr.bptt->grads.w_c.values()[k]).epsilon(1e-6).scale(1e-6));
    }
  }
}

TEST_CASE("cross-entropy of uniform logits is ln(classes)") {
  json j = small_config("copying");
  Model m = init_model(config_from_json(j));
  m.readout_w = Matrix(m.readout_w.rows(), m.readout_w.cols());
  const TaskBatch b = generate_task("copying", 12, 5, 1);
  CHECK(model_loss(m, b, false).loss == doctest::Approx(std::log(10.0)).epsilon(1e-14));
}

TEST_CASE("zero iterations: header only and the initial checkpoint") {
  json j = small_config();
  j["train"]["iterations"] = 0;
  const auto dir = scratch("zero");
  const RunResult r = run_training(config_from_json(j), dir);
  CHECK(r.rows.empty());
  CHECK(slurp(dir / "metrics.csv") == std::string(kMetricsHeader) + "\n");
  CHECK(std::filesystem::exists(dir / "checkpoint_initial.json"));
  CHECK_FALSE(std::filesystem::exists(dir / "checkpoint.json"));
}

TEST_CASE("training rows, eval cadence and determinism") {
  const ExperimentConfig cfg = config_from_json(small_config());
  const auto d1 = scratch("det1");
  const auto d2 = scratch("det2");
  const RunResult r = run_training(cfg, d1);
  run_training(cfg, d2);
  CHECK(slurp(d1 / "metrics.csv") == slurp(d2 / "metrics.csv"));
  CHECK(slurp(d1 / "checkpoint.json") == slurp(d2 / "checkpoint.json"));

  REQUIRE(r.rows.size() == 12);
  for (std::size_t k = 0; k < r.rows.size(); ++k) {
    const MetricRow& row = r.rows[k];
    CHECK(row.step == k + 1);
    CHECK(row.eval_loss.has_value() == (row.step % 5 == 0 || row.step == 12));
    REQUIRE(row.contraction_norm.has_value());
    CHECK(*row.contraction_norm < 1.0);
    CHECK(row.wall_ms == 0);
    if (row.step % 4 == 0) CHECK(*row.drift < 1e-10 * 6);
  }
  const RunResult other = run_training([&] {
    ExperimentConfig c = cfg;
    c.train.seed = 4;
    return c;
  }());
  CHECK(other.rows[0].train_loss != r.rows[0].train_loss);

  // Orthogonal weights follow their skew parameters exactly.
  const Model& m = r.final_state.model;
  CHECK(m.cell.u_c == m.skews.at("U_c").u);
  CHECK(skew_defect(m.skews.at("U_r").a) == 0.0);
}

TEST_CASE("metric row formatting") {
  MetricRow row;
  row.step = 7;
  row.train_loss = 0.25;
  CHECK(format_metric_row(row) == "7,0.25,,,,0");
  row.eval_loss = 0.1;
  row.drift = 1e-15;
  row.contraction_norm = 0.5;
  row.wall_ms = 12;
  CHECK(format_metric_row(row) == "7,0.25,0.1,1e-15,0.5,12");
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  const ExperimentConfig cfg = config_from_json(small_config());
  const RunResult r = run_training(cfg);
  const json j = checkpoint_to_json(r.final_state, cfg);
  const json again = checkpoint_to_json(checkpoint_from_json(json::parse(j.dump())), config_from_json(j.at("config")));
  CHECK(again.dump() == j.dump());
  const TrainingState s = checkpoint_from_json(j);
  CHECK(s.model.cell.u_c == r.final_state.model.cell.u_c);
  CHECK(s.optimizers.at("A_c").first_moment == r.final_state.optimizers.at("A_c").first_moment);
  CHECK(s.step == 12);
}

TEST_CASE("a diverging run ends with a diagnostic row") {
  json j = small_config();
  j["model"] = {{"variant", "gru"}, {"hidden", 6}};
  j["optimizer"] = {{"kind", "sgd"}, {"lr", 1e300}};
  const RunResult r = run_training(config_from_json(j));
  CHECK(r.aborted);
  REQUIRE_FALSE(r.rows.empty());
  CHECK(std::isnan(r.rows.back().train_loss));
  CHECK(r.rows.size() < 12);
  CHECK_FALSE(r.abort_reason.empty());
}

TEST_CASE("ablation arms") {
  const ExperimentConfig cfg = config_from_json(small_config());
  const auto dir = scratch("ablate");
  const auto nvi = run_ablation(AblationMode::NeumannVsInverse, cfg, dir);
  REQUIRE(nvi.size() == 4);
  CHECK(nvi[0].label == "neumann1");
  CHECK(nvi[3].label == "inverse");
  for (const auto& arm : nvi) {
    CHECK(arm.run.rows.size() == nvi[0].run.rows.size());
    CHECK(arm.config.train.seed == cfg.train.seed);
    CHECK(std::filesystem::exists(dir / arm.label / "metrics.csv"));
  }
  for (const auto& row : nvi[3].run.rows) CHECK(*row.drift < 1e-12);
  CHECK(std::filesystem::exists(dir / "summary.csv"));

  const auto place = run_ablation(AblationMode::OrthoPlacement, cfg);
  REQUIRE(place.size() == 3);
  CHECK(place[0].label == "U_c");
  CHECK(place[2].config.model.ortho_set == OrthoSet{true, true, true});

  const auto mon = run_ablation(AblationMode::NormMonitor, cfg);
  REQUIRE(mon.size() == 1);
  CHECK(max_contraction(mon[0].run) < 1.0);

  json g = small_config();
  g["model"] = {{"variant", "gru"}, {"hidden", 6}};
  CHECK_THROWS_AS(run_ablation(AblationMode::OrthoPlacement, config_from_json(g)), ConfigError);
  CHECK(ablation_mode_from_string("norm-monitor") == AblationMode::NormMonitor);
}
