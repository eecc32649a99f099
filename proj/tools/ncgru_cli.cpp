#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "ncgru/errors.hpp"
#include "ncgru/gradcheck.hpp"
#include "ncgru/harness.hpp"
#include "ncgru/tasks.hpp"

namespace {

std::optional<std::filesystem::path> output_path(const ncgru::ExperimentConfig& cfg) {
  if (cfg.output_dir.empty()) return std::nullopt;
  return std::filesystem::path(cfg.output_dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NC-GRU training, ablation and verification tool"};
  app.require_subcommand(1);

  std::string config_path, out_dir, mode, scope, task;
  std::optional<std::uint64_t> seed_override;
  std::uint64_t gen_seed = 1;
  std::size_t T = 100, count = 10, alphabet_n = 10, n_pairs = 10;
  ncgru::GradcheckOptions gc;

  auto* train = app.add_subcommand("train", "Train one configuration");
  train->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  train->add_option("--seed", seed_override, "Override train.seed");
  train->add_option("--out", out_dir, "Override output.dir");

  auto* ablate = app.add_subcommand("ablate", "Run an ablation sweep");
  ablate->add_option("--mode", mode, "neumann-vs-inverse | ortho-placement | norm-monitor")->required();
  ablate->add_option("--config", config_path, "Base experiment config (JSON)")->required()->check(CLI::ExistingFile);
  ablate->add_option("--seed", seed_override, "Override train.seed");
  ablate->add_option("--out", out_dir, "Override output.dir");

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  grad->add_option("--scope", scope, "cell | cayley | bptt")->required();
  grad->add_option("--n", gc.hidden, "Hidden / matrix size")->check(CLI::Range(2, 8));
  grad->add_option("--m", gc.input, "Input size")->check(CLI::Range(1, 8));
  grad->add_option("--length", gc.length, "Sequence length")->check(CLI::Range(1, 10));
  grad->add_option("--instances", gc.instances, "Random instances per variant");
  grad->add_option("--seed", gc.seed, "Seed");

  auto* gen = app.add_subcommand("gen", "Write task samples as JSON lines");
  gen->add_option("--task", task, "adding | copying | parenthesis | denoise")->required();
  gen->add_option("--T", T, "Sequence length parameter")->required();
  gen->add_option("--count", count, "Number of samples")->required();
  gen->add_option("--out", out_dir, "Output .jsonl path")->required();
  gen->add_option("--seed", gen_seed, "Seed");
  gen->add_option("--alphabet", alphabet_n, "Denoise alphabet size");
  gen->add_option("--pairs", n_pairs, "Parenthesis pair types");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train || *ablate) {
      ncgru::ExperimentConfig cfg = ncgru::load_config(config_path);
      if (seed_override) cfg.train.seed = *seed_override;
      if (!out_dir.empty()) cfg.output_dir = out_dir;

      if (*train) {
        const auto run = ncgru::run_training(cfg, output_path(cfg));
        const auto eval = ncgru::final_eval_loss(run);
        std::cout << fmt::format("steps={} final_eval_loss={} max_contraction={:.6g} warnings={}\n",
                                 run.rows.size(), eval ? fmt::format("{:.6g}", *eval) : "n/a",
                                 ncgru::max_contraction(run), run.contraction_warnings);
        if (run.aborted) {
          std::cerr << "aborted: " << run.abort_reason << '\n';
          return 2;
        }
        return 0;
      }

      const auto arms = ncgru::run_ablation(ncgru::ablation_mode_from_string(mode), cfg, output_path(cfg));
      int rc = 0;
      for (const auto& arm : arms) {
        const auto eval = ncgru::final_eval_loss(arm.run);
        std::cout << fmt::format("{:<14} steps={} final_eval_loss={} max_contraction={:.6g}{}\n", arm.label,
                                 arm.run.rows.size(), eval ? fmt::format("{:.6g}", *eval) : "n/a",
                                 ncgru::max_contraction(arm.run), arm.run.aborted ? " ABORTED" : "");
        if (arm.run.aborted) rc = 2;
      }
      return rc;
    }

    if (*grad) {
      const auto report = ncgru::run_gradcheck(ncgru::gradcheck_scope_from_string(scope), gc);
      std::cout << ncgru::format_report(report);
      return report.passed ? 0 : 1;
    }

    if (*gen) {
      const ncgru::TaskBatch batch =
          ncgru::generate_task(task, T, count, gen_seed, alphabet_n, ncgru::ParenthesisOptions{n_pairs, false});
      std::ofstream out(out_dir);
      if (!out) throw ncgru::ConfigError("cannot write " + out_dir);
      ncgru::write_jsonl(batch, out);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
