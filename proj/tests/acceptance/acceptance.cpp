// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance --criterion 1 [--criterion 2 ...] [--workdir DIR]
//   acceptance --all

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "ncgru/bounds.hpp"
#include "ncgru/cells.hpp"
#include "ncgru/gradcheck.hpp"
#include "ncgru/harness.hpp"
#include "ncgru/linalg.hpp"
#include "ncgru/optim.hpp"
#include "ncgru/orthocore.hpp"
#include "ncgru/rng.hpp"
#include "ncgru/tasks.hpp"

namespace fs = std::filesystem;
using namespace ncgru;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path g_workdir = fs::temp_directory_path() / "ncgru_acceptance";

Matrix random_skew(std::size_t n, Rng& rng, double scale = 1.0) {
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      a(i, j) = rng.uniform(-scale, scale);
      a(j, i) = -a(i, j);
    }
  return a;
}

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (double& e : m.values()) e = rng.uniform(-scale, scale);
  return m;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------

Outcome c1_cayley_orthogonality() {
  double worst_ratio = 0.0;
  for (std::size_t n : {2, 16, 64, 128}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(mix_seed(seed, n));
      const Matrix u = cayley_transform(random_skew(n, rng), make_scaling(n, rng.below(n + 1)));
      worst_ratio = std::max(worst_ratio, fro_dist_identity(u) / (1e-10 * static_cast<double>(n)));
    }
  }
  return {worst_ratio < 1.0, fmt::format("max ‖UᵀU−I‖_F / (1e-10·n) = {:.3e}", worst_ratio)};
}

Outcome c2_pullback() {
  double worst = 0.0;
  for (std::size_t i = 0; i < 20; ++i) {
    GradcheckOptions o;
    o.hidden = 2 + i % 7;
    o.instances = 1;
    o.seed = 100 + i;
    worst = std::max(worst, run_gradcheck(GradcheckScope::Cayley, o).max_rel_error);
  }
  return {worst < 1e-6, fmt::format("20 instances, n in 2..8, max rel err {:.3e} (< 1e-6)", worst)};
}

Outcome c3_bptt() {
  GradcheckOptions o;
  o.hidden = 4;
  o.input = 3;
  o.length = 5;
  o.instances = 10;
  o.seed = 7;
  const GradcheckReport r = run_gradcheck(GradcheckScope::Bptt, o);
  return {r.passed && r.max_rel_error < 1e-5,
          fmt::format("GRU+NC-GRU, {} instances ({} kink draws rejected), max rel err {:.3e} (< 1e-5)",
                      r.instances, r.rejected, r.max_rel_error)};
}

Outcome c4_order_law() {
  const std::size_t n = 16;
  Rng rng(4);
  const Matrix a = init_skew(n, 4);
  const Matrix dir = random_skew(n, rng);
  const Matrix inv = exact_inverse(Matrix::identity(n) + a);
  const double base = 0.1 / spectral_norm(matmul(inv, dir));  // ‖(I+A)⁻¹δA‖₂ = 0.1 at scale 1

  bool ok = true;
  std::string detail;
  for (int order = 1; order <= 3; ++order) {
    std::vector<double> xs, ys;
    for (double scale : {1.0, 0.5, 0.25, 0.125}) {
      SkewOrthogonal s = make_skew_orthogonal(a, make_scaling(n, n / 2), order, 0);
      neumann_step(s, (base * scale) * dir);
      const Matrix exact = exact_inverse(Matrix::identity(n) + s.a);
      xs.push_back(std::log(scale));
      ys.push_back(std::log(frobenius_norm(s.a_tilde - exact)));
    }
    const double mx = (xs[0] + xs[1] + xs[2] + xs[3]) / 4, my = (ys[0] + ys[1] + ys[2] + ys[3]) / 4;
    double sxy = 0, sxx = 0;
    for (int i = 0; i < 4; ++i) {
      sxy += (xs[i] - mx) * (ys[i] - my);
      sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    const double slope = sxy / sxx;
    ok = ok && std::abs(slope - (order + 1)) <= 0.3;
    detail += fmt::format("{}p={} slope {:.3f}", detail.empty() ? "" : "; ", order, slope);
  }
  return {ok, detail + " (target p+1 ± 0.3)"};
}

Outcome c5_drift() {
  const std::size_t n = 64;
  Rng rng(5);
  const Matrix target = cayley_transform(random_skew(n, rng), make_scaling(n, n / 2));
  SkewOrthogonal s = make_skew_orthogonal(init_skew(n, 5), make_scaling(n, n / 2), 2, 50);
  OptimizerConfig oc;
  oc.kind = OptimizerKind::Adam;
  oc.learning_rate = 1e-3;
  OptimizerState opt = make_optimizer_state(oc, n * n);

  double max_drift = 0.0, max_post_reset = 0.0, max_contraction = 0.0;
  std::size_t over = 0;
  for (int k = 0; k < 1000; ++k) {
    const Matrix grad_u = s.u - target;  // L(U) = ½‖U − U*‖_F²
    const NeumannDiagnostics d = neumann_step(s, step(opt, grad_pullback(s, grad_u)));
    max_contraction = std::max(max_contraction, d.contraction_norm);
    if (d.reset_applied) max_post_reset = std::max(max_post_reset, d.drift);
    else max_drift = std::max(max_drift, d.drift);
    over += d.drift >= 1e-6;
  }
  const bool post_ok = max_post_reset < 1e-10 * n;
  const bool all_ok = max_drift < 1e-6 && over == 0;
  return {post_ok && all_ok,
          fmt::format("post-reset max drift {:.3e} (< {:.1e}: {}); between-reset max drift {:.3e} "
                      "(< 1e-6: {}, {} of 1000 steps over); max contraction {:.3e}",
                      max_post_reset, 1e-10 * n, post_ok ? "ok" : "no", max_drift, all_ok ? "ok" : "no", over,
                      max_contraction)};
}

CellParams random_gru(std::size_t n, std::size_t m, Rng& rng) {
  CellParams p = make_zero_params(Variant::GRU, n, m);
  const double scale = rng.uniform(0.05, 3.0) / std::sqrt(static_cast<double>(n));
  p.for_each([&](const char*, Matrix& w) { w = random_matrix(w.rows(), w.cols(), rng, scale); });
  for (Matrix* b : {&p.b_r, &p.b_u, &p.b_c}) *b = random_matrix(n, 1, rng, 2.0);
  return p;
}

Outcome c6_jacobian_bound() {
  const std::size_t n = 32, m = 8;
  Rng rng(6);
  std::size_t violations = 0;
  double min_slack = 1e300, worst_fd = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const CellParams p = random_gru(n, m, rng);
    const Matrix x = random_matrix(m, 1, rng);
    const Matrix h = random_matrix(n, 1, rng);
    const StepCache cache = gru_forward(p, x, h);
    const BoundReport r = compute_bound(cache, p);
    const double rhs = r.alpha + r.beta * r.u_c_norm + 1e-10;
    violations += r.measured > rhs;
    min_slack = std::min(min_slack, r.slack);
    if (i < 50) {
      const Matrix jac = jacobian_h(p, cache).jac;
      const double step = 1e-6;
      for (std::size_t j = 0; j < n; ++j) {
        Matrix hp = h, hm = h;
        hp(j, 0) += step;
        hm(j, 0) -= step;
        const Matrix fp = gru_forward(p, x, hp).h, fm = gru_forward(p, x, hm).h;
        for (std::size_t k = 0; k < n; ++k) {
          worst_fd = std::max(worst_fd, std::abs((fp(k, 0) - fm(k, 0)) / (2 * step) - jac(k, j)));
        }
      }
    }
  }
  return {violations == 0 && worst_fd < 1e-6,
          fmt::format("1000 states: {} violations, min slack {:.3e}; Jacobian vs FD on 50: max entry err {:.3e}",
                      violations, min_slack, worst_fd)};
}

Outcome c7_gate_bounds() {
  const std::size_t n = 32, m = 8;
  Rng rng(7);
  bool ok = true;
  double max_delta = 0.0, alpha_excess = -1e300, beta_excess = -1e300;
  for (int i = 0; i < 500; ++i) {
    const CellParams p = random_gru(n, m, rng);
    const StepCache cache = gru_forward(p, random_matrix(m, 1, rng), random_matrix(n, 1, rng));
    const BoundReport r = compute_bound(cache, p);
    max_delta = std::max({max_delta, r.delta_u, r.delta_r});
    alpha_excess = std::max(alpha_excess, r.alpha - (0.5 * r.u_u_norm + 1));
    beta_excess = std::max(beta_excess, r.beta - (0.25 * r.u_r_norm + 1));
  }
  ok = ok && max_delta <= 0.25 && alpha_excess <= 1e-12 && beta_excess <= 1e-12;

  std::map<SaturationRegime, double> worst;
  for (int trial = 0; trial < 5; ++trial) {
    const CellParams p = random_gru(n, m, rng);
    for (auto regime : {SaturationRegime::Mixed, SaturationRegime::UpdateClosed,
                        SaturationRegime::UpdateOpenResetClosed, SaturationRegime::UpdateOpenResetOpen}) {
      SweepOptions o;
      o.regime = regime;
      o.samples = 100;
      o.seed = mix_seed(trial, static_cast<std::uint64_t>(regime));
      const SweepSummary s = saturation_sweep(p, o);
      worst[regime] = std::max(worst[regime], s.max_alpha_plus_beta);
      max_delta = std::max({max_delta, s.max_delta_u, s.max_delta_r});
    }
  }
  const bool sweeps_ok = worst[SaturationRegime::Mixed] <= 2.05 &&
                         worst[SaturationRegime::UpdateClosed] <= 1.05 &&
                         worst[SaturationRegime::UpdateOpenResetClosed] <= 1.05 &&
                         worst[SaturationRegime::UpdateOpenResetOpen] <= 1.05;

  CellParams nc = make_zero_params(Variant::NCGRU, n, m);
  nc.for_each([&](const char*, Matrix& w) { w = random_matrix(w.rows(), w.cols(), rng, 0.3); });
  nc.u_r = cayley_transform(init_skew(n, 71), make_scaling(n, 10));
  nc.u_c = cayley_transform(init_skew(n, 72), make_scaling(n, 16));
  SweepOptions o;
  o.regime = SaturationRegime::Mixed;
  o.samples = 200;
  o.seed = 73;
  const SweepSummary ncs = saturation_sweep(nc, o);
  const bool nc_ok = ncs.max_measured <= 2.05;

  ok = ok && sweeps_ok && nc_ok;
  return {ok, fmt::format("max δ {:.6f}; α−(½‖U_u‖+1) ≤ {:.3e}, β−(¼‖U_r‖+1) ≤ {:.3e}; α+β mixed {:.4f}, "
                          "u≈0 {:.4f}, u≈1 r≈0 {:.4f}, u≈1 r≈1 {:.4f}; NC-GRU saturated measured {:.4f}",
                          max_delta, alpha_excess, beta_excess, worst[SaturationRegime::Mixed],
                          worst[SaturationRegime::UpdateClosed], worst[SaturationRegime::UpdateOpenResetClosed],
                          worst[SaturationRegime::UpdateOpenResetOpen], ncs.max_measured)};
}

Outcome c8_copying_baseline() {
  bool ok = true;
  std::string detail;
  for (std::size_t T : {100, 1000}) {
    const double measured = memoryless_copying_loss(gen_copying(T, 10000, 8 + T));
    const double formula = 10.0 * std::log(8.0) / static_cast<double>(T + 20);
    const double rel = std::abs(measured - formula) / formula;
    ok = ok && rel < 0.01;
    detail += fmt::format("T={}: {:.6g} vs {:.6g} (rel {:.2e}); ", T, measured, formula, rel);
  }
  const double gru_plateau = 2.039e-2;
  const double rel_plateau = std::abs(copying_baseline(1000) - gru_plateau) / gru_plateau;
  ok = ok && rel_plateau < 0.01;
  return {ok, detail + fmt::format("10·ln8/1020 = {:.5g} vs 2.039e-2 (rel {:.2e})", copying_baseline(1000), rel_plateau)};
}

ExperimentConfig adding_config() {
  ExperimentConfig c;
  c.task.name = "adding";
  c.task.T = 100;
  c.model.variant = Variant::NCGRU;
  c.model.hidden = 32;
  c.model.ortho_set = {false, false, true};
  c.model.num_neg = 16;
  c.model.neumann_order = 2;
  c.model.reset_every = 50;
  c.optimizer.kind = OptimizerKind::Adam;
  c.optimizer.lr = 1e-3;
  c.train.iterations = 5000;
  c.train.batch_size = 50;
  c.train.eval_every = 100;
  c.train.eval_batch_size = 500;
  c.train.seed = 1;
  return c;
}

ExperimentConfig parenthesis_config(Variant v, std::size_t hidden) {
  ExperimentConfig c;
  c.task.name = "parenthesis";
  c.task.T = 100;
  c.task.n_pairs = 10;
  c.model.variant = v;
  c.model.hidden = hidden;
  c.model.ortho_set = v == Variant::NCGRU ? OrthoSet{true, false, true} : OrthoSet{};
  c.model.num_neg = hidden / 2;
  c.optimizer.kind = OptimizerKind::Adam;
  c.optimizer.lr = 1e-3;
  c.train.iterations = 3000;
  c.train.batch_size = 50;
  c.train.eval_every = 100;
  c.train.eval_batch_size = 500;
  c.train.seed = 1;
  return c;
}

double minutes_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
}

Outcome c9_adding() {
  const auto t0 = std::chrono::steady_clock::now();
  const RunResult run = run_training(adding_config(), g_workdir / "c9");
  const double minutes = minutes_since(t0);
  const auto eval = final_eval_loss(run);

  ExperimentConfig no_reset = adding_config();
  no_reset.model.reset_every = 0;
  const RunResult nr = run_training(no_reset, g_workdir / "c9_no_reset");
  const auto eval_nr = final_eval_loss(nr);

  const bool ok = !run.aborted && eval && *eval < 0.05 && minutes < 15.0 && !nr.aborted && eval_nr &&
                  *eval_nr < 0.05;
  return {ok, fmt::format("final eval MSE {:.4g} (< 0.05, baseline 1/6) in {:.1f} min; without resets {:.4g}",
                          eval.value_or(NAN), minutes, eval_nr.value_or(NAN))};
}

Outcome c10_parenthesis() {
  const auto t0 = std::chrono::steady_clock::now();
  const OrthoSet nc_set{true, false, true};
  const auto [in, out] = task_dims(parenthesis_config(Variant::NCGRU, 48).task);
  const std::size_t budget = parameter_count(Variant::NCGRU, nc_set, 48, in, out);
  const std::size_t gru_hidden = match_hidden_size(budget, Variant::GRU, {}, in, out);
  const RunResult nc = run_training(parenthesis_config(Variant::NCGRU, 48), g_workdir / "c10_ncgru");
  const RunResult gru = run_training(parenthesis_config(Variant::GRU, gru_hidden), g_workdir / "c10_gru");
  const double minutes = minutes_since(t0);
  const auto e_nc = final_eval_loss(nc), e_gru = final_eval_loss(gru);
  const bool ok = e_nc && e_gru && !nc.aborted && !gru.aborted && *e_nc <= *e_gru && minutes < 20.0;
  return {ok, fmt::format("NC-GRU(U_r,U_c) n=48 ({} params) eval CE {:.5g} vs GRU n={} ({} params) {:.5g}; {:.1f} min",
                          budget, e_nc.value_or(NAN), gru_hidden,
                          parameter_count(Variant::GRU, {}, gru_hidden, in, out), e_gru.value_or(NAN), minutes)};
}

Outcome c11_norm_monitor() {
  const fs::path csv = g_workdir / "c9" / "metrics.csv";
  std::ifstream in(csv);
  if (!in) return {false, "missing " + csv.string() + " (criterion 9 must run first)"};
  std::string line;
  std::getline(in, line);
  std::size_t rows = 0, bad = 0;
  double worst = 0.0;
  while (std::getline(in, line)) {
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    ++rows;
    if (cols.size() < 5 || cols[4].empty()) {
      ++bad;
      continue;
    }
    const double c = std::stod(cols[4]);
    worst = std::max(worst, c);
    bad += !(c < 1.0);
  }
  return {rows == 5000 && bad == 0,
          fmt::format("{} rows, {} missing or ≥ 1, max contraction_norm {:.4e}", rows, bad, worst)};
}

Outcome c12_optimizer_skew() {
  const std::size_t n = 16;
  Rng rng(12);
  double worst = 0.0;
  for (auto kind : {OptimizerKind::SGD, OptimizerKind::RMSProp, OptimizerKind::Adam}) {
    OptimizerConfig oc;
    oc.kind = kind;
    OptimizerState s = make_optimizer_state(oc, n * n);
    for (int k = 0; k < 100; ++k) {
      worst = std::max(worst, skew_defect(step(s, random_skew(n, rng, std::pow(10.0, rng.uniform(-4, 2))))));
    }
  }
  return {worst < 1e-13, fmt::format("300 steps, max |δA+δAᵀ| = {:.3e}", worst)};
}

Outcome c13_determinism() {
  bool ok = true;
  std::string detail;
  auto twice = [&](const std::string& label, ExperimentConfig cfg) {
    run_training(cfg, g_workdir / ("c13_" + label + "_a"));
    run_training(cfg, g_workdir / ("c13_" + label + "_b"));
    const std::string a = slurp(g_workdir / ("c13_" + label + "_a") / "metrics.csv");
    const std::string b = slurp(g_workdir / ("c13_" + label + "_b") / "metrics.csv");
    const bool same = !a.empty() && a == b;
    ok = ok && same;
    detail += fmt::format("{}: {} bytes {}; ", label, a.size(), same ? "identical" : "DIFFER");
  };
  ExperimentConfig add = adding_config();
  add.train.iterations = 500;
  twice("adding", add);
  ExperimentConfig nc = parenthesis_config(Variant::NCGRU, 48);
  nc.train.iterations = 200;
  twice("parenthesis_ncgru", nc);
  ExperimentConfig gru = parenthesis_config(Variant::GRU, 42);
  gru.train.iterations = 200;
  twice("parenthesis_gru", gru);
  ExperimentConfig inv = adding_config();
  inv.train.iterations = 200;
  inv.model.exact_inverse_mode = true;
  twice("adding_inverse", inv);
  return {ok, detail};
}

const std::map<int, std::pair<std::string, std::function<Outcome()>>>& registry() {
  static const std::map<int, std::pair<std::string, std::function<Outcome()>>> r{
      {1, {"Cayley orthogonality", c1_cayley_orthogonality}},
      {2, {"gradient pullback vs finite differences", c2_pullback}},
      {3, {"BPTT vs finite differences", c3_bptt}},
      {4, {"Neumann order law", c4_order_law}},
      {5, {"drift control", c5_drift}},
      {6, {"Jacobian norm bound", c6_jacobian_bound}},
      {7, {"gate bounds and saturation sweeps", c7_gate_bounds}},
      {8, {"copying baseline identity", c8_copying_baseline}},
      {9, {"desk-scale adding run", c9_adding}},
      {10, {"desk-scale parenthesis run", c10_parenthesis}},
      {11, {"contraction-norm monitor", c11_norm_monitor}},
      {12, {"optimizer skew preservation", c12_optimizer_skew}},
      {13, {"determinism", c13_determinism}},
  };
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NC-GRU acceptance criteria"};
  std::vector<int> ids;
  bool all = false;
  std::string workdir;
  app.add_option("--criterion", ids, "Criterion number (repeatable)")->check(CLI::Range(1, 13));
  app.add_flag("--all", all, "Run every criterion in order");
  app.add_option("--workdir", workdir, "Directory for training outputs");
  CLI11_PARSE(app, argc, argv);
  if (!workdir.empty()) g_workdir = workdir;
  fs::create_directories(g_workdir);
  if (all) {
    ids.clear();
    for (const auto& [id, _] : registry()) ids.push_back(id);
  }
  if (ids.empty()) {
    std::cerr << "nothing to run; pass --criterion N or --all\n";
    return 2;
  }

  int failures = 0;
  for (int id : ids) {
    const auto& [name, fn] = registry().at(id);
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << fmt::format("[{}] criterion {:>2} {}: {} [{:.1f}s]\n", o.pass ? "PASS" : "FAIL", id, name,
                             o.detail, secs)
              << std::flush;
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
