#include "ncgru/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include <fmt/format.h>

#include "ncgru/cells.hpp"
#include "ncgru/errors.hpp"
#include "ncgru/orthocore.hpp"
#include "ncgru/rng.hpp"

namespace ncgru {

namespace {

constexpr double kKinkMargin = 1e-3;

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (double& e : m.values()) e = rng.uniform(-scale, scale);
  return m;
}

CellParams random_params(Variant variant, std::size_t n, std::size_t m, Rng& rng) {
  CellParams p = make_zero_params(variant, n, m);
  p.for_each([&](const char*, Matrix& w) { w = random_matrix(w.rows(), w.cols(), rng, 0.8); });
  return p;
}

/// Σ_t ⟨G_t, h_t⟩ over the caches.
double probe_loss(const std::vector<StepCache>& caches, const std::vector<Matrix>& probes) {
  double s = 0.0;
  for (std::size_t t = 0; t < caches.size(); ++t) {
    auto h = caches[t].h.values();
    auto g = probes[t].values();
    for (std::size_t k = 0; k < h.size(); ++k) s += h[k] * g[k];
  }
  return s;
}

bool near_kink(const CellParams& p, const std::vector<StepCache>& caches) {
  if (p.variant != Variant::NCGRU) return false;
  for (const auto& c : caches) {
    for (std::size_t i = 0; i < c.pre_c.rows(); ++i) {
      for (double x : c.pre_c.row(i)) {
        if (std::abs(x) < kKinkMargin || std::abs(std::abs(x) + p.modrelu_b(i, 0)) < kKinkMargin) return true;
      }
    }
  }
  return false;
}

void record(std::map<std::string, double>& worst, const std::string& name, double err) {
  auto& w = worst[name];
  w = std::max(w, err);
}

std::vector<double> to_vec(const Matrix& m) { return {m.values().begin(), m.values().end()}; }

/// Central differences of `f` over every entry of every parameter of `p`.
void check_params(CellParams p, const CellParams& analytic, const std::function<double(const CellParams&)>& f,
                  double step, const std::string& prefix, std::map<std::string, double>& worst) {
  std::map<std::string, const Matrix*> grads;
  analytic.for_each([&](const char* name, const Matrix& g) { grads[name] = &g; });
  std::vector<std::pair<std::string, Matrix*>> slots;
  p.for_each([&](const char* name, Matrix& w) { slots.emplace_back(name, &w); });
  for (auto& [name, w] : slots) {
    Matrix fd(w->rows(), w->cols());
    for (std::size_t k = 0; k < w->size(); ++k) {
      double& e = w->values()[k];
      const double saved = e;
      e = saved + step;
      const double plus = f(p);
      e = saved - step;
      const double minus = f(p);
      e = saved;
      fd.values()[k] = (plus - minus) / (2.0 * step);
    }
    record(worst, prefix + name, relative_error(to_vec(*grads.at(name)), to_vec(fd)));
  }
}

void run_cell(const GradcheckOptions& o, GradcheckReport& rep, std::map<std::string, double>& worst) {
  Rng rng(mix_seed(o.seed, 1));
  for (Variant variant : {Variant::GRU, Variant::NCGRU}) {
    const std::string prefix = to_string(variant) + ".";
    for (std::size_t inst = 0; inst < o.instances;) {
      const CellParams p = random_params(variant, o.hidden, o.input, rng);
      const Matrix x = random_matrix(o.input, o.batch, rng);
      const Matrix h0 = random_matrix(o.hidden, o.batch, rng);
      const Matrix g = random_matrix(o.hidden, o.batch, rng);
      const StepCache cache = cell_forward(p, x, h0);
      if (near_kink(p, {cache})) {
        ++rep.rejected;
        continue;
      }
      ++inst;

      const CellBackward bw = cell_backward(p, cache, g);
      auto f = [&](const CellParams& q) { return probe_loss({cell_forward(q, x, h0)}, {g}); };
      check_params(p, bw.grads, f, o.fd_step, prefix, worst);

      Matrix fd_h(h0.rows(), h0.cols());
      Matrix hp = h0;
      for (std::size_t k = 0; k < hp.size(); ++k) {
        const double saved = hp.values()[k];
        hp.values()[k] = saved + o.fd_step;
        const double plus = probe_loss({cell_forward(p, x, hp)}, {g});
        hp.values()[k] = saved - o.fd_step;
        const double minus = probe_loss({cell_forward(p, x, hp)}, {g});
        hp.values()[k] = saved;
        fd_h.values()[k] = (plus - minus) / (2.0 * o.fd_step);
      }
      record(worst, prefix + "h_prev", relative_error(to_vec(bw.grad_h_prev), to_vec(fd_h)));

      const CellBackward zero = cell_backward(p, cache, Matrix(o.hidden, o.batch));
      zero.grads.for_each([&](const char*, const Matrix& m) {
        for (double e : m.values()) rep.zero_grad_exact = rep.zero_grad_exact && e == 0.0;
      });
      for (double e : zero.grad_h_prev.values()) rep.zero_grad_exact = rep.zero_grad_exact && e == 0.0;
    }
    rep.instances += o.instances;
  }
}

void run_cayley(const GradcheckOptions& o, GradcheckReport& rep, std::map<std::string, double>& worst) {
  Rng rng(mix_seed(o.seed, 2));
  const std::size_t n = o.hidden;
  for (std::size_t inst = 0; inst < o.instances; ++inst) {
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        a(i, j) = rng.uniform(-1.0, 1.0);
        a(j, i) = -a(i, j);
      }
    }
    const Vector d = make_scaling(n, rng.below(n + 1));
    const Matrix g = random_matrix(n, n, rng);
    auto f = [&](const Matrix& m) {
      const Matrix u = cayley_transform(m, d);
      double s = 0.0;
      for (std::size_t k = 0; k < u.size(); ++k) s += u.values()[k] * g.values()[k];
      return s;
    };
    const Matrix analytic = grad_pullback(make_skew_orthogonal(a, d), g);

    Matrix fd(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        Matrix ap = a, am = a;
        ap(i, j) += o.fd_step;
        ap(j, i) -= o.fd_step;
        am(i, j) -= o.fd_step;
        am(j, i) += o.fd_step;
        fd(i, j) = (f(ap) - f(am)) / (2.0 * o.fd_step);
        fd(j, i) = -fd(i, j);
      }
    }
    record(worst, "A", relative_error(to_vec(analytic), to_vec(fd)));
    ++rep.instances;
  }
}

void run_bptt(const GradcheckOptions& o, GradcheckReport& rep, std::map<std::string, double>& worst) {
  Rng rng(mix_seed(o.seed, 3));
  for (Variant variant : {Variant::GRU, Variant::NCGRU}) {
    const std::string prefix = to_string(variant) + ".";
    for (std::size_t inst = 0; inst < o.instances;) {
      const CellParams p = random_params(variant, o.hidden, o.input, rng);
      std::vector<Matrix> inputs, probes;
      for (std::size_t t = 0; t < o.length; ++t) {
        inputs.push_back(random_matrix(o.input, o.batch, rng));
        probes.push_back(random_matrix(o.hidden, o.batch, rng));
      }
      if (near_kink(p, sequence_forward(p, inputs))) {
        ++rep.rejected;
        continue;
      }
      ++inst;

      LossHead head = [&](std::size_t t, const Matrix& h) -> std::optional<StepLoss> {
        StepLoss sl;
        for (std::size_t k = 0; k < h.size(); ++k) sl.loss += h.values()[k] * probes[t].values()[k];
        sl.grad_h = probes[t];
        return sl;
      };
      const BpttResult res = sequence_bptt(p, inputs, head);
      auto f = [&](const CellParams& q) { return probe_loss(sequence_forward(q, inputs), probes); };
      check_params(p, res.grads, f, o.fd_step, prefix, worst);
    }
    rep.instances += o.instances;
  }
}

}  // namespace

std::string to_string(GradcheckScope s) {
  switch (s) {
    case GradcheckScope::Cell: return "cell";
    case GradcheckScope::Cayley: return "cayley";
    case GradcheckScope::Bptt: return "bptt";
  }
  return "?";
}

GradcheckScope gradcheck_scope_from_string(const std::string& s) {
  for (auto scope : {GradcheckScope::Cell, GradcheckScope::Cayley, GradcheckScope::Bptt}) {
    if (to_string(scope) == s) return scope;
  }
  throw ConfigError("unknown gradcheck scope '" + s + "'");
}

double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("relative_error: length mismatch");
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    diff += (a[k] - b[k]) * (a[k] - b[k]);
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-8});
}

GradcheckReport run_gradcheck(GradcheckScope scope, const GradcheckOptions& opts) {
  if (opts.hidden < 2 || opts.input < 1 || opts.batch < 1 || opts.length < 1) {
    throw RangeError("gradcheck: sizes must be positive (hidden >= 2)");
  }
  GradcheckReport rep;
  rep.scope = scope;
  rep.tolerance = scope == GradcheckScope::Cayley ? 1e-6 : 1e-5;
  std::map<std::string, double> worst;
  switch (scope) {
    case GradcheckScope::Cell: run_cell(opts, rep, worst); break;
    case GradcheckScope::Cayley: run_cayley(opts, rep, worst); break;
    case GradcheckScope::Bptt: run_bptt(opts, rep, worst); break;
  }
  for (const auto& [name, err] : worst) {
    rep.entries.push_back({name, err});
    rep.max_rel_error = std::max(rep.max_rel_error, err);
  }
  rep.passed = rep.max_rel_error < rep.tolerance && rep.zero_grad_exact;
  return rep;
}

std::string format_report(const GradcheckReport& r) {
  std::string out = fmt::format("scope={} instances={} rejected={} tolerance={:g}\n", to_string(r.scope),
                                r.instances, r.rejected, r.tolerance);
  for (const auto& e : r.entries) out += fmt::format("  {:<20} {:.3e}\n", e.name, e.rel_error);
  if (r.scope == GradcheckScope::Cell) {
    out += fmt::format("  zero upstream gradient -> exact zeros: {}\n", r.zero_grad_exact ? "yes" : "no");
  }
  out += fmt::format("max_rel_error={:.3e} {}\n", r.max_rel_error, r.passed ? "PASS" : "FAIL");
  return out;
}

}  // namespace ncgru
