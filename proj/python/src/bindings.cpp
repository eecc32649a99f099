#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ncgru/bounds.hpp"
#include "ncgru/cells.hpp"
#include "ncgru/errors.hpp"
#include "ncgru/gradcheck.hpp"
#include "ncgru/harness.hpp"
#include "ncgru/linalg.hpp"
#include "ncgru/optim.hpp"
#include "ncgru/orthocore.hpp"
#include "ncgru/tasks.hpp"

namespace py = pybind11;
using namespace ncgru;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-D array");
  const auto r = static_cast<std::size_t>(a.shape(0));
  const auto c = static_cast<std::size_t>(a.shape(1));
  return Matrix(r, c, std::vector<double>(a.data(), a.data() + r * c));
}

Vector to_vector(const Array& a) {
  if (a.ndim() != 1) throw ShapeError("expected a 1-D array");
  return Vector(std::vector<double>(a.data(), a.data() + a.shape(0)));
}

Array to_array(const Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

Array to_array(const Vector& v) {
  Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.values().begin(), v.values().end(), out.mutable_data());
  return out;
}

py::dict diag_dict(const NeumannDiagnostics& d) {
  py::dict o;
  o["contraction_norm"] = d.contraction_norm;
  o["drift"] = d.drift;
  o["step"] = d.step;
  o["reset_applied"] = d.reset_applied;
  o["contraction_warning"] = d.contraction_warning;
  return o;
}

py::object json_to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json py_to_json(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::list rows_to_list(const std::vector<MetricRow>& rows) {
  py::list out;
  for (const auto& r : rows) {
    py::dict d;
    d["step"] = r.step;
    d["train_loss"] = r.train_loss;
    d["eval_loss"] = r.eval_loss ? py::cast(*r.eval_loss) : py::none();
    d["drift"] = r.drift ? py::cast(*r.drift) : py::none();
    d["contraction_norm"] = r.contraction_norm ? py::cast(*r.contraction_norm) : py::none();
    d["wall_ms"] = r.wall_ms;
    out.append(d);
  }
  return out;
}

py::dict batch_dict(const TaskBatch& b) {
  py::dict d;
  d["task"] = b.task;
  d["T"] = b.T;
  d["seed"] = b.seed;
  py::array_t<double> inputs({b.steps(), b.input_dim, b.batch});
  auto* p = inputs.mutable_data();
  for (const Matrix& x : b.inputs) p = std::copy(x.values().begin(), x.values().end(), p);
  d["inputs"] = inputs;
  if (b.loss_kind == LossKind::MSE) {
    d["targets"] = py::array_t<double>(static_cast<py::ssize_t>(b.batch), b.target_value.data());
  } else {
    py::array_t<int> t({b.steps(), b.batch});
    auto* q = t.mutable_data();
    for (const auto& row : b.target_class) q = std::copy(row.begin(), row.end(), q);
    d["targets"] = t;
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Orthogonal GRU core: Cayley parameterization, Neumann updates, cells, tasks, training";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<RangeError>(m, "RangeError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<SingularityError>(m, "SingularityError", PyExc_ArithmeticError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_RuntimeError);

  m.def("matmul", [](const Array& a, const Array& b) { return to_array(matmul(to_matrix(a), to_matrix(b))); });
  m.def("exact_inverse", [](const Array& a) { return to_array(exact_inverse(to_matrix(a))); });
  m.def("spectral_norm", [](const Array& a, double tol, std::size_t max_iter) {
    return spectral_norm(to_matrix(a), tol, max_iter);
  }, py::arg("m"), py::arg("tol") = 1e-12, py::arg("max_iter") = 50);
  m.def("fro_dist_identity", [](const Array& a) { return fro_dist_identity(to_matrix(a)); });

  m.def("init_skew", [](std::size_t n, std::uint64_t seed) { return to_array(init_skew(n, seed)); },
        py::arg("n"), py::arg("seed"));
  m.def("make_scaling", [](std::size_t n, std::size_t num_neg) { return to_array(make_scaling(n, num_neg)); },
        py::arg("n"), py::arg("num_neg"));
  m.def("cayley_transform", [](const Array& a, const Array& d) {
    return to_array(cayley_transform(to_matrix(a), to_vector(d)));
  }, py::arg("a"), py::arg("d"));

  py::class_<SkewOrthogonal>(m, "SkewOrthogonal")
      .def(py::init([](const Array& a, const Array& d, int order, std::size_t reset_every) {
             return make_skew_orthogonal(to_matrix(a), to_vector(d), order, reset_every);
           }),
           py::arg("a"), py::arg("d"), py::arg("neumann_order") = 2, py::arg("reset_every") = 50)
      .def_property_readonly("a", [](const SkewOrthogonal& s) { return to_array(s.a); })
      .def_property_readonly("d", [](const SkewOrthogonal& s) { return to_array(s.d); })
      .def_property_readonly("a_tilde", [](const SkewOrthogonal& s) { return to_array(s.a_tilde); })
      .def_property_readonly("u", [](const SkewOrthogonal& s) { return to_array(s.u); })
      .def_readonly("neumann_order", &SkewOrthogonal::neumann_order)
      .def_readonly("reset_every", &SkewOrthogonal::reset_every)
      .def_readonly("steps", &SkewOrthogonal::steps)
      .def("grad_pullback", [](const SkewOrthogonal& s, const Array& g) {
        return to_array(grad_pullback(s, to_matrix(g)));
      })
      .def("neumann_step", [](SkewOrthogonal& s, const Array& da) { return diag_dict(neumann_step(s, to_matrix(da))); })
      .def("exact_step", [](SkewOrthogonal& s, const Array& da) { return diag_dict(exact_step(s, to_matrix(da))); })
      .def("reset", [](SkewOrthogonal& s) { reset(s); });

  m.def("modrelu", [](const Array& x, const Array& b) { return to_array(modrelu(to_vector(x), to_vector(b))); });

  m.def("adam_updates", [](const std::vector<Array>& grads, double lr) {
    OptimizerConfig cfg;
    cfg.learning_rate = lr;
    py::list out;
    if (grads.empty()) return out;
    const Matrix first = to_matrix(grads.front());
    OptimizerState s = make_optimizer_state(cfg, first.size());
    for (const auto& g : grads) out.append(to_array(step(s, to_matrix(g))));
    return out;
  }, py::arg("grads"), py::arg("lr") = 1e-3, "Adam updates for a stream of gradients of one parameter");

  m.def("generate_task", [](const std::string& name, std::size_t T, std::size_t count, std::uint64_t seed,
                            std::size_t alphabet_n, std::size_t n_pairs) {
    return batch_dict(generate_task(name, T, count, seed, alphabet_n, ParenthesisOptions{n_pairs, false}));
  }, py::arg("name"), py::arg("T"), py::arg("count"), py::arg("seed") = 1, py::arg("alphabet_n") = 10,
     py::arg("n_pairs") = 10);
  m.def("copying_baseline", &copying_baseline, py::arg("T"));
  m.def("memoryless_copying_loss", [](std::size_t T, std::size_t count, std::uint64_t seed) {
    return memoryless_copying_loss(gen_copying(T, count, seed));
  }, py::arg("T"), py::arg("count"), py::arg("seed") = 1);

  m.def("gradcheck", [](const std::string& scope, std::size_t n, std::size_t length, std::uint64_t seed) {
    GradcheckOptions o;
    o.hidden = n;
    o.length = length;
    o.seed = seed;
    const GradcheckReport r = run_gradcheck(gradcheck_scope_from_string(scope), o);
    py::dict d;
    d["passed"] = r.passed;
    d["max_rel_error"] = r.max_rel_error;
    d["tolerance"] = r.tolerance;
    d["zero_grad_exact"] = r.zero_grad_exact;
    py::dict per;
    for (const auto& e : r.entries) per[py::str(e.name)] = e.rel_error;
    d["entries"] = per;
    return d;
  }, py::arg("scope"), py::arg("n") = 4, py::arg("length") = 5, py::arg("seed") = 1);

  m.def("normalize_config", [](const py::object& cfg) { return json_to_py(config_to_json(config_from_json(py_to_json(cfg)))); },
        "Validate a config dict and return it with every default filled in");
  m.def("parameter_count", [](const std::string& variant, const std::vector<std::string>& ortho, std::size_t hidden,
                              std::size_t input_dim, std::size_t output_dim) {
    OrthoSet s;
    for (const auto& w : ortho) {
      s.u_r |= w == "U_r";
      s.u_u |= w == "U_u";
      s.u_c |= w == "U_c";
    }
    return parameter_count(variant == "gru" ? Variant::GRU : Variant::NCGRU, s, hidden, input_dim, output_dim);
  });
  m.def("train", [](const py::object& cfg, std::optional<std::filesystem::path> out_dir) {
    const ExperimentConfig c = config_from_json(py_to_json(cfg));
    RunResult r;
    {
      py::gil_scoped_release release;
      r = run_training(c, out_dir);
    }
    py::dict d;
    d["rows"] = rows_to_list(r.rows);
    d["aborted"] = r.aborted;
    d["abort_reason"] = r.abort_reason;
    d["contraction_warnings"] = r.contraction_warnings;
    d["checkpoint"] = json_to_py(checkpoint_to_json(r.final_state, c));
    return d;
  }, py::arg("config"), py::arg("out_dir") = py::none());
}
