#include "ncgru/serialize.hpp"

#include "ncgru/errors.hpp"

namespace ncgru {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()},
          {"cols", m.cols()},
          {"data", std::vector<double>(m.values().begin(), m.values().end())}};
}

Matrix matrix_from_json(const json& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("data").get<std::vector<double>>());
}

json skew_to_json(const SkewOrthogonal& s) {
  return {{"n", s.dim()},
          {"a", matrix_to_json(s.a)},
          {"d", s.d.storage()},
          {"a_tilde", matrix_to_json(s.a_tilde)},
          {"u", matrix_to_json(s.u)},
          {"neumann_order", s.neumann_order},
          {"reset_every", s.reset_every},
          {"steps_since_reset", s.steps_since_reset},
          {"steps", s.steps}};
}

SkewOrthogonal skew_from_json(const json& j) {
  SkewOrthogonal s;
  s.a = matrix_from_json(j.at("a"));
  s.d = Vector(j.at("d").get<std::vector<double>>());
  s.a_tilde = matrix_from_json(j.at("a_tilde"));
  s.u = matrix_from_json(j.at("u"));
  s.neumann_order = j.at("neumann_order").get<int>();
  s.reset_every = j.at("reset_every").get<std::size_t>();
  s.steps_since_reset = j.at("steps_since_reset").get<std::size_t>();
  s.steps = j.at("steps").get<std::size_t>();
  const std::size_t n = j.at("n").get<std::size_t>();
  if (s.a.rows() != n || s.d.size() != n || s.a_tilde.rows() != n || s.u.rows() != n) {
    throw ShapeError("skew_from_json: inconsistent dimensions");
  }
  if (skew_defect(s.a) != 0.0) throw ContractError("skew_from_json: A is not skew-symmetric");
  return s;
}

json optimizer_to_json(const OptimizerState& s) {
  return {{"kind", to_string(s.config.kind)},
          {"lr", s.config.learning_rate},
          {"beta1", s.config.beta1},
          {"beta2", s.config.beta2},
          {"epsilon", s.config.epsilon},
          {"decay", s.config.decay},
          {"first_moment", s.first_moment},
          {"second_moment", s.second_moment},
          {"step_count", s.step_count}};
}

OptimizerState optimizer_from_json(const json& j) {
  OptimizerState s;
  s.config.kind = optimizer_kind_from_string(j.at("kind").get<std::string>());
  s.config.learning_rate = j.at("lr").get<double>();
  s.config.beta1 = j.at("beta1").get<double>();
  s.config.beta2 = j.at("beta2").get<double>();
  s.config.epsilon = j.at("epsilon").get<double>();
  s.config.decay = j.at("decay").get<double>();
  s.first_moment = j.at("first_moment").get<std::vector<double>>();
  s.second_moment = j.at("second_moment").get<std::vector<double>>();
  s.step_count = j.at("step_count").get<std::size_t>();
  return s;
}

json cell_to_json(const CellParams& p) {
  json params = json::object();
  p.for_each([&](const char* name, const Matrix& m) { params[name] = matrix_to_json(m); });
  json ortho = json::array();
  if (p.ortho.u_r) ortho.push_back("U_r");
  if (p.ortho.u_u) ortho.push_back("U_u");
  if (p.ortho.u_c) ortho.push_back("U_c");
  return {{"variant", to_string(p.variant)},
          {"hidden", p.hidden()},
          {"input", p.input()},
          {"ortho_set", ortho},
          {"params", params}};
}

CellParams cell_from_json(const json& j) {
  const std::string v = j.at("variant").get<std::string>();
  if (v != "gru" && v != "ncgru") throw ConfigError("cell_from_json: unknown variant '" + v + "'");
  CellParams p = make_zero_params(v == "gru" ? Variant::GRU : Variant::NCGRU,
                                  j.at("hidden").get<std::size_t>(),
                                  j.at("input").get<std::size_t>());
  for (const auto& name : j.at("ortho_set")) {
    const auto s = name.get<std::string>();
    if (s == "U_r") p.ortho.u_r = true;
    else if (s == "U_u") p.ortho.u_u = true;
    else if (s == "U_c") p.ortho.u_c = true;
    else throw ConfigError("cell_from_json: unknown ortho weight '" + s + "'");
  }
  const json& params = j.at("params");
  p.for_each([&](const char* name, Matrix& m) { m = matrix_from_json(params.at(name)); });
  validate_shapes(p);
  return p;
}

}  // namespace ncgru
