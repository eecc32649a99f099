#pragma once

#include <json.hpp>

#include "ncgru/cells.hpp"
#include "ncgru/linalg.hpp"
#include "ncgru/optim.hpp"
#include "ncgru/orthocore.hpp"

namespace ncgru {

/// Matrix as {"rows", "cols", "data"} with row-major data.
nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

/// {"n", "a", "d", "a_tilde", "u", "neumann_order", "reset_every",
///  "steps_since_reset", "steps"}
nlohmann::json skew_to_json(const SkewOrthogonal& s);
SkewOrthogonal skew_from_json(const nlohmann::json& j);

nlohmann::json optimizer_to_json(const OptimizerState& s);
OptimizerState optimizer_from_json(const nlohmann::json& j);

nlohmann::json cell_to_json(const CellParams& p);
CellParams cell_from_json(const nlohmann::json& j);

}  // namespace ncgru
