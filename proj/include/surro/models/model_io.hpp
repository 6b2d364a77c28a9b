#pragma once

#include <string>
#include <variant>

#include "json.hpp"
#include "surro/models/ensemble.hpp"
#include "surro/models/linear.hpp"
#include "surro/models/logistic.hpp"
#include "surro/models/tree.hpp"

namespace surro {

using AnyModel = std::variant<LinearModel, LogisticModel, TreeModel, EnsembleModel>;

// Logistic models return probabilities.
Vector predict(const AnyModel& model, const Matrix& features);

// {"kind": ..., "coefficients"/"intercept" | "nodes", "params"}. Doubles are
// written in shortest round-trip form, so predictions survive bit-exactly.
nlohmann::json model_to_json(const AnyModel& model);
AnyModel model_from_json(const nlohmann::json& doc);

nlohmann::json tree_params_to_json(const TreeParams& p);
TreeParams tree_params_from_json(const nlohmann::json& doc);

}  // namespace surro
