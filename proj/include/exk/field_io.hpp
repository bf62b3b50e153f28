#pragma once

#include <memory>
#include <string>

#include <json.hpp>

#include "exk/field.hpp"

namespace exk {

/// Builds a model from either {"field": {...}} or the inner object:
///   {"type": "cosine"}
///   {"type": "spectral_sum", "atoms": [{"freq": [...], "weight": w}, ...], "offset_var": s}
///   {"type": "gaussian_increment", "dim": N, "scale": l}
/// Throws ConfigError on malformed input.
std::unique_ptr<FieldModel> model_from_json(const nlohmann::json& spec);

nlohmann::json model_to_json(const FieldModel& model);

}  // namespace exk
