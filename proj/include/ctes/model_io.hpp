#pragma once

#include <string>

#include <json.hpp>

#include "ctes/methods.hpp"

namespace ctes {

inline constexpr int kModelFormatVersion = 1;

nlohmann::json model_to_json(const FittedModel& model);
/// Throws VersionMismatch for an unknown format version and ParseError for
/// missing or malformed fields.
FittedModel model_from_json(const nlohmann::json& j);

void save_model(const FittedModel& model, const std::string& path);
/// ParseError::offset() is the byte position of a syntax error.
FittedModel load_model(const std::string& path);

}  // namespace ctes
