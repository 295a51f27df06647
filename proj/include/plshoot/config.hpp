#pragma once

#include <string>

#include "json.hpp"
#include "plshoot/model.hpp"

namespace plshoot {

// strict: unknown keys anywhere in the document are rejected
ProblemModel model_from_json(const nlohmann::json& doc);
ProblemModel load_model(const std::string& path);
nlohmann::json model_to_json(const ProblemModel& model);

Weight weight_from_json(const nlohmann::json& node, double p);
Nonlinearity nonlinearity_from_json(const nlohmann::json& node);

nlohmann::json to_json(const HypothesisReport& rep);

nlohmann::json read_json_file(const std::string& path);

// "%.17g"; non-finite values become empty strings in CSV and null in JSON
std::string format_double(double v);

}  // namespace plshoot
