#include "plshoot/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "plshoot/error.hpp"

namespace plshoot {

namespace {

using nlohmann::json;

void only_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw UsageError(where + " must be a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) throw UsageError("unknown key '" + it.key() + "' in " + where);
}

double number(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) throw UsageError("missing key '" + key + "' in " + where);
  const json& v = obj.at(key);
  if (!v.is_number()) throw UsageError("key '" + key + "' in " + where + " must be a number");
  return v.get<double>();
}

std::vector<double> numbers(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) throw UsageError("missing key '" + key + "' in " + where);
  const json& v = obj.at(key);
  if (!v.is_array()) throw UsageError("key '" + key + "' in " + where + " must be an array");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw UsageError("array '" + key + "' in " + where + " must hold numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace

Weight weight_from_json(const json& node, double p) {
  only_keys(node, {"family", "params"}, "weight");
  if (!node.contains("family") || !node["family"].is_string()) throw UsageError("weight.family must be a string");
  std::string fam = node["family"];
  json params = node.value("params", json::object());
  std::string where = "weight.params (" + fam + ")";
  if (fam == "constant") {
    only_keys(params, {}, where);
    return Weight::constant();
  }
  if (fam == "power") {
    only_keys(params, {"theta"}, where);
    return Weight::power(number(params, "theta", where));
  }
  if (fam == "matukuma") {
    only_keys(params, {"sigma"}, where);
    return Weight::matukuma(number(params, "sigma", where));
  }
  if (fam == "stellar") {
    only_keys(params, {"sigma"}, where);
    return Weight::stellar(number(params, "sigma", where));
  }
  if (fam == "power_general") {
    only_keys(params, {"k", "l", "s", "sigma", "N"}, where);
    return Weight::power_general(number(params, "k", where), number(params, "l", where),
                                 number(params, "s", where), number(params, "sigma", where),
                                 number(params, "N", where), p);
  }
  if (fam == "power_log") {
    only_keys(params, {"theta", "a_exp"}, where);
    return Weight::power_log(number(params, "theta", where), number(params, "a_exp", where));
  }
  if (fam == "log_gaussian") {
    only_keys(params, {"theta"}, where);
    return Weight::log_gaussian(number(params, "theta", where));
  }
  if (fam == "tabulated") {
    only_keys(params, {"r", "K", "dK"}, where);
    std::vector<double> dK;
    if (params.contains("dK")) dK = numbers(params, "dK", where);
    return Weight::tabulated(numbers(params, "r", where), numbers(params, "K", where), dK);
  }
  if (fam == "closure") throw UsageError("closure weights cannot be read from a config file");
  throw UsageError("unknown weight family '" + fam + "'");
}

Nonlinearity nonlinearity_from_json(const json& node) {
  only_keys(node, {"family", "params"}, "nonlinearity");
  if (!node.contains("family") || !node["family"].is_string())
    throw UsageError("nonlinearity.family must be a string");
  std::string fam = node["family"];
  json params = node.value("params", json::object());
  std::string where = "nonlinearity.params (" + fam + ")";
  if (fam == "power_diff") {
    only_keys(params, {"q1", "q2"}, where);
    return Nonlinearity::power_diff(number(params, "q1", where), number(params, "q2", where));
  }
  if (fam == "closure") throw UsageError("closure nonlinearities cannot be read from a config file");
  throw UsageError("unknown nonlinearity family '" + fam + "'");
}

ProblemModel model_from_json(const json& doc) {
  only_keys(doc, {"p", "n", "weight", "nonlinearity"}, "model config");
  for (const char* k : {"weight", "nonlinearity"})
    if (!doc.contains(k)) throw UsageError(std::string("missing key '") + k + "' in model config");
  double p = number(doc, "p", "model config");
  double n = number(doc, "n", "model config");
  Parameters params(p, n);
  Weight w = weight_from_json(doc["weight"], p);
  if (w.family() == "power_general") {
    double N = w.params()["N"], k = w.params()["k"];
    if (std::abs(N + k - n) > 1e-12 * n)
      throw DomainError("power_general weight lives in dimension N + k, which must equal n",
                        {{"N", N}, {"k", k}, {"n", n}});
  }
  return ProblemModel(params, std::move(w), nonlinearity_from_json(doc["nonlinearity"]));
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("invalid JSON in '" + path + "': " + e.what());
  }
}

ProblemModel load_model(const std::string& path) { return model_from_json(read_json_file(path)); }

json model_to_json(const ProblemModel& model) {
  if (model.weight.family() == "closure" || model.nonlinearity.family() == "closure")
    throw DomainError("closure-based models have no config representation");
  return {{"p", model.params.p},
          {"n", model.params.n},
          {"weight", {{"family", model.weight.family()}, {"params", model.weight.params()}}},
          {"nonlinearity", {{"family", model.nonlinearity.family()}, {"params", model.nonlinearity.params()}}}};
}

json to_json(const HypothesisReport& rep) {
  json checks = json::array();
  for (const auto& c : rep.checks) {
    json w = nullptr;
    if (c.witness) w = {{"at", c.witness->at}, {"detail", c.witness->detail}};
    checks.push_back({{"name", c.name}, {"pass", c.pass}, {"witness", w}});
  }
  return {{"pass", rep.passed()}, {"checks", checks}, {"grid", rep.grid}};
}

std::string format_double(double v) {
  if (!std::isfinite(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace plshoot
