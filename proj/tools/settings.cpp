#include "settings.hpp"

#include <functional>
#include <map>

#include "tsrisk/error.hpp"

namespace tsrisk::cli {

namespace {

using Setter = std::function<void(Settings&, const nlohmann::json&)>;

template <typename T>
Setter assign(T Settings::*field) {
  return [field](Settings& s, const nlohmann::json& v) { s.*field = v.get<T>(); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"case", assign(&Settings::case_path)},
      {"out", assign(&Settings::out)},
      {"tol", assign(&Settings::tol)},
      {"max_iter", assign(&Settings::max_iter)},
      {"enforce_q_limits", assign(&Settings::enforce_q_limits)},
      {"penetration", assign(&Settings::penetration)},
      {"replace", assign(&Settings::replace)},
      {"gen_scale", assign(&Settings::gen_scale)},
      {"load_scale", assign(&Settings::load_scale)},
      {"line", [](Settings& s, const nlohmann::json& v) {
         s.line = v.is_string() ? v.get<std::string>() : std::to_string(v.get<int>());
       }},
      {"type", assign(&Settings::type)},
      {"location", assign(&Settings::location)},
      {"fct", assign(&Settings::fct)},
      {"t_apply", assign(&Settings::t_apply)},
      {"no_fault", assign(&Settings::no_fault)},
      {"trip", assign(&Settings::trip)},
      {"dt", assign(&Settings::dt)},
      {"t_end", assign(&Settings::t_end)},
      {"v_threshold", assign(&Settings::v_threshold)},
      {"f_threshold", assign(&Settings::f_threshold)},
      {"include_dfig_frequency", assign(&Settings::include_dfig_frequency)},
      {"seed", assign(&Settings::seed)},
      {"n", assign(&Settings::n)},
      {"risk_mode", assign(&Settings::risk_mode)},
      {"workers", assign(&Settings::workers)},
      {"window", assign(&Settings::window)},
      {"threshold", assign(&Settings::threshold)},
      {"checkpoint", assign(&Settings::checkpoint)},
      {"bins", assign(&Settings::bins)},
      {"stop_at_convergence", assign(&Settings::stop_at_convergence)},
      {"fct_mean", assign(&Settings::fct_mean)},
      {"fct_std", assign(&Settings::fct_std)},
      {"axis", assign(&Settings::axis)},
      {"points", assign(&Settings::points)},
  };
  return table;
}

}  // namespace

void apply_config(Settings& s, const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("config document must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key == "comment") continue;
    auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("config: unknown key '" + key + "'");
    try {
      it->second(s, value);
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config: key '" + key + "' has the wrong type");
    }
  }
}

nlohmann::ordered_json to_json(const Settings& s) {
  nlohmann::ordered_json j;
  j["case"] = s.case_path;
  j["out"] = s.out;
  j["tol"] = s.tol;
  j["max_iter"] = s.max_iter;
  j["enforce_q_limits"] = s.enforce_q_limits;
  j["penetration"] = s.penetration;
  j["replace"] = s.replace;
  j["gen_scale"] = s.gen_scale;
  j["load_scale"] = s.load_scale;
  j["line"] = s.line;
  j["type"] = s.type;
  j["location"] = s.location;
  j["fct"] = s.fct;
  j["t_apply"] = s.t_apply;
  j["no_fault"] = s.no_fault;
  j["trip"] = s.trip;
  j["dt"] = s.dt;
  j["t_end"] = s.t_end;
  j["v_threshold"] = s.v_threshold;
  j["f_threshold"] = s.f_threshold;
  j["include_dfig_frequency"] = s.include_dfig_frequency;
  j["seed"] = s.seed;
  j["n"] = s.n;
  j["risk_mode"] = s.risk_mode;
  j["workers"] = s.workers;
  j["window"] = s.window;
  j["threshold"] = s.threshold;
  j["checkpoint"] = s.checkpoint;
  j["bins"] = s.bins;
  j["stop_at_convergence"] = s.stop_at_convergence;
  j["fct_mean"] = s.fct_mean;
  j["fct_std"] = s.fct_std;
  j["axis"] = s.axis;
  j["points"] = s.points;
  return j;
}

std::filesystem::path default_case_path() {
  const std::filesystem::path installed = TSRISK_INSTALLED_CASE;
  if (std::filesystem::exists(installed)) return installed;
  return TSRISK_SOURCE_CASE;
}

}  // namespace tsrisk::cli
