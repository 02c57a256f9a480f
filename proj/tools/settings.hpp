#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace tsrisk::cli {

/// Every knob the tool understands. Field names double as config-file keys.
struct Settings {
  std::string case_path;
  std::string out = "out";

  // power flow
  double tol = 1e-6;
  int max_iter = 20;
  bool enforce_q_limits = false;

  // scenario
  int penetration = 0;
  std::vector<std::string> replace;
  double gen_scale = 1.0;
  double load_scale = 1.0;

  // single fault
  std::string line = "16-17";
  std::string type = "LLL";
  int location = 50;
  double fct = 0.1;
  double t_apply = 1.0;
  bool no_fault = false;
  bool trip = true;

  // integration
  double dt = 0.005;
  double t_end = 10.0;

  // metrics
  double v_threshold = 0.05;
  double f_threshold = 0.5;
  bool include_dfig_frequency = false;

  // Monte Carlo
  std::uint64_t seed = 20240601;
  std::size_t n = 30000;
  std::string risk_mode = "sampled";
  unsigned workers = 1;
  std::size_t window = 5000;
  double threshold = 0.005;
  std::size_t checkpoint = 1000;
  std::size_t bins = 40;
  bool stop_at_convergence = true;
  double fct_mean = 0.2;
  double fct_std = 0.005;

  // sweep
  std::string axis = "penetration";
  std::vector<double> points;
};

/// Overwrites fields named in the config document. Unknown keys raise ConfigError.
void apply_config(Settings& s, const nlohmann::json& doc);
nlohmann::ordered_json to_json(const Settings& s);

/// Location of the bundled case: the installed copy, else the source tree.
std::filesystem::path default_case_path();

}  // namespace tsrisk::cli
