#include <cctype>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "settings.hpp"
#include "tsrisk/case_io.hpp"
#include "tsrisk/error.hpp"
#include "tsrisk/io.hpp"
#include "tsrisk/metrics.hpp"
#include "tsrisk/powerflow.hpp"
#include "tsrisk/riskmc.hpp"
#include "tsrisk/scenario.hpp"
#include "tsrisk/simulation.hpp"

namespace fs = std::filesystem;
using namespace tsrisk;
using tsrisk::cli::Settings;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitUnconverged = 3;

PowerSystemCase load_scenario(const Settings& s, double gen_scale, double load_scale,
                              int penetration) {
  PowerSystemCase c = load_case(s.case_path);
  const auto replaced = s.replace.empty() ? replacement_set(penetration) : s.replace;
  if (!replaced.empty()) c = apply_wind_penetration(c, replaced);
  if (gen_scale != 1.0) c = scale_generation(c, gen_scale);
  if (load_scale != 1.0) c = scale_load(c, load_scale);
  return c;
}

PowerSystemCase load_scenario(const Settings& s) {
  return load_scenario(s, s.gen_scale, s.load_scale, s.penetration);
}

int resolve_line(const PowerSystemCase& c, const std::string& text) {
  const auto dash = text.find('-');
  if (dash != std::string::npos && dash > 0) {
    const int a = std::stoi(text.substr(0, dash));
    const int b = std::stoi(text.substr(dash + 1));
    const auto id = c.find_branch_between(a, b);
    if (!id) throw ConfigError(fmt::format("no branch between buses {} and {}", a, b));
    return *id;
  }
  for (char ch : text)
    if (!std::isdigit(static_cast<unsigned char>(ch)))
      throw ConfigError("line must be a branch id or a bus pair such as 16-17, got '" + text + "'");
  return std::stoi(text);
}

SimulationOptions sim_options(const Settings& s) {
  SimulationOptions o;
  o.dt = s.dt;
  o.t_end = s.t_end;
  return o;
}

MetricOptions metric_options(const Settings& s) {
  MetricOptions m;
  m.voltage_threshold = s.v_threshold;
  m.frequency_threshold_hz = s.f_threshold;
  m.include_dfig_frequency = s.include_dfig_frequency;
  return m;
}

FaultDistributions distributions(const Settings& s) {
  FaultDistributions d;
  d.fct_mean = s.fct_mean;
  d.fct_std = s.fct_std;
  d.t_apply = s.t_apply;
  d.trip_line = s.trip;
  return d;
}

MonteCarloConfig mc_config(const Settings& s) {
  MonteCarloConfig c;
  c.n_max = s.n;
  c.seed = s.seed;
  c.mode = parse_risk_mode(s.risk_mode);
  c.window = s.window;
  c.threshold = s.threshold;
  c.checkpoint_every = s.checkpoint;
  c.workers = s.workers;
  c.stop_at_convergence = s.stop_at_convergence;
  return c;
}

std::string config_hash(const Settings& s) { return content_hash(cli::to_json(s).dump()); }

std::string to_text(const auto& writer) {
  std::ostringstream os;
  writer(os);
  return os.str();
}

int cmd_powerflow(const Settings& s) {
  const auto c = load_scenario(s);
  PowerFlowOptions opts;
  opts.tolerance = s.tol;
  opts.max_iterations = s.max_iter;
  opts.enforce_q_limits = s.enforce_q_limits;
  const auto sol = solve_power_flow(c, opts);
  const auto rep = verify_dispatch(c, sol);

  const fs::path dir = s.out;
  atomic_write(dir / "powerflow.csv", to_text([&](std::ostream& os) { write_solution_table(os, sol); }));
  write_manifest(dir, {"powerflow", config_hash(s), s.seed, {"powerflow.csv"}});

  fmt::print("converged in {} iterations, max mismatch {:.3e} pu\n", sol.iterations,
             sol.max_mismatch);
  fmt::print("generation {:.2f} MW, load {:.2f} MW, losses {:.2f} MW\n", rep.total_generation_mw,
             rep.total_load_mw, rep.losses_mw);
  fmt::print("slack {} output {:.2f} MW (rating {:.1f} MVA)\n", rep.slack_generator,
             rep.slack_generation_mw, rep.slack_rating_mva);
  for (const auto& w : rep.warnings) fmt::print("warning: {}\n", w);
  fmt::print("table written to {}\n", (dir / "powerflow.csv").string());
  return kExitOk;
}

int cmd_simulate(const Settings& s) {
  const auto c = load_scenario(s);
  const auto pf = solve_power_flow(c);
  const DynamicModel model(c, pf);

  std::optional<FaultEvent> fault;
  if (!s.no_fault) {
    FaultEvent f;
    f.line = resolve_line(c, s.line);
    f.type = parse_fault_type(s.type);
    f.location_pct = s.location;
    f.t_apply = s.t_apply;
    f.t_clear = s.t_apply + s.fct;
    f.trip_line = s.trip;
    fault = f;
  }
  const auto traj = model.run(fault, sim_options(s));
  const auto sev = evaluate_severities(traj, metric_options(s));

  nlohmann::ordered_json m;
  m["termination"] = traj.diverged() ? "diverged" : "completed";
  if (traj.diverged()) {
    m["diverged_at"] = traj.diverged_at;
    m["cause"] = traj.cause;
  }
  m["delta_max_deg"] = sev.angle.delta_max_deg;
  m["tsi"] = sev.angle.tsi;
  m["sev_a"] = sev.angle.sev_a;
  m["sev_v"] = sev.sev_v;
  m["sev_f"] = sev.sev_f;
  m["g_sample"] = sev.g();
  m["settled"] = sev.settled;

  const fs::path dir = s.out;
  atomic_write(dir / "trajectory.csv", to_text([&](std::ostream& os) { write_trajectory_csv(os, traj); }));
  atomic_write(dir / "metrics.json", m.dump(2) + "\n");
  write_manifest(dir, {"simulate", config_hash(s), s.seed, {"trajectory.csv", "metrics.json"}});
  std::cout << m.dump(2) << '\n';
  return kExitOk;
}


MonteCarloResult run_mc(const Settings& s, const PowerSystemCase& c) {
  const auto pf = solve_power_flow(c);
  const DynamicModel model(c, pf);
  const auto lines = c.fault_eligible_branches();
  const auto evaluator = simulation_evaluator(model, sim_options(s), metric_options(s));
  return run_monte_carlo(lines, distributions(s), mc_config(s), evaluator,
                         [](const Checkpoint& cp) {
                           fmt::print(stderr, "  N={:>6}  R_AM={:.4f}  R_VM={:.4f}  R_FM={:.4f}  G={:.4f}\n",
                                      cp.n, cp.r_am, cp.r_vm, cp.r_fm, cp.g);
                         });
}

int cmd_mc(const Settings& s) {
  const auto c = load_scenario(s);
  const auto res = run_mc(s, c);
  const auto& sum = res.summary;

  std::vector<double> g;
  for (const auto& r : res.samples)
    if (r.termination != "failed") g.push_back(r.g_sample);

  const fs::path dir = s.out;
  atomic_write(dir / "samples.csv", to_text([&](std::ostream& os) { write_samples_csv(os, res.samples); }));
  atomic_write(dir / "summary.json", summary_json(sum));
  const auto bins = histogram(g, s.bins);
  atomic_write(dir / "histogram.csv", to_text([&](std::ostream& os) { write_histogram_csv(os, bins); }));
  write_manifest(dir, {"mc", config_hash(s), s.seed, {"samples.csv", "summary.json", "histogram.csv"}});

  fmt::print("N = {} ({} failed, {} diverged)\n", sum.n, sum.failed, sum.diverged);
  fmt::print("R_AM = {}\nR_VM = {}\nR_FM = {}\nG = {}\n", sum.r_am, sum.r_vm, sum.r_fm, sum.g);
  fmt::print("g_sample ~ Normal(mean {:.4f}, std {:.4f})\n", sum.g_fit.mean, sum.g_fit.std);
  fmt::print("converged: {}\n", sum.converged ? fmt::format("yes, at N = {}", sum.converged_at) : "no");
  return sum.converged ? kExitOk : kExitUnconverged;
}

int cmd_sweep(const Settings& s) {
  if (s.points.empty()) throw ConfigError("sweep needs at least one point (--points)");
  if (s.axis != "penetration" && s.axis != "generation" && s.axis != "load")
    throw ConfigError("sweep axis must be penetration, generation or load");
  std::ostringstream curve;
  curve << "point,G,R_AM,R_VM,R_FM,n,converged\n";
  bool all_converged = true;
  for (double p : s.points) {
    PowerSystemCase c;
    try {
      if (s.axis == "penetration") {
        Settings local = s;
        local.replace.clear();
        c = load_scenario(local, s.gen_scale, s.load_scale, static_cast<int>(std::lround(p)));
      } else if (s.axis == "generation") {
        c = load_scenario(s, p, s.load_scale, s.penetration);
      } else {
        c = load_scenario(s, s.gen_scale, p, s.penetration);
      }
    } catch (const Error& e) {
      throw NumericalError(fmt::format("sweep point {}: {}", p, e.what()));
    }
    fmt::print(stderr, "{} = {}\n", s.axis, p);
    const auto res = run_mc(s, c);
    const auto& sum = res.summary;
    all_converged = all_converged && sum.converged;
    curve << fmt::format("{},{},{},{},{},{},{}\n", p, sum.g, sum.r_am, sum.r_vm, sum.r_fm, sum.n,
                         sum.converged ? 1 : 0);
    fmt::print("{:>8}  G={:.4f}  R_AM={:.4f}  R_VM={:.4f}  R_FM={:.4f}\n", p, sum.g, sum.r_am,
               sum.r_vm, sum.r_fm);
  }
  const fs::path dir = s.out;
  atomic_write(dir / "curve.csv", curve.str());
  write_manifest(dir, {"sweep", config_hash(s), s.seed, {"curve.csv"}});
  return all_converged ? kExitOk : kExitUnconverged;
}

int cmd_validate(const Settings& s) {
  const auto c = load_case(s.case_path);
  std::size_t lines = 0;
  for (const auto& br : c.branches) lines += br.is_line ? 1 : 0;
  fmt::print("{}: {} buses, {} lines, {} transformers, {} generators ({} synchronous)\n", c.name,
             c.bus_count(), lines, c.branches.size() - lines, c.generators.size(),
             c.synchronous_count());
  fmt::print("load {:.1f} MW, scheduled generation {:.2f} MW\n", c.total_load_mw(),
             c.total_dispatch_mw());
  for (const auto& n : c.notes) fmt::print("note: {}\n", n);
  return kExitOk;
}

// Finds --config before CLI11 runs so file values sit under command-line flags.
std::optional<std::string> find_config(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--config") == 0 && i + 1 < argc) return argv[i + 1];
    if (std::strncmp(argv[i], "--config=", 9) == 0) return std::string(argv[i] + 9);
  }
  return std::nullopt;
}

void add_scenario_flags(CLI::App* cmd, Settings& s) {
  cmd->add_option("--penetration", s.penetration, "Wind penetration level: 0, 25, 50 or 80 %");
  cmd->add_option("--replace", s.replace, "Explicit list of generators to convert to DFIGs")
      ->delimiter(',');
  cmd->add_option("--gen-scale", s.gen_scale, "Generation capacity scale factor (>= 1)");
  cmd->add_option("--load-scale", s.load_scale, "Load scale factor");
}

void add_sim_flags(CLI::App* cmd, Settings& s) {
  cmd->add_option("--dt", s.dt, "Integration step, s");
  cmd->add_option("--t-end", s.t_end, "Simulated time, s");
  cmd->add_flag("--trip,!--no-trip", s.trip, "Trip the faulted line at clearing (default on)");
  cmd->add_option("--v-threshold", s.v_threshold, "Voltage deviation threshold, pu");
  cmd->add_option("--f-threshold", s.f_threshold, "Frequency deviation threshold, Hz");
  cmd->add_flag("--include-dfig-frequency", s.include_dfig_frequency,
                "Count DFIG rotor-speed change in the frequency severity");
}

void add_mc_flags(CLI::App* cmd, Settings& s) {
  cmd->add_option("--n", s.n, "Maximum number of samples");
  cmd->add_option("--seed", s.seed, "Master random seed");
  cmd->add_option("--risk-mode", s.risk_mode, "sampled or weighted");
  cmd->add_option("--workers", s.workers, "Worker threads");
  cmd->add_option("--window", s.window, "Convergence window, samples");
  cmd->add_option("--threshold", s.threshold, "Convergence threshold on the running means");
  cmd->add_option("--checkpoint", s.checkpoint, "Samples between checkpoints");
  cmd->add_option("--bins", s.bins, "Histogram bins");
  cmd->add_flag("--stop-at-convergence,!--run-all", s.stop_at_convergence,
                "Stop once converged (default) or run the full budget");
  cmd->add_option("--fct-mean", s.fct_mean, "Mean fault clearing time, s");
  cmd->add_option("--fct-std", s.fct_std, "Standard deviation of the clearing time, s");
  cmd->add_option("--t-apply", s.t_apply, "Fault application time, s");
}

}  // namespace

int main(int argc, char** argv) {
  Settings s;
  s.case_path = cli::default_case_path().string();

  CLI::App app{"Probabilistic transient-stability risk assessment"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON run configuration (flags override it)");
  app.add_option("--case", s.case_path, "Case file");
  app.add_option("--out", s.out, "Output directory");

  auto* pf = app.add_subcommand("powerflow", "Solve the power flow and write the bus table");
  pf->add_option("--tol", s.tol, "Mismatch tolerance, pu");
  pf->add_option("--max-iter", s.max_iter, "Newton iteration cap");
  pf->add_flag("--enforce-q-limits", s.enforce_q_limits, "Switch PV buses at reactive limits");
  add_scenario_flags(pf, s);

  auto* sim = app.add_subcommand("simulate", "Simulate one fault and report its indices");
  sim->add_option("--line", s.line, "Faulted line: branch id or bus pair such as 16-17");
  sim->add_option("--type", s.type, "LLL, LLG, LL or LG");
  sim->add_option("--location", s.location, "Fault location, percent from the from-bus (1-100)");
  sim->add_option("--fct", s.fct, "Fault clearing time after application, s");
  sim->add_option("--t-apply", s.t_apply, "Fault application time, s");
  sim->add_flag("--no-fault", s.no_fault, "Run without a disturbance");
  add_sim_flags(sim, s);
  add_scenario_flags(sim, s);

  auto* mc = app.add_subcommand("mc", "Monte Carlo risk run");
  add_sim_flags(mc, s);
  add_mc_flags(mc, s);
  add_scenario_flags(mc, s);

  auto* sweep = app.add_subcommand("sweep", "One Monte Carlo run per scenario point");
  sweep->add_option("--axis", s.axis, "penetration, generation or load");
  sweep->add_option("--points", s.points, "Scenario points")->delimiter(',');
  add_sim_flags(sweep, s);
  add_mc_flags(sweep, s);
  add_scenario_flags(sweep, s);

  app.add_subcommand("validate-case", "Check a case file and print its inventory");

  try {
    if (auto cfg = find_config(argc, argv)) {
      std::ifstream in(*cfg);
      if (!in) throw ConfigError("cannot open config file '" + *cfg + "'");
      nlohmann::json doc;
      try {
        in >> doc;
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config file is not valid JSON: ") + e.what());
      }
      cli::apply_config(s, doc);
    }
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitConfig;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (app.got_subcommand(pf)) return cmd_powerflow(s);
    if (app.got_subcommand(sim)) return cmd_simulate(s);
    if (app.got_subcommand(mc)) return cmd_mc(s);
    if (app.got_subcommand(sweep)) return cmd_sweep(s);
    return cmd_validate(s);
  } catch (const ParseError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitConfig;
  } catch (const ValidationError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitConfig;
  } catch (const ConfigError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitConfig;
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitConfig;
  }
}
