#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace tsrisk {

using Complex = std::complex<double>;

enum class BusKind { Slack, PV, PQ };

struct Bus {
  int id = 0;
  std::string name;
  double base_kv = 0.0;
  BusKind kind = BusKind::PQ;
  double v_setpoint = 1.0;  // pu, meaningful for PV and slack buses
  double shunt_g = 0.0;     // pu on system base
  double shunt_b = 0.0;

  bool operator==(const Bus&) const = default;
};

struct Branch {
  int id = 0;
  int from_bus = 0;
  int to_bus = 0;
  double r = 0.0;
  double x = 0.0;
  double b_charging = 0.0;       // total line charging, pu
  double b_from_fraction = 0.5;  // share of b_charging lumped at the from end
  double tap = 1.0;              // off-nominal ratio at the from side
  bool is_line = true;
  std::optional<Complex> z2;  // negative-sequence series impedance
  std::optional<Complex> z0;  // zero-sequence series impedance

  Complex z1() const { return {r, x}; }
  Complex negative_sequence() const { return z2.value_or(z1()); }
  Complex zero_sequence() const { return z0.value_or(3.0 * z1()); }

  bool operator==(const Branch&) const = default;
};

/// Constant-impedance load; p/q are the consumption at the power-flow voltage.
struct Load {
  int bus = 0;
  double p_mw = 0.0;
  double q_mvar = 0.0;

  bool operator==(const Load&) const = default;
};

/// Sixth-order synchronous machine constants, machine MVA base.
/// t_j is the mechanical starting time (2H) in seconds.
struct SyncMachineParams {
  double t_j = 0.0;
  double damping = 0.0;
  double xd = 0.0, xq = 0.0;
  double xd_t = 0.0, xq_t = 0.0;    // transient
  double xd_st = 0.0, xq_st = 0.0;  // subtransient
  double td0_t = 0.0, tq0_t = 0.0;
  double td0_st = 0.0, tq0_st = 0.0;
  double ra = 0.0;

  bool operator==(const SyncMachineParams&) const = default;
};

/// TGOV1 steam governor, machine base.
struct GovernorParams {
  double droop = 0.05;
  double t1 = 0.5;
  double t2 = 2.1;
  double t3 = 7.0;
  double v_min = 0.0;
  double v_max = 1.2;
  double dt = 0.0;

  bool operator==(const GovernorParams&) const = default;
};

/// IEEEX1 (DC1A type) exciter without saturation.
struct ExciterParams {
  double tr = 0.01;
  double ka = 50.0;
  double ta = 0.05;
  double ke = 1.0;
  double te = 0.3;
  double kf = 0.05;
  double tf = 1.0;
  double vr_min = -5.0;
  double vr_max = 5.0;

  bool operator==(const ExciterParams&) const = default;
};

/// STAB1 speed-input stabilizer: washout followed by two lead-lag stages.
struct PssParams {
  double gain = 20.0;
  double t_washout = 10.0;
  double t_lead1 = 0.15;
  double t_lag1 = 0.05;
  double t_lead2 = 0.15;
  double t_lag2 = 0.05;
  double v_min = -0.1;
  double v_max = 0.1;

  bool operator==(const PssParams&) const = default;
};

struct ControllerParams {
  GovernorParams governor;
  ExciterParams exciter;
  PssParams pss;

  bool operator==(const ControllerParams&) const = default;
};

/// Third-order DFIG with two-mass shaft and converter controls, machine base.
struct DfigParams {
  double h_g = 0.5;  // generator inertia, s
  double h_t = 4.0;  // turbine inertia, s
  double x = 3.1;
  double x_t = 0.1779;
  double t_o = 0.817;
  double r_s = 0.01;
  double l_m = 3.0;
  double l_r = 0.08;
  double k_tw = 0.5;
  double d_tw = 1.5;
  double rated_slip = -0.2;
  double i_max = 1.1;
  double crowbar_on = 0.2;   // pu voltage, engage below
  double crowbar_off = 0.8;  // pu voltage, release above
  double kp_p = 0.015;
  double ki_p = 0.1;
  double kp_q = 0.015;
  double ki_q = 0.1;
  double k_v = 5.0;      // pu Q per pu V
  double k_speed = 1.0;  // pu P per pu speed

  bool operator==(const DfigParams&) const = default;
};

enum class GeneratorKind { Synchronous, Dfig };

struct GeneratorUnit {
  std::string id;
  int bus = 0;
  GeneratorKind kind = GeneratorKind::Synchronous;
  double mva_rating = 0.0;
  double p_dispatch_mw = 0.0;
  double v_setpoint = 1.0;
  std::optional<double> q_min_mvar;
  std::optional<double> q_max_mvar;
  std::variant<SyncMachineParams, DfigParams> machine;
  std::optional<ControllerParams> controls;

  bool is_synchronous() const { return kind == GeneratorKind::Synchronous; }
  const SyncMachineParams& sync() const { return std::get<SyncMachineParams>(machine); }
  const DfigParams& dfig() const { return std::get<DfigParams>(machine); }

  bool operator==(const GeneratorUnit&) const = default;
};

/// Static network, machine data and the dispatch snapshot. Treated as immutable
/// once validated; transforms return modified copies.
class PowerSystemCase {
 public:
  std::string name;
  double system_mva_base = 100.0;
  double nominal_hz = 60.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Load> loads;
  std::vector<GeneratorUnit> generators;
  DfigParams dfig_template;
  std::vector<std::string> notes;  // non-fatal validation flags

  /// Rebuilds the id lookup tables. Call after editing the element vectors.
  void reindex();

  std::size_t bus_index(int bus_id) const;
  bool has_bus(int bus_id) const { return bus_lookup_.count(bus_id) != 0; }
  std::size_t branch_index(int branch_id) const;
  std::size_t generator_index(const std::string& gen_id) const;
  std::size_t slack_index() const;
  /// Generator connected at the given bus index, if any.
  const GeneratorUnit* generator_at(std::size_t bus_idx) const;

  std::size_t bus_count() const { return buses.size(); }
  double total_load_mw() const;
  double total_dispatch_mw() const;
  std::vector<int> fault_eligible_branches() const;
  std::size_t synchronous_count() const;

  /// Branch id for a "from-to" bus pair in either orientation (lines preferred).
  std::optional<int> find_branch_between(int bus_a, int bus_b) const;

  bool operator==(const PowerSystemCase&) const = default;

 private:
  std::unordered_map<int, std::size_t> bus_lookup_;
  std::unordered_map<int, std::size_t> branch_lookup_;
  std::unordered_map<std::string, std::size_t> gen_lookup_;
  std::unordered_map<std::size_t, std::size_t> gen_by_bus_;
};

/// Checks every invariant and returns the list of non-fatal flags (defaulted
/// sequence data, dispatch above rating...). Throws ValidationError naming the
/// offending element on the first hard violation.
std::vector<std::string> validate_case(const PowerSystemCase& c);

const char* to_string(BusKind kind);
const char* to_string(GeneratorKind kind);

}  // namespace tsrisk
