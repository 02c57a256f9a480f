#include "tsrisk/case.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <sstream>

#include "tsrisk/error.hpp"

namespace tsrisk {

void PowerSystemCase::reindex() {
  bus_lookup_.clear();
  branch_lookup_.clear();
  gen_lookup_.clear();
  gen_by_bus_.clear();
  for (std::size_t i = 0; i < buses.size(); ++i) bus_lookup_.emplace(buses[i].id, i);
  for (std::size_t i = 0; i < branches.size(); ++i) branch_lookup_.emplace(branches[i].id, i);
  for (std::size_t i = 0; i < generators.size(); ++i) {
    gen_lookup_.emplace(generators[i].id, i);
    auto it = bus_lookup_.find(generators[i].bus);
    if (it != bus_lookup_.end()) gen_by_bus_.emplace(it->second, i);
  }
}

std::size_t PowerSystemCase::bus_index(int bus_id) const {
  auto it = bus_lookup_.find(bus_id);
  if (it == bus_lookup_.end()) throw ValidationError("unknown bus id " + std::to_string(bus_id));
  return it->second;
}

std::size_t PowerSystemCase::branch_index(int branch_id) const {
  auto it = branch_lookup_.find(branch_id);
  if (it == branch_lookup_.end())
    throw ValidationError("unknown branch id " + std::to_string(branch_id));
  return it->second;
}

std::size_t PowerSystemCase::generator_index(const std::string& gen_id) const {
  auto it = gen_lookup_.find(gen_id);
  if (it == gen_lookup_.end()) throw ValidationError("unknown generator '" + gen_id + "'");
  return it->second;
}

std::size_t PowerSystemCase::slack_index() const {
  for (std::size_t i = 0; i < buses.size(); ++i)
    if (buses[i].kind == BusKind::Slack) return i;
  throw ValidationError("case has no slack bus");
}

const GeneratorUnit* PowerSystemCase::generator_at(std::size_t bus_idx) const {
  auto it = gen_by_bus_.find(bus_idx);
  return it == gen_by_bus_.end() ? nullptr : &generators[it->second];
}

double PowerSystemCase::total_load_mw() const {
  double total = 0.0;
  for (const auto& l : loads) total += l.p_mw;
  return total;
}

double PowerSystemCase::total_dispatch_mw() const {
  double total = 0.0;
  for (const auto& g : generators) total += g.p_dispatch_mw;
  return total;
}

std::vector<int> PowerSystemCase::fault_eligible_branches() const {
  std::vector<int> ids;
  for (const auto& br : branches)
    if (br.is_line) ids.push_back(br.id);
  return ids;
}

std::size_t PowerSystemCase::synchronous_count() const {
  return static_cast<std::size_t>(std::count_if(
      generators.begin(), generators.end(), [](const auto& g) { return g.is_synchronous(); }));
}

std::optional<int> PowerSystemCase::find_branch_between(int bus_a, int bus_b) const {
  std::optional<int> found;
  for (const auto& br : branches) {
    bool match = (br.from_bus == bus_a && br.to_bus == bus_b) ||
                 (br.from_bus == bus_b && br.to_bus == bus_a);
    if (!match) continue;
    if (br.is_line) return br.id;
    if (!found) found = br.id;
  }
  return found;
}

const char* to_string(BusKind kind) {
  switch (kind) {
    case BusKind::Slack: return "slack";
    case BusKind::PV: return "PV";
    case BusKind::PQ: return "PQ";
  }
  return "?";
}

const char* to_string(GeneratorKind kind) {
  return kind == GeneratorKind::Synchronous ? "synchronous" : "dfig";
}

namespace {

[[noreturn]] void fail(const std::string& what) { throw ValidationError(what); }

void check_positive(double v, const std::string& what) {
  if (!(v > 0.0)) fail(what + " must be > 0");
}

void check_sync_params(const SyncMachineParams& p, const std::string& gen) {
  const std::string tag = "generator " + gen + ": ";
  if (!(p.xd >= p.xd_t && p.xd_t >= p.xd_st && p.xd_st > 0.0))
    fail(tag + "requires xd >= x'd >= x''d > 0");
  if (!(p.xq >= p.xq_t && p.xq_t >= p.xq_st && p.xq_st > 0.0))
    fail(tag + "requires xq >= x'q >= x''q > 0");
  check_positive(p.t_j, tag + "T_J");
  check_positive(p.td0_t, tag + "T'do");
  check_positive(p.tq0_t, tag + "T'qo");
  check_positive(p.td0_st, tag + "T''do");
  check_positive(p.tq0_st, tag + "T''qo");
  if (p.ra < 0.0) fail(tag + "stator resistance must be >= 0");
}

void check_controls(const ControllerParams& c, const std::string& gen) {
  const std::string tag = "generator " + gen + ": ";
  check_positive(c.governor.droop, tag + "governor droop");
  check_positive(c.governor.t1, tag + "governor T1");
  check_positive(c.governor.t3, tag + "governor T3");
  if (!(c.governor.v_min < c.governor.v_max)) fail(tag + "governor limits out of order");
  check_positive(c.exciter.ta, tag + "exciter TA");
  check_positive(c.exciter.te, tag + "exciter TE");
  check_positive(c.exciter.tf, tag + "exciter TF");
  if (c.exciter.tr < 0.0) fail(tag + "exciter TR must be >= 0");
  if (!(c.exciter.vr_min < c.exciter.vr_max)) fail(tag + "exciter limits out of order");
  check_positive(c.pss.t_washout, tag + "PSS washout");
  check_positive(c.pss.t_lag1, tag + "PSS lag 1");
  check_positive(c.pss.t_lag2, tag + "PSS lag 2");
  if (!(c.pss.v_min < c.pss.v_max)) fail(tag + "PSS limits out of order");
}

void check_dfig_params(const DfigParams& p, const std::string& gen) {
  const std::string tag = "generator " + gen + ": ";
  if (!(p.x > p.x_t && p.x_t > 0.0)) fail(tag + "DFIG requires X > X' > 0");
  check_positive(p.t_o, tag + "DFIG T_o");
  check_positive(p.h_g, tag + "DFIG H_g");
  check_positive(p.h_t, tag + "DFIG H_t");
  check_positive(p.l_m, tag + "DFIG L_m");
  check_positive(p.i_max, tag + "DFIG converter current limit");
  if (!(p.crowbar_on < p.crowbar_off)) fail(tag + "DFIG crowbar thresholds out of order");
}

}  // namespace

std::vector<std::string> validate_case(const PowerSystemCase& c) {
  std::vector<std::string> flags;
  if (c.buses.empty()) fail("case has no buses");
  check_positive(c.system_mva_base, "system MVA base");
  check_positive(c.nominal_hz, "nominal frequency");

  std::set<int> bus_ids;
  int slack_count = 0;
  for (const auto& b : c.buses) {
    if (!bus_ids.insert(b.id).second) fail("duplicate bus id " + std::to_string(b.id));
    check_positive(b.base_kv, "bus " + std::to_string(b.id) + " base_kv");
    if (b.kind == BusKind::Slack) ++slack_count;
  }
  if (slack_count != 1)
    fail("case must have exactly one slack bus, found " + std::to_string(slack_count));

  std::set<int> branch_ids;
  for (const auto& br : c.branches) {
    const std::string tag = "branch " + std::to_string(br.id);
    if (!branch_ids.insert(br.id).second) fail("duplicate branch id " + std::to_string(br.id));
    if (!bus_ids.count(br.from_bus) || !bus_ids.count(br.to_bus))
      fail(tag + " references an unknown bus");
    if (br.from_bus == br.to_bus) fail(tag + " connects a bus to itself");
    if (br.x == 0.0) fail(tag + " has zero series reactance");
    check_positive(br.tap, tag + " tap");
    if (br.b_from_fraction < 0.0 || br.b_from_fraction > 1.0)
      fail(tag + " charging split outside [0, 1]");
  }

  for (const auto& l : c.loads)
    if (!bus_ids.count(l.bus)) fail("load references unknown bus " + std::to_string(l.bus));

  std::set<std::string> gen_ids;
  std::set<int> gen_buses;
  for (const auto& g : c.generators) {
    const std::string tag = "generator " + g.id;
    if (!gen_ids.insert(g.id).second) fail("duplicate generator id " + g.id);
    if (!bus_ids.count(g.bus)) fail(tag + " references unknown bus " + std::to_string(g.bus));
    if (!gen_buses.insert(g.bus).second)
      fail(tag + ": more than one generator at bus " + std::to_string(g.bus));
    check_positive(g.mva_rating, tag + " MVA rating");
    if (g.p_dispatch_mw > g.mva_rating) fail(tag + " dispatch exceeds its MVA rating");
    if (g.is_synchronous()) {
      if (!std::holds_alternative<SyncMachineParams>(g.machine))
        fail(tag + " is synchronous but carries DFIG parameters");
      if (!g.controls) fail(tag + " is missing governor/exciter/PSS parameters");
      check_sync_params(g.sync(), g.id);
      check_controls(*g.controls, g.id);
    } else {
      if (!std::holds_alternative<DfigParams>(g.machine))
        fail(tag + " is a DFIG but carries synchronous parameters");
      check_dfig_params(g.dfig(), g.id);
    }
  }

  for (const auto& b : c.buses) {
    if (b.kind == BusKind::PQ) continue;
    auto it = std::find_if(c.generators.begin(), c.generators.end(),
                           [&](const auto& g) { return g.bus == b.id; });
    if (it == c.generators.end())
      fail(std::string(to_string(b.kind)) + " bus " + std::to_string(b.id) + " has no generator");
    if (std::abs(it->v_setpoint - b.v_setpoint) > 1e-9)
      fail("generator " + it->id + " voltage setpoint disagrees with bus " +
           std::to_string(b.id));
  }

  // Connectivity over all branches.
  std::unordered_map<int, std::vector<int>> adj;
  for (const auto& br : c.branches) {
    adj[br.from_bus].push_back(br.to_bus);
    adj[br.to_bus].push_back(br.from_bus);
  }
  std::set<int> seen{c.buses.front().id};
  std::queue<int> todo;
  todo.push(c.buses.front().id);
  while (!todo.empty()) {
    int b = todo.front();
    todo.pop();
    for (int n : adj[b])
      if (seen.insert(n).second) todo.push(n);
  }
  if (seen.size() != bus_ids.size()) {
    for (int id : bus_ids)
      if (!seen.count(id)) fail("network is disconnected: bus " + std::to_string(id) + " unreachable");
  }

  double installed = 0.0;
  for (const auto& g : c.generators) installed += g.mva_rating;
  if (c.total_dispatch_mw() > installed) fail("total dispatch exceeds installed capacity");

  int defaulted = 0;
  for (const auto& br : c.branches)
    if (!br.z2 || !br.z0) ++defaulted;
  if (defaulted > 0) {
    std::ostringstream os;
    os << defaulted << " branch(es) use default sequence impedances (z2 = z1, z0 = 3 z1)";
    flags.push_back(os.str());
  }
  return flags;
}

}  // namespace tsrisk
