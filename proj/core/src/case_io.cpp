#include "tsrisk/case_io.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "tsrisk/error.hpp"

namespace tsrisk {

using nlohmann::json;

namespace {

template <typename T>
using FieldTable = std::initializer_list<std::pair<const char*, double T::*>>;

const FieldTable<SyncMachineParams> kSyncFields = {
    {"t_j", &SyncMachineParams::t_j},       {"damping", &SyncMachineParams::damping},
    {"xd", &SyncMachineParams::xd},         {"xq", &SyncMachineParams::xq},
    {"xd_t", &SyncMachineParams::xd_t},     {"xq_t", &SyncMachineParams::xq_t},
    {"xd_st", &SyncMachineParams::xd_st},   {"xq_st", &SyncMachineParams::xq_st},
    {"td0_t", &SyncMachineParams::td0_t},   {"tq0_t", &SyncMachineParams::tq0_t},
    {"td0_st", &SyncMachineParams::td0_st}, {"tq0_st", &SyncMachineParams::tq0_st},
    {"ra", &SyncMachineParams::ra},
};

const FieldTable<GovernorParams> kGovernorFields = {
    {"droop", &GovernorParams::droop}, {"t1", &GovernorParams::t1},
    {"t2", &GovernorParams::t2},       {"t3", &GovernorParams::t3},
    {"v_min", &GovernorParams::v_min}, {"v_max", &GovernorParams::v_max},
    {"dt", &GovernorParams::dt},
};

const FieldTable<ExciterParams> kExciterFields = {
    {"tr", &ExciterParams::tr},         {"ka", &ExciterParams::ka},
    {"ta", &ExciterParams::ta},         {"ke", &ExciterParams::ke},
    {"te", &ExciterParams::te},         {"kf", &ExciterParams::kf},
    {"tf", &ExciterParams::tf},         {"vr_min", &ExciterParams::vr_min},
    {"vr_max", &ExciterParams::vr_max},
};

const FieldTable<PssParams> kPssFields = {
    {"gain", &PssParams::gain},       {"t_washout", &PssParams::t_washout},
    {"t_lead1", &PssParams::t_lead1}, {"t_lag1", &PssParams::t_lag1},
    {"t_lead2", &PssParams::t_lead2}, {"t_lag2", &PssParams::t_lag2},
    {"v_min", &PssParams::v_min},     {"v_max", &PssParams::v_max},
};

const FieldTable<DfigParams> kDfigFields = {
    {"h_g", &DfigParams::h_g},
    {"h_t", &DfigParams::h_t},
    {"x", &DfigParams::x},
    {"x_t", &DfigParams::x_t},
    {"t_o", &DfigParams::t_o},
    {"r_s", &DfigParams::r_s},
    {"l_m", &DfigParams::l_m},
    {"l_r", &DfigParams::l_r},
    {"k_tw", &DfigParams::k_tw},
    {"d_tw", &DfigParams::d_tw},
    {"rated_slip", &DfigParams::rated_slip},
    {"i_max", &DfigParams::i_max},
    {"crowbar_on", &DfigParams::crowbar_on},
    {"crowbar_off", &DfigParams::crowbar_off},
    {"kp_p", &DfigParams::kp_p},
    {"ki_p", &DfigParams::ki_p},
    {"kp_q", &DfigParams::kp_q},
    {"ki_q", &DfigParams::ki_q},
    {"k_v", &DfigParams::k_v},
    {"k_speed", &DfigParams::k_speed},
};

// Free-form annotation keys accepted (and dropped) anywhere in the document.
bool is_annotation(const std::string& key) {
  return key == "source" || key == "comment" || key == "provenance";
}

void expect_keys(const json& obj, std::initializer_list<const char*> allowed,
                 const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (is_annotation(key)) continue;
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ParseError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void expect_table_keys(const json& obj, const FieldTable<T>& table, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (is_annotation(key)) continue;
    bool ok = false;
    for (const auto& [name, member] : table) ok = ok || key == name;
    if (!ok) throw ParseError(where + ": unknown key '" + key + "'");
  }
}

double number(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing '" + key + "'");
  if (!it->is_number()) throw ParseError(where + ": '" + key + "' must be a number");
  return it->get<double>();
}

double number_or(const json& obj, const char* key, double fallback, const std::string& where) {
  return obj.contains(key) ? number(obj, key, where) : fallback;
}

int integer(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing '" + key + "'");
  if (!it->is_number_integer()) throw ParseError(where + ": '" + key + "' must be an integer");
  return it->get<int>();
}

std::string text(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing '" + key + "'");
  if (!it->is_string()) throw ParseError(where + ": '" + key + "' must be a string");
  return it->get<std::string>();
}

const json& array(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_array())
    throw ParseError(where + ": '" + key + "' must be an array");
  return *it;
}

template <typename T>
T read_table(const json& obj, const FieldTable<T>& table, bool all_required, T base,
             const std::string& where) {
  expect_table_keys(obj, table, where);
  for (const auto& [name, member] : table) {
    if (all_required || obj.contains(name)) base.*member = number(obj, name, where);
  }
  return base;
}

template <typename T>
json write_table(const T& value, const FieldTable<T>& table) {
  json out = json::object();
  for (const auto& [name, member] : table) out[name] = value.*member;
  return out;
}

std::optional<Complex> read_impedance(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return std::nullopt;
  if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() || !(*it)[1].is_number())
    throw ParseError(where + ": '" + key + "' must be [r, x]");
  return Complex((*it)[0].get<double>(), (*it)[1].get<double>());
}

BusKind parse_bus_kind(const std::string& s, const std::string& where) {
  if (s == "slack") return BusKind::Slack;
  if (s == "PV") return BusKind::PV;
  if (s == "PQ") return BusKind::PQ;
  throw ParseError(where + ": bus kind must be slack, PV or PQ (got '" + s + "')");
}

Bus parse_bus(const json& j, std::size_t pos) {
  std::string where = "buses[" + std::to_string(pos) + "]";
  expect_keys(j, {"id", "name", "base_kv", "kind", "v_setpoint", "shunt_g", "shunt_b"}, where);
  Bus b;
  b.id = integer(j, "id", where);
  where = "bus " + std::to_string(b.id);
  b.name = j.contains("name") ? text(j, "name", where) : std::to_string(b.id);
  b.base_kv = number(j, "base_kv", where);
  b.kind = parse_bus_kind(text(j, "kind", where), where);
  b.v_setpoint = number_or(j, "v_setpoint", 1.0, where);
  b.shunt_g = number_or(j, "shunt_g", 0.0, where);
  b.shunt_b = number_or(j, "shunt_b", 0.0, where);
  return b;
}

Branch parse_branch(const json& j, std::size_t pos) {
  std::string where = "branches[" + std::to_string(pos) + "]";
  expect_keys(j, {"id", "from", "to", "r", "x", "b", "b_from_fraction", "tap", "kind", "z2", "z0"},
              where);
  Branch br;
  br.id = integer(j, "id", where);
  where = "branch " + std::to_string(br.id);
  br.from_bus = integer(j, "from", where);
  br.to_bus = integer(j, "to", where);
  br.r = number(j, "r", where);
  br.x = number(j, "x", where);
  br.b_charging = number_or(j, "b", 0.0, where);
  br.b_from_fraction = number_or(j, "b_from_fraction", 0.5, where);
  br.tap = number_or(j, "tap", 1.0, where);
  std::string kind = j.contains("kind") ? text(j, "kind", where) : "line";
  if (kind == "line") {
    br.is_line = true;
  } else if (kind == "transformer") {
    br.is_line = false;
  } else {
    throw ParseError(where + ": kind must be line or transformer (got '" + kind + "')");
  }
  br.z2 = read_impedance(j, "z2", where);
  br.z0 = read_impedance(j, "z0", where);
  return br;
}

Load parse_load(const json& j, std::size_t pos) {
  std::string where = "loads[" + std::to_string(pos) + "]";
  expect_keys(j, {"bus", "p_mw", "q_mvar"}, where);
  Load l;
  l.bus = integer(j, "bus", where);
  l.p_mw = number(j, "p_mw", where);
  l.q_mvar = number_or(j, "q_mvar", 0.0, where);
  return l;
}

GeneratorUnit parse_generator(const json& j, const DfigParams& dfig_template, std::size_t pos) {
  std::string where = "generators[" + std::to_string(pos) + "]";
  expect_keys(j,
              {"id", "bus", "kind", "mva_rating", "p_mw", "v_setpoint", "q_min_mvar", "q_max_mvar",
               "machine", "governor", "exciter", "pss"},
              where);
  GeneratorUnit g;
  g.id = text(j, "id", where);
  where = "generator " + g.id;
  g.bus = integer(j, "bus", where);
  g.mva_rating = number(j, "mva_rating", where);
  g.p_dispatch_mw = number(j, "p_mw", where);
  g.v_setpoint = number_or(j, "v_setpoint", 1.0, where);
  if (j.contains("q_min_mvar")) g.q_min_mvar = number(j, "q_min_mvar", where);
  if (j.contains("q_max_mvar")) g.q_max_mvar = number(j, "q_max_mvar", where);
  std::string kind = text(j, "kind", where);
  if (kind == "synchronous") {
    g.kind = GeneratorKind::Synchronous;
    if (!j.contains("machine")) throw ParseError(where + ": missing 'machine'");
    g.machine = read_table(j.at("machine"), kSyncFields, true, SyncMachineParams{},
                           where + " machine");
    ControllerParams ctl;
    if (!j.contains("governor") || !j.contains("exciter") || !j.contains("pss"))
      throw ParseError(where + ": synchronous units need governor, exciter and pss blocks");
    ctl.governor = read_table(j.at("governor"), kGovernorFields, false, GovernorParams{},
                              where + " governor");
    ctl.exciter =
        read_table(j.at("exciter"), kExciterFields, false, ExciterParams{}, where + " exciter");
    ctl.pss = read_table(j.at("pss"), kPssFields, false, PssParams{}, where + " pss");
    g.controls = ctl;
  } else if (kind == "dfig") {
    g.kind = GeneratorKind::Dfig;
    g.machine = j.contains("machine") ? read_table(j.at("machine"), kDfigFields, false,
                                                   dfig_template, where + " machine")
                                      : dfig_template;
    if (j.contains("governor") || j.contains("exciter") || j.contains("pss"))
      throw ParseError(where + ": DFIG units take no governor/exciter/pss blocks");
  } else {
    throw ParseError(where + ": kind must be synchronous or dfig (got '" + kind + "')");
  }
  return g;
}

}  // namespace

PowerSystemCase parse_case(std::string_view text_in) {
  json doc;
  try {
    doc = json::parse(text_in.begin(), text_in.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("case document is not valid JSON: ") + e.what());
  }
  const std::string where = "case";
  expect_keys(doc,
              {"name", "system_mva_base", "nominal_hz", "buses", "branches", "loads",
               "generators", "dfig_template"},
              where);

  PowerSystemCase c;
  c.name = doc.contains("name") ? text(doc, "name", where) : "";
  c.system_mva_base = number_or(doc, "system_mva_base", 100.0, where);
  c.nominal_hz = number_or(doc, "nominal_hz", 60.0, where);
  if (doc.contains("dfig_template"))
    c.dfig_template =
        read_table(doc.at("dfig_template"), kDfigFields, false, DfigParams{}, "dfig_template");

  const auto& buses = array(doc, "buses", where);
  for (std::size_t i = 0; i < buses.size(); ++i) c.buses.push_back(parse_bus(buses[i], i));
  const auto& branches = array(doc, "branches", where);
  for (std::size_t i = 0; i < branches.size(); ++i)
    c.branches.push_back(parse_branch(branches[i], i));
  if (doc.contains("loads")) {
    const auto& loads = array(doc, "loads", where);
    for (std::size_t i = 0; i < loads.size(); ++i) c.loads.push_back(parse_load(loads[i], i));
  }
  const auto& gens = array(doc, "generators", where);
  for (std::size_t i = 0; i < gens.size(); ++i)
    c.generators.push_back(parse_generator(gens[i], c.dfig_template, i));

  c.notes = validate_case(c);
  c.reindex();
  return c;
}

PowerSystemCase load_case(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open case file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_case(buf.str());
}

std::string serialize_case(const PowerSystemCase& c) {
  json doc;
  doc["name"] = c.name;
  doc["system_mva_base"] = c.system_mva_base;
  doc["nominal_hz"] = c.nominal_hz;
  doc["dfig_template"] = write_table(c.dfig_template, kDfigFields);

  json buses = json::array();
  for (const auto& b : c.buses) {
    buses.push_back({{"id", b.id},
                     {"name", b.name},
                     {"base_kv", b.base_kv},
                     {"kind", to_string(b.kind)},
                     {"v_setpoint", b.v_setpoint},
                     {"shunt_g", b.shunt_g},
                     {"shunt_b", b.shunt_b}});
  }
  doc["buses"] = std::move(buses);

  json branches = json::array();
  for (const auto& br : c.branches) {
    json j = {{"id", br.id},
              {"from", br.from_bus},
              {"to", br.to_bus},
              {"r", br.r},
              {"x", br.x},
              {"b", br.b_charging},
              {"b_from_fraction", br.b_from_fraction},
              {"tap", br.tap},
              {"kind", br.is_line ? "line" : "transformer"}};
    if (br.z2) j["z2"] = {br.z2->real(), br.z2->imag()};
    if (br.z0) j["z0"] = {br.z0->real(), br.z0->imag()};
    branches.push_back(std::move(j));
  }
  doc["branches"] = std::move(branches);

  json loads = json::array();
  for (const auto& l : c.loads)
    loads.push_back({{"bus", l.bus}, {"p_mw", l.p_mw}, {"q_mvar", l.q_mvar}});
  doc["loads"] = std::move(loads);

  json gens = json::array();
  for (const auto& g : c.generators) {
    json j = {{"id", g.id},
              {"bus", g.bus},
              {"kind", to_string(g.kind)},
              {"mva_rating", g.mva_rating},
              {"p_mw", g.p_dispatch_mw},
              {"v_setpoint", g.v_setpoint}};
    if (g.q_min_mvar) j["q_min_mvar"] = *g.q_min_mvar;
    if (g.q_max_mvar) j["q_max_mvar"] = *g.q_max_mvar;
    if (g.is_synchronous()) {
      j["machine"] = write_table(g.sync(), kSyncFields);
      if (g.controls) {
        j["governor"] = write_table(g.controls->governor, kGovernorFields);
        j["exciter"] = write_table(g.controls->exciter, kExciterFields);
        j["pss"] = write_table(g.controls->pss, kPssFields);
      }
    } else {
      j["machine"] = write_table(g.dfig(), kDfigFields);
    }
    gens.push_back(std::move(j));
  }
  doc["generators"] = std::move(gens);
  return doc.dump(2) + "\n";
}

}  // namespace tsrisk
