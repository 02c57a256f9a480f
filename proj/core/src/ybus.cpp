#include "tsrisk/ybus.hpp"

#include <algorithm>
#include <cmath>

#include "tsrisk/error.hpp"

namespace tsrisk {

BranchAdmittance branch_admittance(const Branch& br, Complex z_series, double b_charging) {
  const Complex ys = 1.0 / z_series;
  const Complex bf(0.0, b_charging * br.b_from_fraction);
  const Complex bt(0.0, b_charging * (1.0 - br.b_from_fraction));
  const double t = br.tap;
  return {(ys + bf) / (t * t), -ys / t, -ys / t, ys + bt};
}

Complex load_shunt_admittance(const Load& load, double v_mag, double mva_base) {
  const Complex s(load.p_mw / mva_base, load.q_mvar / mva_base);
  return std::conj(s) / (v_mag * v_mag);
}

SparseComplexMatrix build_ybus(const PowerSystemCase& c, bool loads_as_shunts,
                               std::span<const Complex> pf_voltages) {
  const auto n = static_cast<Eigen::Index>(c.bus_count());
  if (loads_as_shunts && pf_voltages.size() != c.bus_count())
    throw ConfigError("build_ybus: load conversion needs one voltage per bus");

  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(c.branches.size() * 4 + c.bus_count() + c.loads.size());
  for (const auto& br : c.branches) {
    const auto f = static_cast<Eigen::Index>(c.bus_index(br.from_bus));
    const auto t = static_cast<Eigen::Index>(c.bus_index(br.to_bus));
    const auto y = branch_admittance(br);
    trip.emplace_back(f, f, y.yff);
    trip.emplace_back(f, t, y.yft);
    trip.emplace_back(t, f, y.ytf);
    trip.emplace_back(t, t, y.ytt);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& b = c.buses[static_cast<std::size_t>(i)];
    // Keeps the diagonal structurally present even for bare buses.
    trip.emplace_back(i, i, Complex(b.shunt_g, b.shunt_b));
  }
  if (loads_as_shunts) {
    for (const auto& l : c.loads) {
      const auto k = c.bus_index(l.bus);
      trip.emplace_back(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k),
                        load_shunt_admittance(l, std::abs(pf_voltages[k]), c.system_mva_base));
    }
  }
  SparseComplexMatrix y(n, n);
  y.setFromTriplets(trip.begin(), trip.end());
  y.makeCompressed();
  return y;
}

SplitCase split_line_at(const PowerSystemCase& c, int branch_id, int location_pct) {
  const Branch& line = c.branches[c.branch_index(branch_id)];
  if (!line.is_line)
    throw ValidationError("branch " + std::to_string(branch_id) +
                          " is a transformer and cannot be faulted");
  if (location_pct < 1 || location_pct > 100)
    throw ValidationError("fault location must be an integer percent in 1..100, got " +
                          std::to_string(location_pct));

  // Keep both sections finite so the fault bus never merges with a terminal.
  constexpr double kMinSection = 0.005;
  const double f = std::clamp(location_pct / 100.0, kMinSection, 1.0 - kMinSection);

  SplitCase out{c, 0, 0, 0};
  auto& sys = out.system;
  int max_bus = 0;
  for (const auto& b : c.buses) max_bus = std::max(max_bus, b.id);
  int max_branch = 0;
  for (const auto& br : c.branches) max_branch = std::max(max_branch, br.id);

  Bus fault_bus;
  fault_bus.id = max_bus + 1;
  fault_bus.name = "fault@" + std::to_string(branch_id) + ":" + std::to_string(location_pct);
  fault_bus.base_kv = c.buses[c.bus_index(line.from_bus)].base_kv;
  fault_bus.kind = BusKind::PQ;
  sys.buses.push_back(fault_bus);

  auto section = [&](int id, int from, int to, double share, double b_total, double b_from) {
    Branch s = line;
    s.id = id;
    s.from_bus = from;
    s.to_bus = to;
    s.r = line.r * share;
    s.x = line.x * share;
    s.b_charging = b_total;
    s.b_from_fraction = b_from;
    if (line.z2) s.z2 = *line.z2 * share;
    if (line.z0) s.z0 = *line.z0 * share;
    return s;
  };
  const double b_from_end = line.b_charging * line.b_from_fraction;
  const double b_to_end = line.b_charging - b_from_end;
  Branch first = section(max_branch + 1, line.from_bus, fault_bus.id, f, b_from_end, 1.0);
  Branch second = section(max_branch + 2, fault_bus.id, line.to_bus, 1.0 - f, b_to_end, 0.0);
  second.tap = 1.0;

  auto pos = sys.branches.begin() + static_cast<std::ptrdiff_t>(c.branch_index(branch_id));
  sys.branches.erase(pos);
  sys.branches.push_back(first);
  sys.branches.push_back(second);
  sys.reindex();

  out.fault_bus = fault_bus.id;
  out.section_from = first.id;
  out.section_to = second.id;
  return out;
}

Eigen::MatrixXcd kron_eliminate(const Eigen::MatrixXcd& y,
                                std::span<const std::size_t> eliminate) {
  const auto n = static_cast<std::size_t>(y.rows());
  std::vector<bool> drop(n, false);
  for (auto k : eliminate) drop.at(k) = true;
  std::vector<Eigen::Index> keep_idx, elim_idx;
  for (std::size_t i = 0; i < n; ++i)
    (drop[i] ? elim_idx : keep_idx).push_back(static_cast<Eigen::Index>(i));

  const auto nk = static_cast<Eigen::Index>(keep_idx.size());
  const auto ne = static_cast<Eigen::Index>(elim_idx.size());
  Eigen::MatrixXcd ykk(nk, nk), yke(nk, ne), yek(ne, nk), yee(ne, ne);
  for (Eigen::Index i = 0; i < nk; ++i) {
    for (Eigen::Index j = 0; j < nk; ++j) ykk(i, j) = y(keep_idx[i], keep_idx[j]);
    for (Eigen::Index j = 0; j < ne; ++j) yke(i, j) = y(keep_idx[i], elim_idx[j]);
  }
  for (Eigen::Index i = 0; i < ne; ++i) {
    for (Eigen::Index j = 0; j < nk; ++j) yek(i, j) = y(elim_idx[i], keep_idx[j]);
    for (Eigen::Index j = 0; j < ne; ++j) yee(i, j) = y(elim_idx[i], elim_idx[j]);
  }
  if (ne == 0) return ykk;
  return ykk - yke * yee.partialPivLu().solve(yek);
}

}  // namespace tsrisk
