#include "tsrisk/fault.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "tsrisk/error.hpp"
#include "tsrisk/ybus.hpp"

namespace tsrisk {

const char* to_string(FaultType type) {
  switch (type) {
    case FaultType::LLL: return "LLL";
    case FaultType::LLG: return "LLG";
    case FaultType::LL: return "LL";
    case FaultType::LG: return "LG";
  }
  return "?";
}

FaultType parse_fault_type(std::string_view text) {
  std::string up(text);
  std::transform(up.begin(), up.end(), up.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
  if (up == "LLL") return FaultType::LLL;
  if (up == "LLG") return FaultType::LLG;
  if (up == "LL") return FaultType::LL;
  if (up == "LG") return FaultType::LG;
  throw ConfigError("unknown fault type '" + std::string(text) + "' (expected LLL, LLG, LL or LG)");
}

Complex fault_shunt_admittance(FaultType type, Complex z1, Complex z2, Complex z0) {
  if (type == FaultType::LLL) return {kBoltedFaultConductance, 0.0};
  if (std::abs(z1) == 0.0) throw NumericalError("fault point has zero positive-sequence impedance");
  switch (type) {
    case FaultType::LG: {
      const Complex z = z2 + z0;
      if (std::abs(z) == 0.0) throw NumericalError("degenerate sequence data: z2 + z0 = 0");
      return 1.0 / z;
    }
    case FaultType::LL:
      if (std::abs(z2) == 0.0) throw NumericalError("degenerate sequence data: z2 = 0");
      return 1.0 / z2;
    case FaultType::LLG: {
      const Complex sum = z2 + z0;
      if (std::abs(sum) == 0.0 || std::abs(z2 * z0) == 0.0)
        throw NumericalError("degenerate sequence data for LLG fault");
      return sum / (z2 * z0);
    }
    case FaultType::LLL: break;
  }
  return {kBoltedFaultConductance, 0.0};
}

namespace {

void stamp(Eigen::MatrixXcd& y, std::size_t f, std::size_t t, const BranchAdmittance& a) {
  const auto fi = static_cast<Eigen::Index>(f);
  const auto ti = static_cast<Eigen::Index>(t);
  y(fi, fi) += a.yff;
  y(fi, ti) += a.yft;
  y(ti, fi) += a.ytf;
  y(ti, ti) += a.ytt;
}

}  // namespace

Eigen::MatrixXcd negative_sequence_ybus(const PowerSystemCase& c,
                                        std::span<const Complex> voltages) {
  const auto n = static_cast<Eigen::Index>(c.bus_count());
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
  for (const auto& br : c.branches)
    stamp(y, c.bus_index(br.from_bus), c.bus_index(br.to_bus),
          branch_admittance(br, br.negative_sequence(), br.b_charging));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& b = c.buses[static_cast<std::size_t>(i)];
    y(i, i) += Complex(b.shunt_g, b.shunt_b);
  }
  for (const auto& l : c.loads) {
    const auto k = c.bus_index(l.bus);
    y(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) +=
        load_shunt_admittance(l, std::abs(voltages[k]), c.system_mva_base);
  }
  for (const auto& g : c.generators) {
    const auto k = static_cast<Eigen::Index>(c.bus_index(g.bus));
    const double scale = g.mva_rating / c.system_mva_base;
    if (g.is_synchronous()) {
      const auto& p = g.sync();
      y(k, k) += scale / Complex(p.ra, 0.5 * (p.xd_st + p.xq_st));
    } else {
      const auto& p = g.dfig();
      y(k, k) += scale / Complex(p.r_s, p.x_t);
    }
  }
  return y;
}

Eigen::MatrixXcd zero_sequence_ybus(const PowerSystemCase& c) {
  const auto n = static_cast<Eigen::Index>(c.bus_count());
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
  std::vector<bool> gen_bus(c.bus_count(), false);
  for (const auto& g : c.generators) gen_bus[c.bus_index(g.bus)] = true;

  for (const auto& br : c.branches) {
    const auto f = c.bus_index(br.from_bus);
    const auto t = c.bus_index(br.to_bus);
    const Complex z0 = br.zero_sequence();
    if (!br.is_line && (gen_bus[f] != gen_bus[t])) {
      const auto grounded = static_cast<Eigen::Index>(gen_bus[f] ? t : f);
      y(grounded, grounded) += 1.0 / z0;
      continue;
    }
    // Zero-sequence charging is taken equal to the positive-sequence value.
    stamp(y, f, t, branch_admittance(br, z0, br.b_charging));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& b = c.buses[static_cast<std::size_t>(i)];
    y(i, i) += Complex(b.shunt_g, b.shunt_b);
    if (std::abs(y(i, i)) == 0.0 && y.row(i).cwiseAbs().sum() == 0.0) y(i, i) = 1.0;
  }
  return y;
}

Complex driving_point_impedance(const Eigen::MatrixXcd& y, std::size_t bus) {
  const auto n = y.rows();
  Eigen::VectorXcd e = Eigen::VectorXcd::Zero(n);
  e(static_cast<Eigen::Index>(bus)) = 1.0;
  const auto lu = y.partialPivLu();
  if (!(lu.rcond() > 1e-14)) throw NumericalError("sequence network is singular");
  return lu.solve(e)(static_cast<Eigen::Index>(bus));
}

}  // namespace tsrisk
