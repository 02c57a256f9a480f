#pragma once

#include <optional>
#include <span>
#include <string_view>

#include <Eigen/Dense>

#include "tsrisk/case.hpp"

namespace tsrisk {

enum class FaultType { LLL, LLG, LL, LG };

const char* to_string(FaultType type);
/// Accepts "LLL", "LLG", "LL" and "LG" (case-insensitive).
FaultType parse_fault_type(std::string_view text);

/// One contingency on a line. t_clear is absolute time.
struct FaultEvent {
  int line = 0;
  int location_pct = 50;
  FaultType type = FaultType::LLL;
  double t_apply = 1.0;
  double t_clear = 1.2;
  bool trip_line = true;

  bool operator==(const FaultEvent&) const = default;
};

/// Conductance used for a bolted three-phase fault, pu.
inline constexpr double kBoltedFaultConductance = 1e6;

/// Positive-sequence shunt that represents an unbalanced fault at a bus with
/// the given negative- and zero-sequence Thevenin impedances.
Complex fault_shunt_admittance(FaultType type, Complex z1, Complex z2, Complex z0);

struct SequenceThevenin {
  Complex z1, z2, z0;
};

/// Negative-sequence nodal matrix: branches with their z2, machines as their
/// subtransient (SG) or transient (DFIG) admittance, loads as shunts at the
/// supplied voltages.
Eigen::MatrixXcd negative_sequence_ybus(const PowerSystemCase& c,
                                        std::span<const Complex> voltages);

/// Zero-sequence nodal matrix. Transformers with one end at a generator bus
/// are treated as grounded-wye on the network side and delta on the machine
/// side; other transformers pass zero-sequence current. Machines and loads
/// are ungrounded. Buses left without any zero-sequence path get a unit
/// diagonal so the matrix stays invertible.
Eigen::MatrixXcd zero_sequence_ybus(const PowerSystemCase& c);

/// Driving-point impedance of a nodal matrix at one bus.
Complex driving_point_impedance(const Eigen::MatrixXcd& y, std::size_t bus);

}  // namespace tsrisk
