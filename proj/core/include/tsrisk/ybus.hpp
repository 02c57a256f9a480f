#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "tsrisk/case.hpp"

namespace tsrisk {

using SparseComplexMatrix = Eigen::SparseMatrix<Complex>;

/// Two-port pi-model admittances of a branch, from-side tap applied.
struct BranchAdmittance {
  Complex yff, yft, ytf, ytt;
};

BranchAdmittance branch_admittance(const Branch& br, Complex z_series, double b_charging);
inline BranchAdmittance branch_admittance(const Branch& br) {
  return branch_admittance(br, br.z1(), br.b_charging);
}

/// Constant shunt that consumes the load's complex power at |V| = v_mag:
/// y = conj(S) / |V|^2 (S in pu on mva_base).
Complex load_shunt_admittance(const Load& load, double v_mag, double mva_base);

/// Nodal admittance matrix in bus order. With loads_as_shunts set, every
/// load is folded in as a constant admittance at the supplied voltages.
SparseComplexMatrix build_ybus(const PowerSystemCase& c, bool loads_as_shunts = false,
                               std::span<const Complex> pf_voltages = {});

struct SplitCase {
  PowerSystemCase system;
  int fault_bus = 0;
  int section_from = 0;  // branch id, from_bus -> fault bus
  int section_to = 0;    // branch id, fault bus -> to_bus
};

/// Replaces a line by two series sections meeting at a new fault bus located
/// location_pct percent of the way from the from-bus. Series (and sequence)
/// impedances split linearly; line charging stays lumped at the original
/// line ends so the split network is electrically identical to the input.
SplitCase split_line_at(const PowerSystemCase& c, int branch_id, int location_pct);

/// Schur-complement elimination of the listed nodes.
Eigen::MatrixXcd kron_eliminate(const Eigen::MatrixXcd& y, std::span<const std::size_t> eliminate);

}  // namespace tsrisk
