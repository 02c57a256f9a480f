#pragma once

#include <complex>

#include <Eigen/Dense>

#include "tsrisk/case.hpp"

namespace tsrisk {

// Synchronous machine ------------------------------------------------------
//
// Rotor angle delta is measured from the synchronously rotating network
// reference. Machine dq quantities relate to network phasors through
//   vd + j vq = V * exp(-j (delta - pi/2)).
// Speed is in pu of synchronous speed; all other quantities are on the
// machine MVA base. Torque and power are interchangeable near rated speed.

struct SyncMachineState {
  double delta = 0.0;  // rad
  double omega = 1.0;  // pu
  double eq_t = 0.0;   // E'q
  double ed_t = 0.0;   // E'd
  double eq_st = 0.0;  // E''q
  double ed_st = 0.0;  // E''d
};

/// Network-side quantities seen by the machine during one derivative call.
struct SyncMachineInputs {
  double i_d = 0.0;
  double i_q = 0.0;
  double e_fd = 0.0;
  double t_m = 0.0;  // mechanical torque
};

using SyncMachineRates = SyncMachineState;

/// Swing equation plus the d- and q-axis transient/subtransient EMF chains.
SyncMachineRates sg_derivatives(const SyncMachineState& x, const SyncMachineParams& p,
                                const SyncMachineInputs& in, double omega_base);

/// d(rates)/d(state) with inputs held fixed; rows/cols in SyncMachineState order.
Eigen::Matrix<double, 6, 6> sg_jacobian(const SyncMachineState& x, const SyncMachineParams& p,
                                        const SyncMachineInputs& in, double omega_base);

/// Air-gap torque for the given stator currents.
double sg_electrical_torque(const SyncMachineState& x, const SyncMachineParams& p, double i_d,
                            double i_q);

/// Stator currents (id, iq) for terminal voltage (vd, vq) from the
/// subtransient stator equations.
std::pair<double, double> sg_stator_currents(const SyncMachineState& x,
                                             const SyncMachineParams& p, double v_d, double v_q);

Complex to_machine_frame(Complex network, double delta);
Complex to_network_frame(Complex machine, double delta);

// Controllers ---------------------------------------------------------------

struct GovernorState {
  double valve = 0.0;
  double lead_lag = 0.0;
};

struct ExciterState {
  double v_meas = 0.0;
  double v_r = 0.0;
  double e_fd = 0.0;
  double rate_fb = 0.0;
};

struct PssState {
  double washout = 0.0;
  double lag1 = 0.0;
  double lag2 = 0.0;
};

double governor_output(const GovernorState& s, const GovernorParams& p, double speed_dev);
GovernorState governor_rates(const GovernorState& s, const GovernorParams& p, double p_ref,
                             double speed_dev);

double pss_output(const PssState& s, const PssParams& p, double speed_dev);
PssState pss_rates(const PssState& s, const PssParams& p, double speed_dev);

ExciterState exciter_rates(const ExciterState& s, const ExciterParams& p, double v_ref,
                           double v_term, double v_pss);

// DFIG -----------------------------------------------------------------------
//
// Third-order model in the synchronous network frame (d = real, q = imag),
// generator convention for stator current, rotor current into the rotor.
// Speeds in pu, slip s = 1 - omega_r.

struct DfigState {
  double e_d = 0.0;
  double e_q = 0.0;
  double omega_r = 1.0;
  double omega_t = 1.0;
  double theta_tw = 0.0;
  double x_p = 0.0;  // active power PI integrator
  double x_q = 0.0;  // reactive power PI integrator
};

struct DfigMachineInputs {
  Complex i_s;  // stator current, machine base
  Complex v_r;  // rotor voltage
  double t_m = 0.0;
};

struct DfigMachineRates {
  double e_d = 0.0;
  double e_q = 0.0;
  double omega_r = 0.0;
  double omega_t = 0.0;
  double theta_tw = 0.0;
};

DfigMachineRates dfig_derivatives(const DfigState& x, const DfigParams& p,
                                  const DfigMachineInputs& in, double omega_base);

inline Complex dfig_emf(const DfigState& x) { return {x.e_d, x.e_q}; }
/// Stator terminal voltage from the internal voltage and stator current.
Complex dfig_stator_voltage(const DfigState& x, const DfigParams& p, Complex i_s);
/// Stator current drawn out of the machine for a given terminal voltage.
Complex dfig_stator_current(const DfigState& x, const DfigParams& p, Complex v_s);
Complex dfig_rotor_current(const DfigState& x, const DfigParams& p, Complex i_s);
double dfig_air_gap_torque(const DfigState& x, Complex i_s);

struct DfigPower {
  double p_w = 0.0;  // stator minus rotor active power delivered to the grid
  double q_w = 0.0;  // stator reactive power
};
DfigPower dfig_power(Complex v_s, Complex i_s, Complex v_r, Complex i_r);

/// Converter references held by the unit.
struct DfigSetpoints {
  double p_ref = 0.0;  // pu machine base at omega_ref
  double q_ref = 0.0;
  double v_set = 1.0;
  double omega_ref = 1.0;
};

struct DfigControl {
  Complex v_r;
  double dx_p = 0.0;
  double dx_q = 0.0;
  double p_cmd = 0.0;  // current-limited power command
  double q_cmd = 0.0;
};

/// Decoupled P/Q control in a frame aligned with the terminal voltage.
/// Reactive current has priority inside the converter current limit; the
/// slip-rotation term is fed forward. With the crowbar in, v_r = 0 and the
/// integrators hold.
DfigControl dfig_converter(const DfigState& x, const DfigParams& p, const DfigSetpoints& sp,
                           Complex v_s, Complex i_s, bool crowbar);

/// Integrator values that reproduce rotor voltage v_r at the current
/// operating point with zero tracking error in the proportional paths.
std::pair<double, double> dfig_integrators_for(const DfigState& x, const DfigParams& p,
                                               const DfigSetpoints& sp, Complex v_s, Complex i_s,
                                               Complex v_r);

}  // namespace tsrisk
