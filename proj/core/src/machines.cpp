#include "tsrisk/machines.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tsrisk {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

// Rate of a state held inside [lo, hi] by a non-windup limiter.
double limited_rate(double value, double rate, double lo, double hi) {
  if (value >= hi && rate > 0.0) return 0.0;
  if (value <= lo && rate < 0.0) return 0.0;
  return rate;
}

}  // namespace

Complex to_machine_frame(Complex network, double delta) {
  return network * std::polar(1.0, -(delta - kHalfPi));
}

Complex to_network_frame(Complex machine, double delta) {
  return machine * std::polar(1.0, delta - kHalfPi);
}

double sg_electrical_torque(const SyncMachineState& x, const SyncMachineParams& p, double i_d,
                            double i_q) {
  return x.ed_st * i_d + x.eq_st * i_q + (p.xq_st - p.xd_st) * i_d * i_q;
}

std::pair<double, double> sg_stator_currents(const SyncMachineState& x,
                                             const SyncMachineParams& p, double v_d, double v_q) {
  const double a = x.ed_st - v_d;
  const double b = x.eq_st - v_q;
  const double det = p.ra * p.ra + p.xd_st * p.xq_st;
  return {(p.ra * a + p.xq_st * b) / det, (p.ra * b - p.xd_st * a) / det};
}

SyncMachineRates sg_derivatives(const SyncMachineState& x, const SyncMachineParams& p,
                                const SyncMachineInputs& in, double omega_base) {
  SyncMachineRates r;
  const double t_e = sg_electrical_torque(x, p, in.i_d, in.i_q);
  r.delta = omega_base * (x.omega - 1.0);
  r.omega = (in.t_m - t_e - p.damping * (x.omega - 1.0)) / p.t_j;
  r.eq_t = (in.e_fd - x.eq_t - (p.xd - p.xd_t) * in.i_d) / p.td0_t;
  r.ed_t = (-x.ed_t + (p.xq - p.xq_t) * in.i_q) / p.tq0_t;
  // The subtransient chains carry the transient EMF rate as a feed-through term.
  r.eq_st = (x.eq_t - x.eq_st - (p.xd_t - p.xd_st) * in.i_d) / p.td0_st + r.eq_t;
  r.ed_st = (x.ed_t - x.ed_st + (p.xq_t - p.xq_st) * in.i_q) / p.tq0_st + r.ed_t;
  return r;
}

Eigen::Matrix<double, 6, 6> sg_jacobian(const SyncMachineState& /*x*/, const SyncMachineParams& p,
                                        const SyncMachineInputs& in, double omega_base) {
  Eigen::Matrix<double, 6, 6> j = Eigen::Matrix<double, 6, 6>::Zero();
  enum { D = 0, W, EQT, EDT, EQS, EDS };
  j(D, W) = omega_base;
  j(W, W) = -p.damping / p.t_j;
  j(W, EQS) = -in.i_q / p.t_j;
  j(W, EDS) = -in.i_d / p.t_j;
  j(EQT, EQT) = -1.0 / p.td0_t;
  j(EDT, EDT) = -1.0 / p.tq0_t;
  j(EQS, EQT) = 1.0 / p.td0_st - 1.0 / p.td0_t;
  j(EQS, EQS) = -1.0 / p.td0_st;
  j(EDS, EDT) = 1.0 / p.tq0_st - 1.0 / p.tq0_t;
  j(EDS, EDS) = -1.0 / p.tq0_st;
  return j;
}

double governor_output(const GovernorState& s, const GovernorParams& p, double speed_dev) {
  const double ratio = p.t2 / p.t3;
  return ratio * s.valve + (1.0 - ratio) * s.lead_lag - p.dt * speed_dev;
}

GovernorState governor_rates(const GovernorState& s, const GovernorParams& p, double p_ref,
                             double speed_dev) {
  GovernorState r;
  r.valve = limited_rate(s.valve, (p_ref - speed_dev / p.droop - s.valve) / p.t1, p.v_min,
                         p.v_max);
  r.lead_lag = (s.valve - s.lead_lag) / p.t3;
  return r;
}

namespace {

struct PssStages {
  double y1, y2, y3;
};

PssStages pss_stages(const PssState& s, const PssParams& p, double speed_dev) {
  const double u = p.gain * speed_dev;
  const double y1 = u - s.washout;
  const double y2 = s.lag1 + (p.t_lead1 / p.t_lag1) * (y1 - s.lag1);
  const double y3 = s.lag2 + (p.t_lead2 / p.t_lag2) * (y2 - s.lag2);
  return {y1, y2, y3};
}

}  // namespace

double pss_output(const PssState& s, const PssParams& p, double speed_dev) {
  return std::clamp(pss_stages(s, p, speed_dev).y3, p.v_min, p.v_max);
}

PssState pss_rates(const PssState& s, const PssParams& p, double speed_dev) {
  const auto st = pss_stages(s, p, speed_dev);
  PssState r;
  r.washout = (p.gain * speed_dev - s.washout) / p.t_washout;
  r.lag1 = (st.y1 - s.lag1) / p.t_lag1;
  r.lag2 = (st.y2 - s.lag2) / p.t_lag2;
  return r;
}

ExciterState exciter_rates(const ExciterState& s, const ExciterParams& p, double v_ref,
                           double v_term, double v_pss) {
  ExciterState r;
  const double v_meas = p.tr > 0.0 ? s.v_meas : v_term;
  r.v_meas = p.tr > 0.0 ? (v_term - s.v_meas) / p.tr : 0.0;
  const double kf_tf = p.kf / p.tf;
  const double v_f = kf_tf * s.e_fd - s.rate_fb;
  r.rate_fb = (kf_tf * s.e_fd - s.rate_fb) / p.tf;
  r.v_r = limited_rate(s.v_r, (p.ka * (v_ref - v_meas - v_f + v_pss) - s.v_r) / p.ta, p.vr_min,
                       p.vr_max);
  r.e_fd = (s.v_r - p.ke * s.e_fd) / p.te;
  return r;
}

// DFIG ----------------------------------------------------------------------

namespace {

double coupling(const DfigParams& p) { return p.l_m / (p.l_m + p.l_r); }

}  // namespace

DfigMachineRates dfig_derivatives(const DfigState& x, const DfigParams& p,
                                  const DfigMachineInputs& in, double omega_base) {
  const double slip = 1.0 - x.omega_r;
  const double k = coupling(p);
  const double dx = p.x - p.x_t;
  DfigMachineRates r;
  r.e_d = -(x.e_d - dx * in.i_s.imag()) / p.t_o + omega_base * slip * x.e_q -
          omega_base * k * in.v_r.imag();
  r.e_q = -(x.e_q + dx * in.i_s.real()) / p.t_o - omega_base * slip * x.e_d +
          omega_base * k * in.v_r.real();
  const double shaft = p.k_tw * x.theta_tw + p.d_tw * (x.omega_t - x.omega_r);
  r.omega_r = (shaft - dfig_air_gap_torque(x, in.i_s)) / (2.0 * p.h_g);
  r.omega_t = (in.t_m - shaft) / (2.0 * p.h_t);
  r.theta_tw = omega_base * (x.omega_t - x.omega_r);
  return r;
}

Complex dfig_stator_voltage(const DfigState& x, const DfigParams& p, Complex i_s) {
  return dfig_emf(x) - Complex(p.r_s, p.x_t) * i_s;
}

Complex dfig_stator_current(const DfigState& x, const DfigParams& p, Complex v_s) {
  return (dfig_emf(x) - v_s) / Complex(p.r_s, p.x_t);
}

Complex dfig_rotor_current(const DfigState& x, const DfigParams& p, Complex i_s) {
  const Complex psi_r = dfig_emf(x) / Complex(0.0, coupling(p));
  return (psi_r + p.l_m * i_s) / (p.l_m + p.l_r);
}

double dfig_air_gap_torque(const DfigState& x, Complex i_s) {
  return x.e_d * i_s.real() + x.e_q * i_s.imag();
}

DfigPower dfig_power(Complex v_s, Complex i_s, Complex v_r, Complex i_r) {
  const Complex s_stator = v_s * std::conj(i_s);
  const Complex s_rotor = v_r * std::conj(i_r);
  return {s_stator.real() - s_rotor.real(), s_stator.imag()};
}

namespace {

struct Commands {
  double p_cmd;
  double q_cmd;
};

Commands power_commands(const DfigState& x, const DfigParams& p, const DfigSetpoints& sp,
                        double v_mag) {
  const double v = std::max(v_mag, 0.01);
  const double p_want = sp.p_ref + p.k_speed * (x.omega_r - sp.omega_ref);
  const double q_want = sp.q_ref + p.k_v * (sp.v_set - v_mag);
  const double i_react = std::clamp(q_want / v, -p.i_max, p.i_max);
  const double i_act_max = std::sqrt(std::max(0.0, p.i_max * p.i_max - i_react * i_react));
  const double i_act = std::clamp(p_want / v, -i_act_max, i_act_max);
  return {v * i_act, v * i_react};
}

}  // namespace

DfigControl dfig_converter(const DfigState& x, const DfigParams& p, const DfigSetpoints& sp,
                           Complex v_s, Complex i_s, bool crowbar) {
  DfigControl out;
  const double v_mag = std::abs(v_s);
  const auto cmd = power_commands(x, p, sp, v_mag);
  out.p_cmd = cmd.p_cmd;
  out.q_cmd = cmd.q_cmd;
  if (crowbar) {
    out.v_r = Complex(0.0, 0.0);
    return out;
  }
  const double slip = 1.0 - x.omega_r;
  const double k = coupling(p);
  const Complex s_stator = v_s * std::conj(i_s);
  const Complex align = v_mag > 0.0 ? std::conj(v_s) / v_mag : Complex(1.0, 0.0);

  const double u_d = p.kp_p * (cmd.p_cmd / (1.0 - slip) - s_stator.real()) + x.x_p;
  const double u_q = -(p.kp_q * (cmd.q_cmd - s_stator.imag()) + x.x_q);
  out.v_r = slip * dfig_emf(x) / k + Complex(u_d, u_q) / align;

  const Complex i_r = dfig_rotor_current(x, p, i_s);
  const auto pw = dfig_power(v_s, i_s, out.v_r, i_r);
  out.dx_p = p.ki_p * (cmd.p_cmd - pw.p_w);
  out.dx_q = p.ki_q * (cmd.q_cmd - s_stator.imag());
  return out;
}

std::pair<double, double> dfig_integrators_for(const DfigState& x, const DfigParams& p,
                                               const DfigSetpoints& sp, Complex v_s, Complex i_s,
                                               Complex v_r) {
  const double v_mag = std::abs(v_s);
  const auto cmd = power_commands(x, p, sp, v_mag);
  const double slip = 1.0 - x.omega_r;
  const double k = coupling(p);
  const Complex s_stator = v_s * std::conj(i_s);
  const Complex align = v_mag > 0.0 ? std::conj(v_s) / v_mag : Complex(1.0, 0.0);
  const Complex u = (v_r - slip * dfig_emf(x) / k) * align;
  const double x_p = u.real() - p.kp_p * (cmd.p_cmd / (1.0 - slip) - s_stator.real());
  const double x_q = -u.imag() - p.kp_q * (cmd.q_cmd - s_stator.imag());
  return {x_p, x_q};
}

}  // namespace tsrisk
