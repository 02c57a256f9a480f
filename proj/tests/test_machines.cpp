#include <doctest.h>

#include <array>
#include <cmath>
#include <numbers>
#include <tuple>

#include "support.hpp"
#include "tsrisk/machines.hpp"

using namespace tsrisk;

namespace {

constexpr double kOmegaBase = 2.0 * std::numbers::pi * 60.0;

SyncMachineParams sample_machine() {
  SyncMachineParams p;
  p.t_j = 8.0;
  p.damping = 2.0;
  p.xd = 1.8;
  p.xq = 1.7;
  p.xd_t = 0.3;
  p.xq_t = 0.55;
  p.xd_st = 0.25;
  p.xq_st = 0.25;
  p.td0_t = 8.0;
  p.tq0_t = 0.4;
  p.td0_st = 0.03;
  p.tq0_st = 0.05;
  p.ra = 0.003;
  return p;
}

std::array<double, 6> as_array(const SyncMachineState& s) {
  return {s.delta, s.omega, s.eq_t, s.ed_t, s.eq_st, s.ed_st};
}

SyncMachineState from_array(const std::array<double, 6>& a) {
  return {a[0], a[1], a[2], a[3], a[4], a[5]};
}

}  // namespace

TEST_CASE("balanced torque at synchronous speed holds the rotor") {
  const auto p = sample_machine();
  const SyncMachineState x{0.6, 1.0, 1.05, 0.3, 1.0, 0.35};
  SyncMachineInputs in{0.4, 0.7, 2.0, 0.0};
  in.t_m = sg_electrical_torque(x, p, in.i_d, in.i_q);
  const auto r = sg_derivatives(x, p, in, kOmegaBase);
  CHECK(r.delta == 0.0);
  CHECK(std::abs(r.omega) < 1e-15);
}

TEST_CASE("torque step ramps the speed at dM / T_J") {
  auto p = sample_machine();
  p.damping = 0.0;
  const SyncMachineState x{0.6, 1.0, 1.05, 0.3, 1.0, 0.35};
  SyncMachineInputs in{0.4, 0.7, 2.0, 0.0};
  in.t_m = sg_electrical_torque(x, p, in.i_d, in.i_q) + 0.25;
  const auto r = sg_derivatives(x, p, in, kOmegaBase);
  CHECK(r.omega == doctest::Approx(0.25 / p.t_j).epsilon(1e-12));
}

TEST_CASE("analytic Jacobian matches finite differences") {
  const auto p = sample_machine();
  const SyncMachineState x{0.6, 1.002, 1.05, 0.3, 1.0, 0.35};
  const SyncMachineInputs in{0.4, 0.7, 2.0, 0.8};
  const auto jac = sg_jacobian(x, p, in, kOmegaBase);
  const auto base = as_array(x);
  for (int col = 0; col < 6; ++col) {
    const double h = 1e-6 * std::max(1.0, std::abs(base[col]));
    auto up = base, dn = base;
    up[col] += h;
    dn[col] -= h;
    const auto ru = as_array(sg_derivatives(from_array(up), p, in, kOmegaBase));
    const auto rd = as_array(sg_derivatives(from_array(dn), p, in, kOmegaBase));
    for (int row = 0; row < 6; ++row) {
      const double fd = (ru[row] - rd[row]) / (2.0 * h);
      const double an = jac(row, col);
      INFO("row ", row, " col ", col);
      CHECK(std::abs(fd - an) <= 1e-6 * std::max(1.0, std::abs(an)));
    }
  }
}

TEST_CASE("EMF chains rest at the steady-state relations") {
  const auto p = sample_machine();
  const double id = 0.45, iq = 0.62;
  SyncMachineState x;
  x.ed_t = (p.xq - p.xq_t) * iq;
  x.ed_st = x.ed_t + (p.xq_t - p.xq_st) * iq;
  x.eq_t = 1.1;
  x.eq_st = x.eq_t - (p.xd_t - p.xd_st) * id;
  const double efd = x.eq_t + (p.xd - p.xd_t) * id;
  const auto r = sg_derivatives(x, p, {id, iq, efd, 0.0}, kOmegaBase);
  CHECK(std::abs(r.eq_t) < 1e-14);
  CHECK(std::abs(r.ed_t) < 1e-14);
  CHECK(std::abs(r.eq_st) < 1e-13);
  CHECK(std::abs(r.ed_st) < 1e-13);
}

TEST_CASE("stator currents satisfy the subtransient equations") {
  const auto p = sample_machine();
  const SyncMachineState x{0.6, 1.0, 1.05, 0.3, 1.0, 0.35};
  const double vd = 0.55, vq = 0.83;
  const auto [id, iq] = sg_stator_currents(x, p, vd, vq);
  CHECK(vd == doctest::Approx(x.ed_st - p.ra * id + p.xq_st * iq));
  CHECK(vq == doctest::Approx(x.eq_st - p.ra * iq - p.xd_st * id));
}

TEST_CASE("frame rotations are inverse") {
  const Complex v = std::polar(1.02, 0.3);
  const double delta = 0.9;
  CHECK(std::abs(to_network_frame(to_machine_frame(v, delta), delta) - v) < 1e-15);
  // A voltage aligned with the rotor q axis has no d component.
  const Complex m = to_machine_frame(std::polar(1.0, delta), delta);
  CHECK(std::abs(m.real()) < 1e-15);
  CHECK(m.imag() == doctest::Approx(1.0));
}

TEST_CASE("controllers rest at their initial operating point") {
  const ControllerParams c;
  const double pm = 0.8;
  const GovernorState g{pm, pm};
  const auto gr = governor_rates(g, c.governor, pm, 0.0);
  CHECK(gr.valve == 0.0);
  CHECK(gr.lead_lag == 0.0);
  CHECK(governor_output(g, c.governor, 0.0) == doctest::Approx(pm));

  const PssState s{};
  const auto sr = pss_rates(s, c.pss, 0.0);
  CHECK(sr.washout == 0.0);
  CHECK(sr.lag1 == 0.0);
  CHECK(sr.lag2 == 0.0);
  CHECK(pss_output(s, c.pss, 0.0) == 0.0);

  const double efd = 2.1, vt = 1.03;
  ExciterState e;
  e.v_meas = vt;
  e.e_fd = efd;
  e.v_r = c.exciter.ke * efd;
  e.rate_fb = c.exciter.kf / c.exciter.tf * efd;
  const double v_ref = vt + e.v_r / c.exciter.ka;
  const auto er = exciter_rates(e, c.exciter, v_ref, vt, 0.0);
  CHECK(std::abs(er.v_meas) < 1e-15);
  CHECK(std::abs(er.v_r) < 1e-12);
  CHECK(std::abs(er.e_fd) < 1e-15);
  CHECK(std::abs(er.rate_fb) < 1e-15);
}

TEST_CASE("governor droop and valve limit") {
  GovernorParams p;
  const GovernorState g{0.5, 0.5};
  // Overspeed closes the valve.
  CHECK(governor_rates(g, p, 0.5, 0.01).valve < 0.0);
  // At the upper limit an opening demand is held.
  const GovernorState full{p.v_max, p.v_max};
  CHECK(governor_rates(full, p, p.v_max, -0.05).valve == 0.0);
}

TEST_CASE("PSS output saturates") {
  PssParams p;
  const PssState s{};
  CHECK(pss_output(s, p, 0.5) == doctest::Approx(p.v_max));
  CHECK(pss_output(s, p, -0.5) == doctest::Approx(p.v_min));
}

TEST_CASE("DFIG trivial fixed point") {
  const DfigParams p;
  const DfigState x{0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0};
  const auto r = dfig_derivatives(x, p, {Complex(0, 0), Complex(0, 0), 0.0}, kOmegaBase);
  CHECK(r.e_d == 0.0);
  CHECK(r.e_q == 0.0);
  CHECK(r.omega_r == 0.0);
  CHECK(r.omega_t == 0.0);
  CHECK(r.theta_tw == 0.0);
}

TEST_CASE("DFIG reactive output is the stator phasor product") {
  const DfigParams p;
  const DfigState x{0.95, 0.21, 1.2, 1.2, 0.3, 0.0, 0.0};
  const Complex v_s = std::polar(1.01, 0.12);
  const Complex i_s = dfig_stator_current(x, p, v_s);
  const Complex i_r = dfig_rotor_current(x, p, i_s);
  const auto pw = dfig_power(v_s, i_s, Complex(0.02, -0.1), i_r);
  CHECK(std::abs(pw.q_w - std::imag(v_s * std::conj(i_s))) < 1e-10);
  CHECK(std::abs(dfig_stator_voltage(x, p, i_s) - v_s) < 1e-14);
}

TEST_CASE("DFIG balanced shaft holds the generator speed") {
  const DfigParams p;
  DfigState x{0.95, 0.21, 1.2, 1.21, 0.0, 0.0, 0.0};
  const Complex i_s(0.7, -0.2);
  const double te = dfig_air_gap_torque(x, i_s);
  x.theta_tw = (te - p.d_tw * (x.omega_t - x.omega_r)) / p.k_tw;
  const auto r = dfig_derivatives(x, p, {i_s, Complex(0.01, 0.02), 0.4}, kOmegaBase);
  CHECK(std::abs(r.omega_r) < 1e-15);
}

TEST_CASE("DFIG converter integrators reproduce a rotor voltage") {
  const DfigParams p;
  const DfigState x{0.95, 0.21, 1.2, 1.2, 0.3, 0.0, 0.0};
  const Complex v_s = std::polar(1.01, 0.12);
  const Complex i_s = dfig_stator_current(x, p, v_s);
  const DfigSetpoints sp{0.7, 0.0, 1.01, 1.2};
  const Complex v_r(0.031, -0.12);
  auto y = x;
  std::tie(y.x_p, y.x_q) = dfig_integrators_for(x, p, sp, v_s, i_s, v_r);
  const auto ctl = dfig_converter(y, p, sp, v_s, i_s, false);
  CHECK(std::abs(ctl.v_r - v_r) < 1e-14);

  const auto crow = dfig_converter(y, p, sp, v_s, i_s, true);
  CHECK(crow.v_r == Complex(0.0, 0.0));
  CHECK(crow.dx_p == 0.0);
  CHECK(crow.dx_q == 0.0);
}

TEST_CASE("DFIG converter keeps commands inside the current limit") {
  const DfigParams p;
  const DfigState x{0.95, 0.21, 1.2, 1.2, 0.3, 0.0, 0.0};
  const Complex v_s = std::polar(0.5, 0.1);
  const DfigSetpoints sp{1.0, 0.0, 1.0, 1.2};
  const auto ctl = dfig_converter(x, p, sp, v_s, Complex(0.5, 0.0), false);
  const double i_cmd = std::hypot(ctl.p_cmd, ctl.q_cmd) / std::abs(v_s);
  CHECK(i_cmd <= p.i_max + 1e-12);
  // Reactive support takes priority during the sag.
  CHECK(ctl.q_cmd / std::abs(v_s) == doctest::Approx(p.i_max));
}
