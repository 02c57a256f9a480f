#include "tsrisk/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

#include <fmt/format.h>

#include "tsrisk/error.hpp"
#include "tsrisk/machines.hpp"
#include "tsrisk/ybus.hpp"

namespace tsrisk {

namespace {

constexpr std::size_t kSgStates = 15;
constexpr std::size_t kDfigStates = 7;
constexpr double kTimeEps = 1e-9;

// Offsets inside one synchronous unit's block.
enum SgSlot : std::size_t {
  kDelta = 0, kOmega, kEqT, kEdT, kEqSt, kEdSt,
  kValve, kLeadLag,
  kVMeas, kVr, kEfd, kRateFb,
  kWashout, kLag1, kLag2,
};

enum DfigSlot : std::size_t { kEd = 0, kEq, kWr, kWt, kTheta, kXp, kXq };

struct SgUnit {
  std::string id;
  std::size_t bus = 0;
  double scale = 1.0;  // machine base / system base
  SyncMachineParams p;
  ControllerParams c;
  double p_ref = 0.0;
  double v_ref = 0.0;
  std::size_t off = 0;
  Complex y_norton;  // system base
  bool salient = false;
};

struct DfigUnit {
  std::string id;
  std::size_t bus = 0;
  double scale = 1.0;
  DfigParams p;
  DfigSetpoints sp;
  double t_m = 0.0;
  std::size_t off = 0;
  Complex y_norton;
};

SyncMachineState sg_state(const double* s) {
  return {s[kDelta], s[kOmega], s[kEqT], s[kEdT], s[kEqSt], s[kEdSt]};
}

DfigState dfig_state(const double* s) {
  return {s[kEd], s[kEq], s[kWr], s[kWt], s[kTheta], s[kXp], s[kXq]};
}

using Lu = Eigen::PartialPivLU<Eigen::MatrixXcd>;

enum class Topology { Pre, Fault, Post };

}  // namespace

struct DynamicModel::Impl {
  PowerSystemCase sys;
  PowerFlowSolution pf;
  std::vector<Complex> v0;
  std::vector<Complex> load_y;  // per bus, system base
  std::vector<SgUnit> sgs;
  std::vector<DfigUnit> dfigs;
  std::vector<double> x0;
  double omega_b = 0.0;
  double residual0 = 0.0;
  bool v_dependent = false;  // sources depend on the terminal voltage
  Eigen::MatrixXcd y_base;   // unsplit network with loads and machine admittances
  Lu lu_base;

  void initialize();
  Eigen::MatrixXcd augmented(const PowerSystemCase& c) const;

  // Per-run workspace --------------------------------------------------------
  struct Run {
    const Impl& m;
    std::size_t n = 0;
    const Eigen::MatrixXcd* y[3] = {nullptr, nullptr, nullptr};
    const Lu* lu[3] = {nullptr, nullptr, nullptr};
    std::vector<bool> crowbar;

    explicit Run(const Impl& model) : m(model), crowbar(model.dfigs.size(), false) {}

    Eigen::VectorXcd sources(const std::vector<double>& x, const Eigen::VectorXcd& v) const;
    Eigen::VectorXcd solve(Topology t, const std::vector<double>& x,
                           const Eigen::VectorXcd& guess) const;
    std::vector<double> rates(const std::vector<double>& x, const Eigen::VectorXcd& v) const;
    double residual(Topology t, const std::vector<double>& x, const Eigen::VectorXcd& v) const;
  };

  void clamp(std::vector<double>& x) const;
};

// ---------------------------------------------------------------------------

Eigen::MatrixXcd DynamicModel::Impl::augmented(const PowerSystemCase& c) const {
  Eigen::MatrixXcd y = Eigen::MatrixXcd(build_ybus(c));
  for (std::size_t k = 0; k < load_y.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    y(i, i) += load_y[k];
  }
  for (const auto& u : sgs) {
    const auto i = static_cast<Eigen::Index>(u.bus);
    y(i, i) += u.y_norton;
  }
  for (const auto& u : dfigs) {
    const auto i = static_cast<Eigen::Index>(u.bus);
    y(i, i) += u.y_norton;
  }
  return y;
}

void DynamicModel::Impl::initialize() {
  omega_b = 2.0 * std::numbers::pi * sys.nominal_hz;
  v0 = pf.voltages();
  load_y.assign(sys.bus_count(), Complex(0.0, 0.0));
  for (const auto& l : sys.loads) {
    const auto k = sys.bus_index(l.bus);
    load_y[k] += load_shunt_admittance(l, std::abs(v0[k]), sys.system_mva_base);
  }

  const auto outputs = generator_outputs_mva(sys, pf);
  std::size_t off = 0;
  for (std::size_t g = 0; g < sys.generators.size(); ++g) {
    const auto& gen = sys.generators[g];
    if (gen.is_synchronous()) {
      SgUnit u;
      u.id = gen.id;
      u.bus = sys.bus_index(gen.bus);
      u.scale = gen.mva_rating / sys.system_mva_base;
      u.p = gen.sync();
      u.c = *gen.controls;
      u.y_norton = u.scale / Complex(u.p.ra, u.p.xd_st);
      u.salient = std::abs(u.p.xd_st - u.p.xq_st) > 1e-12;
      u.off = off;
      off += kSgStates;
      sgs.push_back(u);
    } else {
      DfigUnit u;
      u.id = gen.id;
      u.bus = sys.bus_index(gen.bus);
      u.scale = gen.mva_rating / sys.system_mva_base;
      u.p = gen.dfig();
      u.y_norton = u.scale / Complex(u.p.r_s, u.p.x_t);
      u.off = off;
      off += kDfigStates;
      dfigs.push_back(u);
    }
  }
  v_dependent = !dfigs.empty() ||
                std::any_of(sgs.begin(), sgs.end(), [](const SgUnit& u) { return u.salient; });
  x0.assign(off, 0.0);

  auto output_of = [&](const std::string& id) {
    return outputs[sys.generator_index(id)] / sys.generators[sys.generator_index(id)].mva_rating;
  };

  for (auto& u : sgs) {
    const auto& p = u.p;
    const Complex v = v0[u.bus];
    const Complex s = output_of(u.id);
    const Complex i = std::conj(s / v);
    const Complex e_q = v + Complex(p.ra, p.xq) * i;
    const double delta = std::arg(e_q);
    const Complex vm = to_machine_frame(v, delta);
    const Complex im = to_machine_frame(i, delta);
    const double vd = vm.real(), vq = vm.imag(), id = im.real(), iq = im.imag();

    double* x = x0.data() + u.off;
    x[kDelta] = delta;
    x[kOmega] = 1.0;
    x[kEdSt] = vd + p.ra * id - p.xq_st * iq;
    x[kEqSt] = vq + p.ra * iq + p.xd_st * id;
    x[kEdT] = (p.xq - p.xq_t) * iq;
    x[kEqT] = x[kEqSt] + (p.xd_t - p.xd_st) * id;
    const double e_fd = x[kEqT] + (p.xd - p.xd_t) * id;
    const double t_e = sg_electrical_torque(sg_state(x), p, id, iq);

    const auto& gov = u.c.governor;
    if (t_e < gov.v_min - 1e-9 || t_e > gov.v_max + 1e-9)
      throw InitializationError(fmt::format(
          "generator {}: governor reference {:.4f} pu is outside its limits [{}, {}]", u.id, t_e,
          gov.v_min, gov.v_max));
    u.p_ref = t_e;
    x[kValve] = t_e;
    x[kLeadLag] = t_e;

    const auto& ex = u.c.exciter;
    const double v_r = ex.ke * e_fd;
    if (v_r < ex.vr_min - 1e-9 || v_r > ex.vr_max + 1e-9)
      throw InitializationError(fmt::format(
          "generator {}: exciter regulator output {:.4f} pu is outside its limits [{}, {}]", u.id,
          v_r, ex.vr_min, ex.vr_max));
    x[kVMeas] = std::abs(v);
    x[kVr] = v_r;
    x[kEfd] = e_fd;
    x[kRateFb] = ex.kf / ex.tf * e_fd;
    u.v_ref = std::abs(v) + v_r / ex.ka;
  }

  for (auto& u : dfigs) {
    const auto& p = u.p;
    const Complex v = v0[u.bus];
    const Complex s_out = output_of(u.id);
    const double slip = p.rated_slip;
    const double k = p.l_m / (p.l_m + p.l_r);
    DfigState st;
    st.omega_r = 1.0 - slip;
    st.omega_t = st.omega_r;

    // Stator power that leaves s_out.real() after the rotor-side exchange.
    double p_s = s_out.real() / (1.0 - slip);
    Complex i_s, e, v_r;
    for (int it = 0; it < 100; ++it) {
      i_s = std::conj(Complex(p_s, s_out.imag()) / v);
      e = v + Complex(p.r_s, p.x_t) * i_s;
      const Complex a = e + Complex(0.0, p.x - p.x_t) * i_s;
      v_r = slip * e / k - Complex(0.0, 1.0) * a / (omega_b * k * p.t_o);
      st.e_d = e.real();
      st.e_q = e.imag();
      const Complex i_r = dfig_rotor_current(st, p, i_s);
      const double p_r = (v_r * std::conj(i_r)).real();
      const double next = s_out.real() + p_r;
      if (std::abs(next - p_s) < 1e-14) {
        p_s = next;
        break;
      }
      p_s = next;
    }
    i_s = std::conj(Complex(p_s, s_out.imag()) / v);
    e = v + Complex(p.r_s, p.x_t) * i_s;
    st.e_d = e.real();
    st.e_q = e.imag();
    const Complex a = e + Complex(0.0, p.x - p.x_t) * i_s;
    v_r = slip * e / k - Complex(0.0, 1.0) * a / (omega_b * k * p.t_o);

    const double t_e = dfig_air_gap_torque(st, i_s);
    st.theta_tw = t_e / p.k_tw;
    u.t_m = t_e;

    const Complex i_r = dfig_rotor_current(st, p, i_s);
    u.sp.p_ref = dfig_power(v, i_s, v_r, i_r).p_w;
    u.sp.q_ref = (v * std::conj(i_s)).imag();
    u.sp.v_set = std::abs(v);
    u.sp.omega_ref = st.omega_r;
    std::tie(st.x_p, st.x_q) = dfig_integrators_for(st, p, u.sp, v, i_s, v_r);
    const auto ctrl = dfig_converter(st, p, u.sp, v, i_s, false);
    if (std::abs(ctrl.p_cmd - u.sp.p_ref) > 1e-9 || std::abs(ctrl.q_cmd - u.sp.q_ref) > 1e-9)
      throw InitializationError(fmt::format(
          "generator {}: operating point exceeds the converter current limit of {} pu", u.id,
          p.i_max));

    double* x = x0.data() + u.off;
    x[kEd] = st.e_d;
    x[kEq] = st.e_q;
    x[kWr] = st.omega_r;
    x[kWt] = st.omega_t;
    x[kTheta] = st.theta_tw;
    x[kXp] = st.x_p;
    x[kXq] = st.x_q;
  }

  y_base = augmented(sys);
  lu_base.compute(y_base);

  Run run(*this);
  run.n = sys.bus_count();
  run.y[0] = &y_base;
  run.lu[0] = &lu_base;
  Eigen::VectorXcd guess(static_cast<Eigen::Index>(v0.size()));
  for (std::size_t k = 0; k < v0.size(); ++k) guess(static_cast<Eigen::Index>(k)) = v0[k];
  const auto v = run.solve(Topology::Pre, x0, guess);
  const auto f = run.rates(x0, v);
  residual0 = 0.0;
  for (double r : f) residual0 = std::max(residual0, std::abs(r));
}

void DynamicModel::Impl::clamp(std::vector<double>& x) const {
  for (const auto& u : sgs) {
    double* s = x.data() + u.off;
    s[kValve] = std::clamp(s[kValve], u.c.governor.v_min, u.c.governor.v_max);
    s[kVr] = std::clamp(s[kVr], u.c.exciter.vr_min, u.c.exciter.vr_max);
  }
}

Eigen::VectorXcd DynamicModel::Impl::Run::sources(const std::vector<double>& x,
                                                   const Eigen::VectorXcd& v) const {
  Eigen::VectorXcd inj = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(n));
  for (const auto& u : m.sgs) {
    const double* s = x.data() + u.off;
    const auto st = sg_state(s);
    const auto b = static_cast<Eigen::Index>(u.bus);
    if (!u.salient) {
      inj(b) += u.y_norton * to_network_frame(Complex(st.ed_st, st.eq_st), st.delta);
      continue;
    }
    const Complex vm = to_machine_frame(v(b), st.delta);
    const auto [id, iq] = sg_stator_currents(st, u.p, vm.real(), vm.imag());
    inj(b) += u.scale * to_network_frame(Complex(id, iq), st.delta) + u.y_norton * v(b);
  }
  for (std::size_t j = 0; j < m.dfigs.size(); ++j) {
    const auto& u = m.dfigs[j];
    const auto st = dfig_state(x.data() + u.off);
    const auto b = static_cast<Eigen::Index>(u.bus);
    inj(b) += u.y_norton * dfig_emf(st);
    const Complex vb = v(b);
    const Complex i_s = dfig_stator_current(st, u.p, vb);
    const auto ctrl = dfig_converter(st, u.p, u.sp, vb, i_s, crowbar[j]);
    const Complex i_r = dfig_rotor_current(st, u.p, i_s);
    const double p_gsc = -(ctrl.v_r * std::conj(i_r)).real();
    Complex i_g = std::abs(vb) > 1e-6 ? p_gsc / std::conj(vb) : Complex(0.0, 0.0);
    if (std::abs(i_g) > u.p.i_max) i_g *= u.p.i_max / std::abs(i_g);
    inj(b) += u.scale * i_g;
  }
  return inj;
}

Eigen::VectorXcd DynamicModel::Impl::Run::solve(Topology t, const std::vector<double>& x,
                                                 const Eigen::VectorXcd& guess) const {
  const Lu& f = *lu[static_cast<int>(t)];
  Eigen::VectorXcd v = f.solve(sources(x, guess));
  if (!m.v_dependent) return v;
  for (int it = 0; it < 50; ++it) {
    Eigen::VectorXcd next = f.solve(sources(x, v));
    const double change = (next - v).cwiseAbs().maxCoeff();
    v = std::move(next);
    if (!(change > 1e-12)) break;
  }
  return v;
}

double DynamicModel::Impl::Run::residual(Topology t, const std::vector<double>& x,
                                          const Eigen::VectorXcd& v) const {
  const Eigen::VectorXcd r = (*y[static_cast<int>(t)]) * v - sources(x, v);
  return r.cwiseAbs().maxCoeff();
}

std::vector<double> DynamicModel::Impl::Run::rates(const std::vector<double>& x,
                                                    const Eigen::VectorXcd& v) const {
  std::vector<double> f(x.size(), 0.0);
  for (const auto& u : m.sgs) {
    const double* s = x.data() + u.off;
    double* r = f.data() + u.off;
    const auto st = sg_state(s);
    const Complex vb = v(static_cast<Eigen::Index>(u.bus));
    const Complex vm = to_machine_frame(vb, st.delta);
    const auto [id, iq] = sg_stator_currents(st, u.p, vm.real(), vm.imag());
    const double dw = st.omega - 1.0;

    const GovernorState gov{s[kValve], s[kLeadLag]};
    const double t_m = governor_output(gov, u.c.governor, dw);
    const auto gr = governor_rates(gov, u.c.governor, u.p_ref, dw);

    const PssState pss{s[kWashout], s[kLag1], s[kLag2]};
    const double v_s = pss_output(pss, u.c.pss, dw);
    const auto pr = pss_rates(pss, u.c.pss, dw);

    const ExciterState ex{s[kVMeas], s[kVr], s[kEfd], s[kRateFb]};
    const auto er = exciter_rates(ex, u.c.exciter, u.v_ref, std::abs(vb), v_s);

    const auto mr = sg_derivatives(st, u.p, {id, iq, ex.e_fd, t_m}, m.omega_b);
    r[kDelta] = mr.delta;
    r[kOmega] = mr.omega;
    r[kEqT] = mr.eq_t;
    r[kEdT] = mr.ed_t;
    r[kEqSt] = mr.eq_st;
    r[kEdSt] = mr.ed_st;
    r[kValve] = gr.valve;
    r[kLeadLag] = gr.lead_lag;
    r[kVMeas] = er.v_meas;
    r[kVr] = er.v_r;
    r[kEfd] = er.e_fd;
    r[kRateFb] = er.rate_fb;
    r[kWashout] = pr.washout;
    r[kLag1] = pr.lag1;
    r[kLag2] = pr.lag2;
  }
  for (std::size_t j = 0; j < m.dfigs.size(); ++j) {
    const auto& u = m.dfigs[j];
    double* r = f.data() + u.off;
    const auto st = dfig_state(x.data() + u.off);
    const Complex vb = v(static_cast<Eigen::Index>(u.bus));
    const Complex i_s = dfig_stator_current(st, u.p, vb);
    const auto ctrl = dfig_converter(st, u.p, u.sp, vb, i_s, crowbar[j]);
    const auto mr = dfig_derivatives(st, u.p, {i_s, ctrl.v_r, u.t_m}, m.omega_b);
    r[kEd] = mr.e_d;
    r[kEq] = mr.e_q;
    r[kWr] = mr.omega_r;
    r[kWt] = mr.omega_t;
    r[kTheta] = mr.theta_tw;
    r[kXp] = ctrl.dx_p;
    r[kXq] = ctrl.dx_q;
  }
  return f;
}

// ---------------------------------------------------------------------------

DynamicModel::DynamicModel(const PowerSystemCase& c, const PowerFlowSolution& pf)
    : impl_(std::make_unique<Impl>()) {
  if (pf.v_mag.size() != c.bus_count())
    throw ConfigError("power-flow solution does not match the case");
  impl_->sys = c;
  impl_->pf = pf;
  impl_->initialize();
}

DynamicModel::~DynamicModel() = default;
DynamicModel::DynamicModel(DynamicModel&&) noexcept = default;
DynamicModel& DynamicModel::operator=(DynamicModel&&) noexcept = default;

const PowerSystemCase& DynamicModel::system() const { return impl_->sys; }
const PowerFlowSolution& DynamicModel::operating_point() const { return impl_->pf; }
std::size_t DynamicModel::state_size() const { return impl_->x0.size(); }
const std::vector<double>& DynamicModel::initial_state() const { return impl_->x0; }
double DynamicModel::initial_residual() const { return impl_->residual0; }

namespace {

bool on_grid(double t, double dt) {
  const double r = t / dt;
  return std::abs(r - std::round(r)) < 1e-9 * std::max(1.0, std::abs(r));
}

bool all_finite(const std::vector<double>& x, const Eigen::VectorXcd& v) {
  for (double d : x)
    if (!std::isfinite(d)) return false;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (!std::isfinite(v(i).real()) || !std::isfinite(v(i).imag())) return false;
  return true;
}

}  // namespace

Trajectory DynamicModel::run(const std::optional<FaultEvent>& fault,
                             const SimulationOptions& opts) const {
  const Impl& m = *impl_;
  if (!(opts.dt > 0.0)) throw ConfigError("time step must be positive");
  if (!(opts.t_end > 0.0)) throw ConfigError("end time must be positive");
  if (opts.max_iterations < 1) throw ConfigError("at least one corrector iteration is required");

  Impl::Run run(m);
  const std::size_t n_orig = m.sys.bus_count();

  // Topology-specific matrices; the unsplit network serves the no-fault run.
  Eigen::MatrixXcd y_pre, y_fault, y_post;
  Lu lu_pre, lu_fault, lu_post;
  bool post_singular = false;
  Eigen::VectorXcd v(static_cast<Eigen::Index>(n_orig));
  for (std::size_t k = 0; k < n_orig; ++k) v(static_cast<Eigen::Index>(k)) = m.v0[k];

  if (fault) {
    if (!(fault->t_clear > fault->t_apply))
      throw ConfigError("fault clearing time must follow its application time");
    if (fault->t_apply < 0.0) throw ConfigError("fault application time must be >= 0");
    if (fault->t_clear > opts.t_end + kTimeEps)
      throw ConfigError("end time must not precede fault clearing");
    if (opts.alignment == EventAlignment::Reject &&
        (!on_grid(fault->t_apply, opts.dt) || !on_grid(fault->t_clear, opts.dt)))
      throw ConfigError(fmt::format(
          "fault events at {} s and {} s do not fall on the {} s time grid", fault->t_apply,
          fault->t_clear, opts.dt));

    const auto split = split_line_at(m.sys, fault->line, fault->location_pct);
    const auto& sc = split.system;
    run.n = sc.bus_count();
    const auto f = static_cast<Eigen::Index>(sc.bus_index(split.fault_bus));

    y_pre = m.augmented(sc);
    lu_pre.compute(y_pre);

    // Fault-point voltage from the branch-only neighbourhood (no loads there).
    Complex acc(0.0, 0.0);
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(n_orig); ++k) acc += y_pre(f, k) * v(k);
    v.conservativeResize(static_cast<Eigen::Index>(run.n));
    v(f) = -acc / y_pre(f, f);

    Complex y_shunt;
    if (fault->type == FaultType::LLL) {
      y_shunt = fault_shunt_admittance(FaultType::LLL, {}, {}, {});
    } else {
      std::vector<Complex> vext(run.n);
      for (std::size_t k = 0; k < run.n; ++k) vext[k] = v(static_cast<Eigen::Index>(k));
      const auto fb = static_cast<std::size_t>(f);
      const Complex z1 = driving_point_impedance(y_pre, fb);
      const Complex z2 = driving_point_impedance(negative_sequence_ybus(sc, vext), fb);
      const Complex z0 = driving_point_impedance(zero_sequence_ybus(sc), fb);
      y_shunt = fault_shunt_admittance(fault->type, z1, z2, z0);
    }
    y_fault = y_pre;
    y_fault(f, f) += y_shunt;
    lu_fault.compute(y_fault);

    if (fault->trip_line) {
      PowerSystemCase tripped = sc;
      std::erase_if(tripped.branches, [&](const Branch& br) {
        return br.id == split.section_from || br.id == split.section_to;
      });
      tripped.reindex();
      y_post = m.augmented(tripped);
      if (std::abs(y_post(f, f)) == 0.0) y_post(f, f) = 1.0;
    } else {
      y_post = y_pre;
    }
    lu_post.compute(y_post);
    post_singular = !(lu_post.rcond() > 1e-12);

    run.y[0] = &y_pre;
    run.lu[0] = &lu_pre;
    run.y[1] = &y_fault;
    run.lu[1] = &lu_fault;
    run.y[2] = &y_post;
    run.lu[2] = &lu_post;
  } else {
    run.n = n_orig;
    run.y[0] = &m.y_base;
    run.lu[0] = &m.lu_base;
  }

  Trajectory tr;
  tr.nominal_hz = m.sys.nominal_hz;
  tr.has_fault = fault.has_value();
  tr.t_apply = fault ? fault->t_apply : 0.0;
  tr.t_clear = fault ? fault->t_clear : 0.0;
  for (const auto& u : m.sgs) tr.sg_ids.push_back(u.id);
  for (const auto& u : m.dfigs) tr.dfig_ids.push_back(u.id);
  for (const auto& b : m.sys.buses) tr.bus_ids.push_back(b.id);
  const auto steps_hint = static_cast<std::size_t>(opts.t_end / opts.dt) + 4;
  auto sized = [&](std::size_t count) {
    std::vector<std::vector<double>> ch(count);
    for (auto& c : ch) c.reserve(steps_hint);
    return ch;
  };
  tr.angle_deg = sized(m.sgs.size());
  tr.freq_hz = sized(m.sgs.size());
  tr.v_mag = sized(n_orig);
  tr.dfig_speed = sized(m.dfigs.size());
  tr.dfig_p = sized(m.dfigs.size());
  tr.dfig_q = sized(m.dfigs.size());
  tr.time.reserve(steps_hint);

  std::vector<double> x = m.x0;
  Topology topo = Topology::Pre;
  const std::size_t fault_idx = n_orig;

  auto record = [&](double t) {
    tr.time.push_back(t);
    for (std::size_t i = 0; i < m.sgs.size(); ++i) {
      const double* s = x.data() + m.sgs[i].off;
      tr.angle_deg[i].push_back(s[kDelta] * 180.0 / std::numbers::pi);
      tr.freq_hz[i].push_back(s[kOmega] * m.sys.nominal_hz);
    }
    for (std::size_t k = 0; k < n_orig; ++k)
      tr.v_mag[k].push_back(std::abs(v(static_cast<Eigen::Index>(k))));
    for (std::size_t j = 0; j < m.dfigs.size(); ++j) {
      const auto& u = m.dfigs[j];
      const auto st = dfig_state(x.data() + u.off);
      const Complex vb = v(static_cast<Eigen::Index>(u.bus));
      const Complex i_s = dfig_stator_current(st, u.p, vb);
      const auto ctrl = dfig_converter(st, u.p, u.sp, vb, i_s, run.crowbar[j]);
      const auto pw = dfig_power(vb, i_s, ctrl.v_r, dfig_rotor_current(st, u.p, i_s));
      const double base = u.scale * m.sys.system_mva_base;
      tr.dfig_speed[j].push_back(st.omega_r);
      tr.dfig_p[j].push_back(pw.p_w * base);
      tr.dfig_q[j].push_back(pw.q_w * base);
    }
    if (fault) tr.fault_bus_v.push_back(std::abs(v(static_cast<Eigen::Index>(fault_idx))));
  };

  auto angle_spread = [&] {
    double lo = 0.0, hi = 0.0;
    for (std::size_t i = 0; i < m.sgs.size(); ++i) {
      const double d = x[m.sgs[i].off + kDelta];
      if (i == 0 || d < lo) lo = d;
      if (i == 0 || d > hi) hi = d;
    }
    return (hi - lo) * 180.0 / std::numbers::pi;
  };

  auto diverge = [&](double t, std::string why) {
    tr.termination = Termination::Diverged;
    tr.diverged_at = t;
    tr.cause = std::move(why);
  };

  auto update_crowbars = [&]() {
    bool changed = false;
    for (std::size_t j = 0; j < m.dfigs.size(); ++j) {
      const auto& u = m.dfigs[j];
      const Complex vb = v(static_cast<Eigen::Index>(u.bus));
      const double vm = std::abs(vb);
      if (!run.crowbar[j] && vm < u.p.crowbar_on) {
        run.crowbar[j] = true;
        changed = true;
      } else if (run.crowbar[j] && vm > u.p.crowbar_off) {
        run.crowbar[j] = false;
        changed = true;
        double* s = x.data() + u.off;
        const auto st = dfig_state(s);
        const Complex i_s = dfig_stator_current(st, u.p, vb);
        std::tie(s[kXp], s[kXq]) =
            dfig_integrators_for(st, u.p, u.sp, vb, i_s, Complex(0.0, 0.0));
      }
    }
    return changed;
  };

  v = run.solve(topo, x, v);
  tr.max_network_residual = run.residual(topo, x, v);
  record(0.0);

  struct Event {
    double time;
    Topology next;
  };
  std::vector<Event> events;
  if (fault) {
    events.push_back({fault->t_apply, Topology::Fault});
    events.push_back({fault->t_clear, Topology::Post});
  }
  std::size_t next_event = 0;

  auto fire_events = [&](double t) {
    bool fired = false;
    while (next_event < events.size() && events[next_event].time <= t + kTimeEps) {
      topo = events[next_event].next;
      ++next_event;
      fired = true;
      if (topo == Topology::Post && post_singular) {
        diverge(t, "network matrix singular after line trip (islanded buses)");
        return false;
      }
    }
    if (fired) v = run.solve(topo, x, v);
    return true;
  };

  if (!fire_events(0.0)) return tr;

  double t = 0.0;
  std::size_t k = 0;
  std::vector<double> xp(x.size()), xn(x.size());
  const double h_half_tol = opts.tolerance;

  while (t < opts.t_end - kTimeEps) {
    double target = std::min(static_cast<double>(k + 1) * opts.dt, opts.t_end);
    bool grid_point = true;
    if (next_event < events.size() && events[next_event].time < target - kTimeEps &&
        events[next_event].time > t + kTimeEps) {
      target = events[next_event].time;
      grid_point = false;
    }
    const double h = target - t;

    const auto f0 = run.rates(x, v);
    for (std::size_t i = 0; i < x.size(); ++i) xp[i] = x[i] + h * f0[i];
    m.clamp(xp);
    Eigen::VectorXcd vp = run.solve(topo, xp, v);
    bool converged = false;
    for (int it = 0; it < opts.max_iterations; ++it) {
      const auto f1 = run.rates(xp, vp);
      double change = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        xn[i] = x[i] + 0.5 * h * (f0[i] + f1[i]);
      }
      m.clamp(xn);
      for (std::size_t i = 0; i < x.size(); ++i) change = std::max(change, std::abs(xn[i] - xp[i]));
      std::swap(xp, xn);
      vp = run.solve(topo, xp, vp);
      if (change < h_half_tol) {
        converged = true;
        break;
      }
    }
    if (!converged) ++tr.unconverged_steps;
    x = xp;
    v = std::move(vp);
    t = target;
    if (grid_point) ++k;

    if (!all_finite(x, v)) {
      diverge(t, "non-finite state");
      return tr;
    }
    tr.max_network_residual = std::max(tr.max_network_residual, run.residual(topo, x, v));
    if (!fire_events(t)) {
      record(t);
      return tr;
    }
    if (update_crowbars()) v = run.solve(topo, x, v);
    record(t);
    if (m.sgs.size() >= 2 && angle_spread() > opts.divergence_angle_deg) {
      diverge(t, fmt::format("rotor angle separation exceeded {} deg", opts.divergence_angle_deg));
      return tr;
    }
  }
  return tr;
}

Trajectory run_simulation(const PowerSystemCase& c, const PowerFlowSolution& pf,
                          const std::optional<FaultEvent>& fault, const SimulationOptions& opts) {
  return DynamicModel(c, pf).run(fault, opts);
}

// ---------------------------------------------------------------------------

void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  os << "t";
  for (const auto& id : tr.sg_ids) os << ",delta_" << id;
  for (const auto& id : tr.sg_ids) os << ",freq_" << id;
  for (int b : tr.bus_ids) os << ",vm_" << b;
  for (const auto& id : tr.dfig_ids) os << ",wr_" << id << ",pw_" << id << ",qw_" << id;
  if (!tr.fault_bus_v.empty()) os << ",vm_fault";
  os << '\n';
  for (std::size_t r = 0; r < tr.rows(); ++r) {
    os << fmt::format("{:.6f}", tr.time[r]);
    for (const auto& ch : tr.angle_deg) os << fmt::format(",{:.6f}", ch[r]);
    for (const auto& ch : tr.freq_hz) os << fmt::format(",{:.6f}", ch[r]);
    for (const auto& ch : tr.v_mag) os << fmt::format(",{:.6f}", ch[r]);
    for (std::size_t j = 0; j < tr.dfig_ids.size(); ++j)
      os << fmt::format(",{:.6f},{:.4f},{:.4f}", tr.dfig_speed[j][r], tr.dfig_p[j][r],
                        tr.dfig_q[j][r]);
    if (!tr.fault_bus_v.empty()) os << fmt::format(",{:.6f}", tr.fault_bus_v[r]);
    os << '\n';
  }
}

}  // namespace tsrisk
