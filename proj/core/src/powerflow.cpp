#include "tsrisk/powerflow.hpp"

#include <cmath>
#include <fmt/format.h>
#include <numbers>

#include <Eigen/SparseLU>

#include "tsrisk/error.hpp"
#include "tsrisk/ybus.hpp"

namespace tsrisk {

std::vector<Complex> PowerFlowSolution::voltages() const {
  std::vector<Complex> v(v_mag.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::polar(v_mag[i], v_ang[i]);
  return v;
}

namespace {

std::vector<Complex> specified_injection(const PowerSystemCase& c) {
  std::vector<Complex> s(c.bus_count(), Complex(0.0, 0.0));
  const double base = c.system_mva_base;
  for (const auto& l : c.loads) s[c.bus_index(l.bus)] -= Complex(l.p_mw, l.q_mvar) / base;
  for (const auto& g : c.generators) {
    const auto k = c.bus_index(g.bus);
    if (c.buses[k].kind != BusKind::Slack) s[k] += Complex(g.p_dispatch_mw / base, 0.0);
  }
  return s;
}

std::vector<Complex> calculated_injection(const SparseComplexMatrix& y,
                                          std::span<const Complex> v) {
  std::vector<Complex> current(v.size(), Complex(0.0, 0.0));
  for (Eigen::Index col = 0; col < y.outerSize(); ++col)
    for (SparseComplexMatrix::InnerIterator it(y, col); it; ++it)
      current[static_cast<std::size_t>(it.row())] += it.value() * v[static_cast<std::size_t>(col)];
  std::vector<Complex> s(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) s[i] = v[i] * std::conj(current[i]);
  return s;
}

struct NewtonResult {
  std::vector<Complex> v;
  int iterations = 0;
  double max_mismatch = 0.0;
};

NewtonResult newton_solve(const PowerSystemCase& c, const SparseComplexMatrix& y,
                          const std::vector<BusKind>& kinds, std::vector<Complex> s_spec,
                          const PowerFlowOptions& opts) {
  const std::size_t n = c.bus_count();
  std::vector<Eigen::Index> pvpq, pq;
  std::vector<Eigen::Index> ang_col(n, -1), mag_col(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (kinds[i] != BusKind::Slack) pvpq.push_back(static_cast<Eigen::Index>(i));
    if (kinds[i] == BusKind::PQ) pq.push_back(static_cast<Eigen::Index>(i));
  }
  for (std::size_t k = 0; k < pvpq.size(); ++k) ang_col[pvpq[k]] = static_cast<Eigen::Index>(k);
  for (std::size_t k = 0; k < pq.size(); ++k)
    mag_col[pq[k]] = static_cast<Eigen::Index>(pvpq.size() + k);
  const auto dim = static_cast<Eigen::Index>(pvpq.size() + pq.size());

  // Flat start, regulated buses at their setpoints.
  std::vector<Complex> v(n, Complex(1.0, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    if (kinds[i] != BusKind::PQ) v[i] = Complex(c.buses[i].v_setpoint, 0.0);

  auto mismatch = [&](const std::vector<Complex>& volts, Eigen::VectorXd& f, std::size_t& worst) {
    const auto s = calculated_injection(y, volts);
    f.resize(dim);
    double best = -1.0;
    for (std::size_t k = 0; k < pvpq.size(); ++k) {
      const auto i = static_cast<std::size_t>(pvpq[k]);
      f[static_cast<Eigen::Index>(k)] = (s[i] - s_spec[i]).real();
      if (std::abs(f[static_cast<Eigen::Index>(k)]) > best) {
        best = std::abs(f[static_cast<Eigen::Index>(k)]);
        worst = i;
      }
    }
    for (std::size_t k = 0; k < pq.size(); ++k) {
      const auto i = static_cast<std::size_t>(pq[k]);
      const auto row = static_cast<Eigen::Index>(pvpq.size() + k);
      f[row] = (s[i] - s_spec[i]).imag();
      if (std::abs(f[row]) > best) {
        best = std::abs(f[row]);
        worst = i;
      }
    }
    return dim == 0 ? 0.0 : f.cwiseAbs().maxCoeff();
  };

  Eigen::VectorXd f;
  std::size_t worst = 0;
  double norm = mismatch(v, f, worst);
  int iter = 0;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  while (norm > opts.tolerance) {
    if (iter >= opts.max_iterations) {
      throw NumericalError(fmt::format(
          "power flow did not converge in {} iterations: worst mismatch {:.3e} pu at bus {}",
          opts.max_iterations, norm, c.buses[worst].id));
    }
    ++iter;

    std::vector<Complex> current(n, Complex(0.0, 0.0));
    for (Eigen::Index col = 0; col < y.outerSize(); ++col)
      for (SparseComplexMatrix::InnerIterator it(y, col); it; ++it)
        current[static_cast<std::size_t>(it.row())] += it.value() * v[static_cast<std::size_t>(col)];

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(y.nonZeros()) * 4 + n * 4);
    auto add = [&](std::size_t i, std::size_t k, Complex ds_da, Complex ds_dm) {
      const bool p_row = ang_col[i] >= 0;
      const bool q_row = mag_col[i] >= 0;
      if (p_row && ang_col[k] >= 0) trip.emplace_back(ang_col[i], ang_col[k], ds_da.real());
      if (p_row && mag_col[k] >= 0) trip.emplace_back(ang_col[i], mag_col[k], ds_dm.real());
      if (q_row && ang_col[k] >= 0) trip.emplace_back(mag_col[i], ang_col[k], ds_da.imag());
      if (q_row && mag_col[k] >= 0) trip.emplace_back(mag_col[i], mag_col[k], ds_dm.imag());
    };
    const Complex j1(0.0, 1.0);
    for (Eigen::Index col = 0; col < y.outerSize(); ++col) {
      for (SparseComplexMatrix::InnerIterator it(y, col); it; ++it) {
        const auto i = static_cast<std::size_t>(it.row());
        const auto k = static_cast<std::size_t>(col);
        const Complex yv = it.value() * v[k];
        const Complex ds_da = -j1 * v[i] * std::conj(yv);
        const Complex ds_dm = v[i] * std::conj(it.value() * v[k] / std::abs(v[k]));
        add(i, k, ds_da, ds_dm);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      add(i, i, j1 * v[i] * std::conj(current[i]), std::conj(current[i]) * v[i] / std::abs(v[i]));
    }
    Eigen::SparseMatrix<double> jac(dim, dim);
    jac.setFromTriplets(trip.begin(), trip.end());
    jac.makeCompressed();
    lu.compute(jac);
    if (lu.info() != Eigen::Success)
      throw NumericalError(fmt::format("singular power-flow Jacobian at iteration {}", iter));
    Eigen::VectorXd dx = lu.solve(-f);
    if (lu.info() != Eigen::Success || !dx.allFinite())
      throw NumericalError(fmt::format("singular power-flow Jacobian at iteration {}", iter));

    for (std::size_t i = 0; i < n; ++i) {
      double ang = std::arg(v[i]);
      double mag = std::abs(v[i]);
      if (ang_col[i] >= 0) ang += dx[ang_col[i]];
      if (mag_col[i] >= 0) mag += dx[mag_col[i]];
      v[i] = std::polar(mag, ang);
    }
    norm = mismatch(v, f, worst);
  }
  return {std::move(v), iter, norm};
}

}  // namespace

std::vector<Complex> power_mismatch(const PowerSystemCase& c, std::span<const Complex> v) {
  const auto y = build_ybus(c);
  const auto s = calculated_injection(y, v);
  const auto spec = specified_injection(c);
  std::vector<Complex> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i] - spec[i];
  return out;
}

PowerFlowSolution solve_power_flow(const PowerSystemCase& c, const PowerFlowOptions& opts) {
  if (!(opts.tolerance > 0.0)) throw ConfigError("power-flow tolerance must be > 0");
  const auto y = build_ybus(c);
  std::vector<BusKind> kinds;
  for (const auto& b : c.buses) kinds.push_back(b.kind);
  auto s_spec = specified_injection(c);

  NewtonResult res = newton_solve(c, y, kinds, s_spec, opts);
  int total_iter = res.iterations;

  if (opts.enforce_q_limits) {
    const double base = c.system_mva_base;
    for (int pass = 0; pass < static_cast<int>(c.generators.size()); ++pass) {
      const auto s = calculated_injection(y, res.v);
      bool changed = false;
      for (const auto& g : c.generators) {
        const auto k = c.bus_index(g.bus);
        if (kinds[k] != BusKind::PV) continue;
        double q_load = 0.0;
        for (const auto& l : c.loads)
          if (l.bus == g.bus) q_load += l.q_mvar;
        const double q_gen = s[k].imag() * base + q_load;
        std::optional<double> limit;
        if (g.q_max_mvar && q_gen > *g.q_max_mvar) limit = g.q_max_mvar;
        if (g.q_min_mvar && q_gen < *g.q_min_mvar) limit = g.q_min_mvar;
        if (limit) {
          kinds[k] = BusKind::PQ;
          s_spec[k] = Complex(s_spec[k].real(), (*limit - q_load) / base);
          changed = true;
        }
      }
      if (!changed) break;
      res = newton_solve(c, y, kinds, s_spec, opts);
      total_iter += res.iterations;
    }
  }

  PowerFlowSolution sol;
  const auto s = calculated_injection(y, res.v);
  for (std::size_t i = 0; i < c.bus_count(); ++i) {
    sol.bus_ids.push_back(c.buses[i].id);
    sol.v_mag.push_back(std::abs(res.v[i]));
    sol.v_ang.push_back(std::arg(res.v[i]));
    sol.p_inj.push_back(s[i].real());
    sol.q_inj.push_back(s[i].imag());
  }
  sol.iterations = total_iter;
  sol.max_mismatch = res.max_mismatch;
  return sol;
}

std::vector<Complex> generator_outputs_mva(const PowerSystemCase& c, const PowerFlowSolution& sol) {
  std::vector<Complex> bus_load(c.bus_count(), Complex(0.0, 0.0));
  for (const auto& l : c.loads) bus_load[c.bus_index(l.bus)] += Complex(l.p_mw, l.q_mvar);
  std::vector<Complex> out;
  for (const auto& g : c.generators) {
    const auto k = c.bus_index(g.bus);
    out.push_back(Complex(sol.p_inj[k], sol.q_inj[k]) * c.system_mva_base + bus_load[k]);
  }
  return out;
}

DispatchReport verify_dispatch(const PowerSystemCase& c, const PowerFlowSolution& sol) {
  DispatchReport rep;
  rep.total_load_mw = c.total_load_mw();
  const auto outputs = generator_outputs_mva(c, sol);
  const auto slack = c.slack_index();
  for (std::size_t i = 0; i < c.generators.size(); ++i) {
    const auto& g = c.generators[i];
    rep.total_generation_mw += outputs[i].real();
    if (c.bus_index(g.bus) == slack) {
      rep.slack_generation_mw = outputs[i].real();
      rep.slack_rating_mva = g.mva_rating;
      rep.slack_generator = g.id;
      if (std::abs(outputs[i]) > g.mva_rating)
        rep.warnings.push_back(fmt::format("slack generator {} output {:.1f} MVA exceeds its {:.1f} MVA rating",
                                           g.id, std::abs(outputs[i]), g.mva_rating));
    }
  }
  for (double p : sol.p_inj) rep.losses_mw += p * c.system_mva_base;
  rep.balance_error_mw = rep.total_generation_mw - rep.total_load_mw - rep.losses_mw;
  if (rep.total_generation_mw > 0.0 && rep.losses_mw < 0.0)
    rep.warnings.push_back("negative network losses");
  return rep;
}

void write_solution_table(std::ostream& os, const PowerFlowSolution& sol) {
  os << "bus,v_mag,v_ang_deg,p,q\n";
  for (std::size_t i = 0; i < sol.bus_ids.size(); ++i) {
    os << fmt::format("{},{:.10f},{:.8f},{:.10f},{:.10f}\n", sol.bus_ids[i], sol.v_mag[i],
                      sol.v_ang[i] * 180.0 / std::numbers::pi, sol.p_inj[i], sol.q_inj[i]);
  }
}

}  // namespace tsrisk
