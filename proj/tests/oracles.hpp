#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "tsrisk/case.hpp"

namespace tsrisk::test {

// Dense nodal matrix written out element by element, kept apart from the
// library's builder so the oracle below shares no code with the solver.
inline Eigen::MatrixXcd reference_ybus(const PowerSystemCase& c) {
  const auto n = static_cast<Eigen::Index>(c.bus_count());
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
  for (const auto& br : c.branches) {
    const auto f = static_cast<Eigen::Index>(c.bus_index(br.from_bus));
    const auto t = static_cast<Eigen::Index>(c.bus_index(br.to_bus));
    const Complex ys = 1.0 / Complex(br.r, br.x);
    const Complex bf(0.0, br.b_charging * br.b_from_fraction);
    const Complex bt(0.0, br.b_charging * (1.0 - br.b_from_fraction));
    y(f, f) += (ys + bf) / (br.tap * br.tap);
    y(t, t) += ys + bt;
    y(f, t) -= ys / br.tap;
    y(t, f) -= ys / br.tap;
  }
  for (std::size_t k = 0; k < c.bus_count(); ++k)
    y(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) +=
        Complex(c.buses[k].shunt_g, c.buses[k].shunt_b);
  return y;
}

struct GaussSeidelResult {
  std::vector<Complex> v;
  int sweeps = 0;
};

// Flat-start Gauss-Seidel with over-relaxation, stopped on the same
// mismatch measure the Newton solver reports.
inline GaussSeidelResult gauss_seidel(const PowerSystemCase& c, double tol) {
  const auto y = reference_ybus(c);
  const std::size_t n = c.bus_count();
  std::vector<Complex> spec(n, Complex(0.0, 0.0));
  for (const auto& l : c.loads) spec[c.bus_index(l.bus)] -= Complex(l.p_mw, l.q_mvar) / c.system_mva_base;
  for (const auto& g : c.generators) spec[c.bus_index(g.bus)] += g.p_dispatch_mw / c.system_mva_base;

  std::vector<Complex> v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = c.buses[i].kind == BusKind::PQ ? Complex(1.0, 0.0) : Complex(c.buses[i].v_setpoint, 0.0);

  auto injection = [&](std::size_t i) {
    Complex cur = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      cur += y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * v[j];
    return v[i] * std::conj(cur);
  };

  const double accel = 1.6;
  for (int sweep = 1; sweep <= 100000; ++sweep) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto kind = c.buses[i].kind;
      if (kind == BusKind::Slack) continue;
      Complex s = spec[i];
      if (kind == BusKind::PV) s = Complex(s.real(), injection(i).imag());
      Complex others = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) others += y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * v[j];
      const Complex yii = y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
      Complex vn = (std::conj(s) / std::conj(v[i]) - others) / yii;
      if (kind == BusKind::PV) {
        v[i] = std::polar(c.buses[i].v_setpoint, std::arg(vn));
      } else {
        v[i] += accel * (vn - v[i]);
      }
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto kind = c.buses[i].kind;
      if (kind == BusKind::Slack) continue;
      const Complex mis = injection(i) - spec[i];
      worst = std::max(worst, std::abs(mis.real()));
      if (kind == BusKind::PQ) worst = std::max(worst, std::abs(mis.imag()));
    }
    if (worst < tol) return {v, sweep};
  }
  throw std::runtime_error("Gauss-Seidel oracle did not converge");
}

}  // namespace tsrisk::test
