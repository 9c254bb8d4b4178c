#pragma once

// Orbit equivalence under time changes. Both checks integrate the original
// system together with the accumulated new time τ and then integrate the
// transformed system directly in τ, comparing states at matched τ.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "poissonkit/darboux.hpp"
#include "poissonkit/errors.hpp"
#include "poissonkit/expr.hpp"
#include "poissonkit/odeint.hpp"
#include "poissonkit/structure.hpp"

namespace poissonkit {

struct EquivalenceReport {
  double tolerance = 0.0;
  double max_discrepancy = 0.0;
  double worst_t = 0.0;
  double worst_tau = 0.0;
  double tau_final = 0.0;
  Range eta;                     // along the original trajectory
  std::size_t original_steps = 0;
  std::size_t transformed_steps = 0;
  // Darboux only.
  double frozen_drift = 0.0;     // max over j >= 3 of |y_j(x(t)) - y_j(x0)|
  double frozen_rhs = 0.0;       // max over j >= 3 and nodes of |dy_j/dτ|
  std::optional<double> box_exit_time;
  bool pass = false;
};

namespace detail {

/// Integrates dz/dτ = f(z) from z0 to τ_final of either sign.
inline Trajectory integrate_signed(const VectorField& f, std::vector<double> z0, double tau_final,
                                   const IntegratorConfig& cfg) {
  if (tau_final == 0.0) {
    Trajectory tr;
    std::vector<double> dz(z0.size());
    f(z0, dz);
    tr.times.push_back(0.0);
    tr.states.push_back(z0);
    tr.derivatives.push_back(dz);
    return tr;
  }
  if (tau_final > 0.0) return integrate(f, std::move(z0), tau_final, cfg);
  const VectorField g = [&f](std::span<const double> z, std::span<double> dz) {
    f(z, dz);
    for (double& v : dz) v = -v;
  };
  return integrate(g, std::move(z0), -tau_final, cfg);
}

inline std::vector<double> at_signed(const Trajectory& tr, double tau, double tau_final) {
  return tau_final < 0.0 ? tr.at(-tau) : tr.at(tau);
}

inline double max_gap(std::span<const double> a, std::span<const double> b) {
  double g = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) g = std::max(g, std::abs(a[i] - b[i]));
  return g;
}

class EtaSignGuard {
 public:
  EtaSignGuard(const Expr& eta, std::size_t n, double eta0) : eta_(eta), n_(n), eta0_(eta0) {}
  double check(double t, std::span<const double> z) const {
    const double e = evaluate(eta_, z.first(n_));
    if (!(std::abs(e) > 1e-12 * (1.0 + std::abs(eta0_))) || (e > 0) != (eta0_ > 0))
      throw IntegrationError("eta crosses zero or degenerates (eta = " + detail::format_number(e) + ")", t,
                             {z.begin(), z.end()});
    return e;
  }

 private:
  Expr eta_;
  std::size_t n_;
  double eta0_;
};

}  // namespace detail

/// dx/dt = J∇H with dτ/dt = 1/η against dx/dτ = η J∇H.
inline EquivalenceReport reparam_equivalence(const StructureMatrix& J, const Expr& H, const Expr& eta,
                                             std::span<const double> x0, double t_end, const IntegratorConfig& cfg,
                                             double tol) {
  const std::size_t n = J.dim();
  if (x0.size() != n) throw Error("reparam_equivalence: x0 has the wrong dimension");
  EquivalenceReport rep;
  rep.tolerance = tol;
  const Expr eb = bind_to(eta, J.variables());
  const auto field = system_rhs(J, H);
  const ExprField f(field, J.variables());
  const double eta0 = evaluate(eb, x0);
  if (!(eta0 != 0.0)) throw IntegrationError("eta vanishes at the initial state", 0.0, {x0.begin(), x0.end()});
  const detail::EtaSignGuard guard(eb, n, eta0);

  const VectorField augmented = [&](std::span<const double> z, std::span<double> dz) {
    f(z.first(n), dz.first(n));
    dz[n] = 1.0 / evaluate(eb, z.first(n));
  };
  std::vector<double> z0(x0.begin(), x0.end());
  z0.push_back(0.0);
  const Trajectory orig = integrate(augmented, z0, t_end, cfg, [&](double t, std::span<const double> z) {
    rep.eta.add(guard.check(t, z));
  });
  rep.eta.add(eta0);
  rep.original_steps = orig.accepted;
  rep.tau_final = orig.back()[n];

  const VectorField scaled = [&](std::span<const double> x, std::span<double> dx) {
    f(x, dx);
    const double e = evaluate(eb, x);
    for (double& v : dx) v *= e;
  };
  const Trajectory tra = detail::integrate_signed(scaled, {x0.begin(), x0.end()}, rep.tau_final, cfg);
  rep.transformed_steps = tra.accepted;

  for (std::size_t m = 0; m < orig.size(); ++m) {
    const auto& z = orig.states[m];
    const double tau = z[n];
    const auto x = detail::at_signed(tra, tau, rep.tau_final);
    const double g = detail::max_gap(std::span<const double>(z).first(n), x);
    if (g > rep.max_discrepancy) {
      rep.max_discrepancy = g;
      rep.worst_t = orig.times[m];
      rep.worst_tau = tau;
    }
  }
  rep.pass = rep.max_discrepancy <= tol;
  return rep;
}

enum class BoxPolicy { Error, Warn };

/// Original flow mapped through y(x), with dτ/dt = η, against the reduced
/// canonical system integrated in τ. Leaving the sampling box is an error
/// under BoxPolicy::Error and is recorded as box_exit_time under Warn; η
/// degeneracy, det M degeneracy and the exclusion predicate are always errors.
inline EquivalenceReport darboux_equivalence(const DarbouxChart& ch, const Expr& H, std::span<const double> x0,
                                             double t_end, const IntegratorConfig& cfg, double tol,
                                             BoxPolicy policy = BoxPolicy::Warn) {
  const std::size_t n = ch.x_vars.size();
  if (x0.size() != n) throw Error("darboux_equivalence: x0 has the wrong dimension");
  if (!ch.dom.contains(x0)) throw Error("darboux_equivalence: x0 is outside the domain");
  EquivalenceReport rep;
  rep.tolerance = tol;
  const auto field = system_rhs(ch.J, H);
  const ExprField f(field, ch.x_vars);
  const double eta0 = evaluate(ch.eta, x0);
  const detail::EtaSignGuard guard(ch.eta, n, eta0);
  const double det0 = determinant(ch.m_at(x0));

  const VectorField augmented = [&](std::span<const double> z, std::span<double> dz) {
    f(z.first(n), dz.first(n));
    dz[n] = evaluate(ch.eta, z.first(n));
  };
  std::vector<double> z0(x0.begin(), x0.end());
  z0.push_back(0.0);
  const Trajectory orig = integrate(augmented, z0, t_end, cfg, [&](double t, std::span<const double> z) {
    const auto x = z.first(n);
    rep.eta.add(guard.check(t, z));
    const double det = determinant(ch.m_at(x));
    if (!(std::abs(det) > 1e-12 * (1.0 + std::abs(det0))) || (det > 0) != (det0 > 0))
      throw IntegrationError("det M degenerates along the trajectory", t, {z.begin(), z.end()});
    if (!ch.dom.passes_exclusion(x))
      throw IntegrationError("trajectory violates the domain exclusion predicate", t, {z.begin(), z.end()});
    if (!ch.dom.in_box(x)) {
      if (policy == BoxPolicy::Error) throw IntegrationError("trajectory leaves the domain box", t, {z.begin(), z.end()});
      if (!rep.box_exit_time) rep.box_exit_time = t;
    }
  });
  rep.eta.add(eta0);
  rep.original_steps = orig.accepted;
  rep.tau_final = orig.back()[n];

  const ReducedSystem rs = reduce_hamiltonian(ch, H, ch.inverse_map.has_value());
  const VectorField reduced = [&](std::span<const double> y, std::span<double> dy) {
    const auto v = rs.evaluate_rhs(y);
    std::copy(v.begin(), v.end(), dy.begin());
  };
  const auto y0 = ch.forward_at(x0);
  const Trajectory red = detail::integrate_signed(reduced, y0, rep.tau_final, cfg);
  rep.transformed_steps = red.accepted;

  for (std::size_t m = 0; m < orig.size(); ++m) {
    const auto& z = orig.states[m];
    const auto y = ch.forward_at(std::span<const double>(z).first(n));
    for (std::size_t j = 2; j < n; ++j) rep.frozen_drift = std::max(rep.frozen_drift, std::abs(y[j] - y0[j]));
    const auto rhs = rs.evaluate_rhs(y);
    for (std::size_t j = 2; j < n; ++j) rep.frozen_rhs = std::max(rep.frozen_rhs, std::abs(rhs[j]));
    const double g = detail::max_gap(y, detail::at_signed(red, z[n], rep.tau_final));
    if (g > rep.max_discrepancy) {
      rep.max_discrepancy = g;
      rep.worst_t = orig.times[m];
      rep.worst_tau = z[n];
    }
  }
  rep.pass = rep.max_discrepancy <= tol && rep.frozen_rhs <= tol;
  return rep;
}

}  // namespace poissonkit
