#pragma once

// Casimir invariants: functions D with J·∇D = 0.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "poissonkit/elimination.hpp"
#include "poissonkit/expr.hpp"
#include "poissonkit/linalg.hpp"
#include "poissonkit/sampling.hpp"
#include "poissonkit/structure.hpp"

namespace poissonkit {

inline std::vector<double> casimir_residual(const StructureMatrix& J, const Expr& D, std::span<const double> x) {
  const auto grad = gradient(bind_to(D, J.variables()), J.variables());
  std::vector<double> g(grad.size());
  for (std::size_t i = 0; i < grad.size(); ++i) g[i] = evaluate(grad[i], x);
  return J.values(x) * std::span<const double>(g);
}

inline std::vector<double> casimir_residual(const StructureMatrix& J, const Expr& D, const Point& p) {
  return casimir_residual(J, D, coordinates(p, J.variables()));
}

struct CasimirReport {
  ResidualReport residual;
  /// Every component of J·∇D simplified to the literal 0, so the identity holds exactly.
  bool symbolic_zero = false;
  bool pass() const { return residual.pass; }
};

/// Symbolic components of J·∇D after simplification.
inline std::vector<Expr> casimir_residual_expr(const StructureMatrix& J, const Expr& D) {
  const auto grad = gradient(bind_to(D, J.variables()), J.variables());
  std::vector<Expr> out;
  out.reserve(J.dim());
  for (std::size_t i = 0; i < J.dim(); ++i) {
    Expr s(0.0);
    for (std::size_t j = 0; j < J.dim(); ++j) s = s + J.entry(i, j) * grad[j];
    out.push_back(simplify(s));
  }
  return out;
}

inline CasimirReport is_casimir(const StructureMatrix& J, const Expr& D, const SampleDomain& dom, double tol) {
  if (!(tol > 0.0)) throw Error("is_casimir: tolerance must be positive");
  CasimirReport rep{ResidualReport("casimir", tol), true};
  const auto comps = casimir_residual_expr(J, D);
  for (const Expr& c : comps)
    if (!c.is_constant(0.0)) rep.symbolic_zero = false;
  for (const Sample& s : dom.samples()) {
    for (std::size_t i = 0; i < comps.size(); ++i) {
      const std::array<std::size_t, 1> idx{i};
      rep.residual.record(s, idx, evaluate(comps[i], s.x));
    }
    ++rep.residual.samples_checked;
  }
  rep.residual.finalize();
  return rep;
}

/// is_casimir for J and for η·J side by side; for nonvanishing η the two verdicts must match.
struct CasimirAgreement {
  CasimirReport plain;
  CasimirReport scaled;
  bool agree() const { return plain.pass() == scaled.pass(); }
};

inline CasimirAgreement casimir_agreement(const StructureMatrix& J, const Expr& eta, const Expr& D,
                                          const SampleDomain& dom, double tol) {
  return {is_casimir(J, D, dom, tol), is_casimir(J.scaled(eta), D, dom, tol)};
}

/// Orthonormal basis of the numeric kernel of J(x), read off the elimination
/// transform: the rows belonging to unpivoted indices.
inline std::vector<std::vector<double>> kernel_basis_at(const StructureMatrix& J, std::span<const double> x,
                                                        double tol) {
  const auto [rank, tr] = rank_at(J, x, tol);
  std::vector<std::vector<double>> rows;
  for (std::size_t k : tr.unpivoted()) {
    const auto r = tr.transform.row(k);
    rows.emplace_back(r.begin(), r.end());
  }
  auto basis = orthonormalize(rows, 1e-12);
  if (basis.size() != J.dim() - rank) throw InternalError("kernel basis dimension differs from n - rank");
  return basis;
}

inline std::vector<std::vector<double>> kernel_basis_at(const StructureMatrix& J, const Point& p, double tol) {
  return kernel_basis_at(J, coordinates(p, J.variables()), tol);
}

/// Smallest rank over samples of the Jacobian of the given functions; equal to
/// their count when they are independent on every sample.
inline std::size_t min_jacobian_rank(const std::vector<Expr>& fns, const VariableList& vars, const SampleDomain& dom,
                                     double tol) {
  if (fns.empty()) return 0;
  const auto jac = jacobian(fns, vars);
  std::size_t best = fns.size();
  for (const Sample& s : dom.samples()) best = std::min(best, numeric_rank(evaluate(jac, s.x), tol));
  return best;
}

}  // namespace poissonkit
