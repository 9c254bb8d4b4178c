#pragma once

// Built-in example systems shared by the tests, the CLI and the README.

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "poissonkit/casimir.hpp"
#include "poissonkit/darboux.hpp"
#include "poissonkit/elimination.hpp"
#include "poissonkit/errors.hpp"
#include "poissonkit/expr.hpp"
#include "poissonkit/parse.hpp"
#include "poissonkit/reparam.hpp"
#include "poissonkit/sampling.hpp"
#include "poissonkit/structure.hpp"

namespace poissonkit {

struct CatalogEntry {
  std::string name;
  StructureMatrix J;
  Expr hamiltonian;
  std::vector<Expr> casimirs;
  SampleDomain domain;
  Verdict verdict = Verdict::Undetermined;
  std::size_t rank = 0;
  std::optional<DarbouxInput> darboux;
  std::vector<Expr> reparam_candidates;
  std::optional<std::vector<double>> initial_state;

  std::size_t dim() const { return J.dim(); }
};

namespace detail {

inline Expr half_sum_of_squares(const VariableList& vars) {
  Expr s(0.0);
  for (std::size_t i = 0; i < vars.size(); ++i) s = s + pow(Expr::variable(vars[i], i), 2.0);
  return s / Expr(2.0);
}

inline StructureMatrix symplectic_block(std::string name, std::size_t n, std::size_t pairs) {
  std::map<std::pair<std::size_t, std::size_t>, Expr> entries;
  for (std::size_t b = 0; b < pairs; ++b) entries[{2 * b, 2 * b + 1}] = Expr(1.0);
  return StructureMatrix::from_entries(std::move(name), default_variables(n), entries);
}

}  // namespace detail

/// Sₙ = ⊕ [[0, 1], [-1, 0]].
inline CatalogEntry canonical(std::size_t n) {
  if (n < 2 || n % 2 != 0) throw Error("canonical: n must be even and at least 2");
  const auto vars = default_variables(n);
  CatalogEntry e;
  e.name = "canonical_" + std::to_string(n);
  e.J = detail::symplectic_block("S" + std::to_string(n), n, n / 2);
  e.hamiltonian = detail::half_sum_of_squares(vars);
  e.domain = SampleDomain::cube(n, 0.1, 2.0);
  e.verdict = n == 2 ? Verdict::Universal : Verdict::ConstantsOnly;
  e.rank = n;
  return e;
}

/// Rigid body: J_12 = x3, J_13 = -x2, J_23 = x1 on [0.1, 2]³.
inline CatalogEntry euler_top() {
  const VariableList vars = default_variables(3);
  CatalogEntry e;
  e.name = "euler_top";
  e.J = StructureMatrix("euler_top", vars, {parse("x3", vars), parse("-x2", vars), parse("x1", vars)});
  e.hamiltonian = parse("(x1^2 + 2*x2^2 + 3*x3^2)/2", vars);
  e.casimirs = {parse("(x1^2 + x2^2 + x3^2)/2", vars)};
  e.domain = SampleDomain::cube(3, 0.1, 2.0);
  e.verdict = Verdict::Universal;
  e.rank = 2;
  const VariableList yv = default_y_variables(3);
  e.darboux = DarbouxInput{e.J,
                           e.casimirs,
                           parse("x1", vars),
                           parse("x2", vars),
                           std::vector<Expr>{parse("y1", yv), parse("y2", yv), parse("sqrt(2*y3 - y1^2 - y2^2)", yv)},
                           e.domain,
                           yv};
  e.reparam_candidates = {exp(e.casimirs[0])};
  e.initial_state = std::vector<double>{1.0, 1.0, 1.0};
  return e;
}

/// J_12 = f, every other entry zero; Casimirs x3..xn.
inline CatalogEntry rank2_single_entry(std::size_t n, const Expr& f) {
  if (n < 3) throw Error("rank2_single_entry: n must be at least 3");
  const auto vars = default_variables(n);
  const auto xs = variables_of(vars);
  CatalogEntry e;
  e.name = "rank2_single_entry_" + std::to_string(n);
  e.J = StructureMatrix::from_entries("J12=" + render(f), vars, {{{0, 1}, f}});
  e.hamiltonian = detail::half_sum_of_squares(vars);
  for (std::size_t i = 2; i < n; ++i) e.casimirs.push_back(xs[i]);
  e.domain = SampleDomain::cube(n, 0.1, 2.0);
  e.verdict = Verdict::Universal;
  e.rank = 2;
  const auto ys = variables_of(default_y_variables(n));
  e.darboux = DarbouxInput{e.J, e.casimirs, xs[0], xs[1], ys, e.domain, default_y_variables(n)};
  return e;
}

/// Sₙ ⊕ 0ₖ in dimension n + k; Casimirs x_{n+1}..x_{n+k}.
inline CatalogEntry padded_symplectic(std::size_t n, std::size_t k) {
  if (n < 4 || n % 2 != 0) throw Error("padded_symplectic: n must be even and at least 4");
  if (k < 1) throw Error("padded_symplectic: k must be at least 1");
  const std::size_t dim = n + k;
  const auto vars = default_variables(dim);
  const auto xs = variables_of(vars);
  CatalogEntry e;
  e.name = "padded_symplectic_" + std::to_string(n) + "_" + std::to_string(k);
  e.J = detail::symplectic_block("S" + std::to_string(n) + "+0_" + std::to_string(k), dim, n / 2);
  e.hamiltonian = detail::half_sum_of_squares(vars);
  for (std::size_t i = n; i < dim; ++i) e.casimirs.push_back(xs[i]);
  e.domain = SampleDomain::cube(dim, 0.1, 2.0);
  e.verdict = Verdict::CasimirFamilyAvailable;
  e.rank = n;
  return e;
}

inline std::vector<CatalogEntry> catalog() {
  const auto v5 = default_variables(5);
  return {canonical(2),
          canonical(4),
          canonical(6),
          euler_top(),
          rank2_single_entry(3, Expr(1.0)),
          rank2_single_entry(4, parse("1 + x3^2", default_variables(4))),
          rank2_single_entry(5, parse("exp(x1)", v5)),
          padded_symplectic(4, 1),
          padded_symplectic(4, 2)};
}

inline std::optional<CatalogEntry> find_entry(const std::string& name) {
  for (CatalogEntry& e : catalog())
    if (e.name == name) return std::move(e);
  return std::nullopt;
}

struct SelfTestResult {
  std::string name;
  bool pass = true;
  std::vector<std::string> failures;
};

/// Re-derives every stored property of the entry.
inline SelfTestResult self_test(const CatalogEntry& e, double tol = 1e-9) {
  SelfTestResult r{e.name, true, {}};
  auto fail = [&r](std::string msg) {
    r.pass = false;
    r.failures.push_back(std::move(msg));
  };
  if (!verify_jacobi(e.J, e.domain, tol).pass) fail("jacobi");
  const RankReport rr = verify_constant_rank(e.J, e.domain, tol);
  if (!rr.pass || rr.rank != e.rank) fail("rank");
  for (const Expr& D : e.casimirs)
    if (!is_casimir(e.J, D, e.domain, tol).pass()) fail("casimir " + render(D));
  const Verdict v = classify(e.J, e.domain, tol).verdict;
  if (v != e.verdict) fail("verdict " + to_string(v) + " differs from stored " + to_string(e.verdict));
  if (e.darboux) {
    try {
      const DarbouxChart ch = build_chart(*e.darboux, tol);
      if (!verify_canonical(ch, tol).pass) fail("canonical form");
    } catch (const HypothesisError& err) {
      fail(err.what());
    }
  }
  return r;
}

}  // namespace poissonkit
