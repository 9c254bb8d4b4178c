#pragma once

// Candidate structure matrices J(x) and the checks that make them Poisson:
// the Jacobi residual, the bracket {f, g} = ∇fᵀ J ∇g, the Hamiltonian vector
// field J ∇H and the pushforward M J Mᵀ under a change of coordinates.

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "poissonkit/errors.hpp"
#include "poissonkit/expr.hpp"
#include "poissonkit/linalg.hpp"
#include "poissonkit/sampling.hpp"

namespace poissonkit {

/// Values of vars taken from p by name.
inline std::vector<double> coordinates(const Point& p, const VariableList& vars) {
  std::vector<double> x(vars.size());
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const std::size_t at = p.find(vars[i]);
    if (at == p.size()) throw Error("Point does not cover variable '" + vars[i] + "'");
    x[i] = p[at];
  }
  return x;
}

/// Skew-symmetric n×n matrix of expressions over x_1..x_n, stored as its strict
/// upper triangle. J_ji = -J_ij and J_ii = 0 hold by construction. Indices in
/// this API are 0-based.
class StructureMatrix {
 public:
  StructureMatrix() = default;

  /// upper lists J_ij for i < j in row-major order: (0,1), (0,2), ..., (1,2), ...
  StructureMatrix(std::string name, VariableList vars, std::vector<Expr> upper)
      : name_(std::move(name)), vars_(std::move(vars)), upper_(std::move(upper)) {
    const std::size_t n = vars_.size();
    if (n < 2) throw Error("StructureMatrix: dimension must be at least 2");
    if (upper_.size() != n * (n - 1) / 2)
      throw Error("StructureMatrix: expected " + std::to_string(n * (n - 1) / 2) + " upper entries");
    for (Expr& e : upper_) e = bind_to(e, vars_);
    build_derivatives();
  }

  /// Entries keyed by 0-based (i, j) with i < j; absent entries are zero.
  static StructureMatrix from_entries(std::string name, VariableList vars,
                                      const std::map<std::pair<std::size_t, std::size_t>, Expr>& entries) {
    const std::size_t n = vars.size();
    std::vector<Expr> upper(n < 2 ? 0 : n * (n - 1) / 2, Expr(0.0));
    for (const auto& [ij, e] : entries) {
      const auto [i, j] = ij;
      if (!(i < j && j < n)) throw Error("StructureMatrix: entry index out of range or not i < j");
      upper[offset(n, i, j)] = e;
    }
    return StructureMatrix(std::move(name), std::move(vars), std::move(upper));
  }

  std::size_t dim() const noexcept { return vars_.size(); }
  const std::string& name() const noexcept { return name_; }
  const VariableList& variables() const noexcept { return vars_; }

  Expr entry(std::size_t i, std::size_t j) const {
    if (i == j) return Expr(0.0);
    if (i < j) return upper_[offset(dim(), i, j)];
    return -upper_[offset(dim(), j, i)];
  }

  /// ∂_l J_ij for any i, j.
  Expr partial(std::size_t i, std::size_t j, std::size_t l) const {
    if (i == j) return Expr(0.0);
    if (i < j) return d_upper_[offset(dim(), i, j) * dim() + l];
    return -d_upper_[offset(dim(), j, i) * dim() + l];
  }

  /// η·J, entrywise.
  StructureMatrix scaled(const Expr& eta, std::string name = {}) const {
    const Expr factor = bind_to(eta, vars_);
    std::vector<Expr> up;
    up.reserve(upper_.size());
    for (const Expr& e : upper_) up.push_back(factor * e);
    return StructureMatrix(name.empty() ? "(" + render(eta) + ")*" + name_ : std::move(name), vars_, std::move(up));
  }

  /// J and all first partials evaluated at one point.
  struct Local {
    Matrix value;                // J_ij
    std::vector<Matrix> partial; // partial[l](i, j) = ∂_l J_ij
  };

  Matrix values(std::span<const double> x) const {
    const std::size_t n = dim();
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double v = eval_entry(upper_[offset(n, i, j)], i, j, x);
        m(i, j) = v;
        m(j, i) = -v;
      }
    return m;
  }

  Local local(std::span<const double> x) const {
    const std::size_t n = dim();
    Local loc{values(x), std::vector<Matrix>(n, Matrix(n, n))};
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        for (std::size_t l = 0; l < n; ++l) {
          const Expr& d = d_upper_[offset(n, i, j) * n + l];
          if (d.is_constant(0.0)) continue;
          const double v = eval_entry(d, i, j, x);
          loc.partial[l](i, j) = v;
          loc.partial[l](j, i) = -v;
        }
    return loc;
  }

 private:
  static std::size_t offset(std::size_t n, std::size_t i, std::size_t j) {
    // Row i of the strict upper triangle starts after i rows of decreasing length.
    return i * n - i * (i + 1) / 2 + (j - i - 1);
  }

  void build_derivatives() {
    const std::size_t n = dim();
    d_upper_.clear();
    d_upper_.reserve(upper_.size() * n);
    for (const Expr& e : upper_)
      for (std::size_t l = 0; l < n; ++l) d_upper_.push_back(differentiate(e, vars_[l]));
  }

  static double eval_entry(const Expr& e, std::size_t i, std::size_t j, std::span<const double> x) {
    try {
      return evaluate(e, x);
    } catch (const DomainError& err) {
      throw DomainError(err.reason() + " (entry J_" + std::to_string(i + 1) + std::to_string(j + 1) + ")",
                        err.subexpression());
    }
  }

  std::string name_;
  VariableList vars_;
  std::vector<Expr> upper_;
  std::vector<Expr> d_upper_;  // d_upper_[k * n + l] = ∂_l of upper_[k]
};

/// Σ_l (J_li ∂_l J_jk + J_lj ∂_l J_ki + J_lk ∂_l J_ij) from precomputed local data.
inline double jacobi_residual(const StructureMatrix::Local& loc, std::size_t i, std::size_t j, std::size_t k) {
  const std::size_t n = loc.value.rows();
  double s = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    const Matrix& d = loc.partial[l];
    s += loc.value(l, i) * d(j, k) + loc.value(l, j) * d(k, i) + loc.value(l, k) * d(i, j);
  }
  return s;
}

inline double jacobi_residual(const StructureMatrix& J, std::size_t i, std::size_t j, std::size_t k,
                              std::span<const double> x) {
  const std::size_t n = J.dim();
  if (i >= n || j >= n || k >= n) throw Error("jacobi_residual: index out of range");
  const double r = jacobi_residual(J.local(x), i, j, k);
  if ((i == j || j == k || i == k) && r != 0.0)
    throw InternalError("Jacobi residual with a repeated index is not exactly zero");
  return r;
}

inline double jacobi_residual(const StructureMatrix& J, std::size_t i, std::size_t j, std::size_t k, const Point& p) {
  return jacobi_residual(J, i, j, k, coordinates(p, J.variables()));
}

/// Jacobi residual over every triple i<j<k at every kept sample. Passing means
/// no counterexample was found on the samples, not a proof.
inline ResidualReport verify_jacobi(const StructureMatrix& J, const SampleDomain& dom, double tol) {
  if (!(tol > 0.0)) throw Error("verify_jacobi: tolerance must be positive");
  ResidualReport rep("jacobi", tol);
  const std::size_t n = J.dim();
  for (const Sample& s : dom.samples()) {
    const auto loc = J.local(s.x);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        for (std::size_t k = j + 1; k < n; ++k) {
          const std::array<std::size_t, 3> idx{i, j, k};
          rep.record(s, idx, jacobi_residual(loc, i, j, k));
        }
    ++rep.samples_checked;
  }
  rep.finalize();
  return rep;
}

inline std::vector<Expr> gradient(const Expr& f, const VariableList& vars) {
  std::vector<Expr> g;
  g.reserve(vars.size());
  for (const std::string& v : vars) g.push_back(differentiate(f, v));
  return g;
}

/// {f, g} = Σ_ij ∂_i f J_ij ∂_j g, grouped over i < j.
inline Expr bracket(const StructureMatrix& J, const Expr& f, const Expr& g) {
  const auto& vars = J.variables();
  const auto df = gradient(bind_to(f, vars), vars);
  const auto dg = gradient(bind_to(g, vars), vars);
  Expr sum(0.0);
  for (std::size_t i = 0; i < J.dim(); ++i)
    for (std::size_t j = i + 1; j < J.dim(); ++j) {
      const Expr jij = J.entry(i, j);
      if (jij.is_constant(0.0)) continue;
      sum = sum + jij * (df[i] * dg[j] - df[j] * dg[i]);
    }
  return simplify(sum);
}

/// Components Σ_j J_ij ∂_j H of the Poisson vector field.
inline std::vector<Expr> system_rhs(const StructureMatrix& J, const Expr& H) {
  const auto dH = gradient(bind_to(H, J.variables()), J.variables());
  std::vector<Expr> rhs;
  rhs.reserve(J.dim());
  for (std::size_t i = 0; i < J.dim(); ++i) {
    Expr s(0.0);
    for (std::size_t j = 0; j < J.dim(); ++j) s = s + J.entry(i, j) * dH[j];
    rhs.push_back(simplify(s));
  }
  return rhs;
}

/// Symbolic Jacobian rows ∂y_i/∂x_k.
inline std::vector<std::vector<Expr>> jacobian(const std::vector<Expr>& map, const VariableList& vars) {
  std::vector<std::vector<Expr>> m;
  m.reserve(map.size());
  for (const Expr& y : map) m.push_back(gradient(bind_to(y, vars), vars));
  return m;
}

inline Matrix evaluate(const std::vector<std::vector<Expr>>& m, std::span<const double> x) {
  Matrix out(m.size(), m.empty() ? 0 : m.front().size());
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j) out(i, j) = evaluate(m[i][j], x);
  return out;
}

/// Value of the transformed structure M(p) J(p) M(p)ᵀ at y(p); no inverse map needed.
inline Matrix transform_pushforward(const StructureMatrix& J, const std::vector<Expr>& y_map,
                                    std::span<const double> x) {
  if (y_map.size() != J.dim()) throw Error("transform_pushforward: map must have n components");
  return congruence(evaluate(jacobian(y_map, J.variables()), x), J.values(x));
}

inline Matrix transform_pushforward(const StructureMatrix& J, const std::vector<Expr>& y_map, const Point& p) {
  return transform_pushforward(J, y_map, coordinates(p, J.variables()));
}

}  // namespace poissonkit
