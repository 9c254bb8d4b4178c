#pragma once

// Global Darboux reduction of a rank-two structure. Given two functions d1, d2
// and the n-2 Casimirs D3..Dn, the map y = (d1, d2, D3, ..., Dn) has Jacobian M
// and sends J to J* = M J Mᵀ, whose only nonzero entries are ±η with
// η = {d1, d2}. After the time change dτ = η dt the reduced system is the
// canonical one degree of freedom system in (y1, y2) with y3..yn frozen.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "poissonkit/casimir.hpp"
#include "poissonkit/elimination.hpp"
#include "poissonkit/errors.hpp"
#include "poissonkit/expr.hpp"
#include "poissonkit/linalg.hpp"
#include "poissonkit/sampling.hpp"
#include "poissonkit/structure.hpp"

namespace poissonkit {

enum class ChartCondition { Rank, Casimir, Jacobian, EtaVanishing, InverseMissing, InverseInconsistent };

inline std::string to_string(ChartCondition c) {
  switch (c) {
    case ChartCondition::Rank: return "rank";
    case ChartCondition::Casimir: return "casimir";
    case ChartCondition::Jacobian: return "det M";
    case ChartCondition::EtaVanishing: return "eta sign";
    case ChartCondition::InverseMissing: return "inverse missing";
    case ChartCondition::InverseInconsistent: return "inverse consistency";
  }
  return "?";
}

/// A hypothesis of the reduction that fails on the given instance.
class HypothesisError : public Error {
 public:
  HypothesisError(ChartCondition condition, const std::string& detail, std::optional<std::size_t> sample = {})
      : Error("hypothesis violated (" + to_string(condition) + "): " + detail), condition_(condition),
        sample_(sample) {}
  ChartCondition condition() const noexcept { return condition_; }
  std::optional<std::size_t> sample_index() const noexcept { return sample_; }

 private:
  ChartCondition condition_;
  std::optional<std::size_t> sample_;
};

struct DarbouxInput {
  StructureMatrix J;
  std::vector<Expr> casimirs;  // n-2 entries, become y3..yn
  Expr d1;
  Expr d2;
  /// x as functions of y, over y_vars.
  std::optional<std::vector<Expr>> inverse_map;
  SampleDomain dom;
  VariableList y_vars;  // defaults to y1..yn
};

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
};

struct Hypothesis {
  std::string name;
  bool checked = false;  // false: assumed, not tested
  std::string detail;
};

struct ChartDiagnostics {
  Range det_m;
  Range eta;
  double off_block_max = 0.0;          // |J*_ab| outside the leading 2×2 block
  double diagonal_max = 0.0;           // |J*_11|, |J*_22|
  double bracket_mismatch = 0.0;       // |J*_12 - {d1, d2}|, numeric product versus symbolic bracket
  double inverse_mismatch = 0.0;       // two-sided, when an inverse is given
  std::size_t jstar_rank_min = 0;
  std::size_t jstar_rank_max = 0;
  std::size_t samples_checked = 0;
  std::vector<Hypothesis> hypotheses;
};

struct DarbouxChart {
  StructureMatrix J;
  VariableList x_vars;
  VariableList y_vars;
  std::vector<Expr> forward;             // y(x)
  std::vector<std::vector<Expr>> M;      // rows are gradients of the forward components
  std::vector<std::vector<Expr>> jstar;  // M J Mᵀ in x
  Expr eta;                              // {d1, d2} in x
  std::optional<std::vector<Expr>> inverse_map;  // x(y)
  std::optional<std::vector<std::vector<Expr>>> jstar_y;
  std::optional<Expr> eta_y;
  SampleDomain dom;
  double tolerance = 0.0;
  ChartDiagnostics diagnostics;

  std::vector<double> forward_at(std::span<const double> x) const {
    std::vector<double> y(forward.size());
    for (std::size_t a = 0; a < y.size(); ++a) y[a] = evaluate(forward[a], x);
    return y;
  }
  std::vector<double> inverse_at(std::span<const double> y) const {
    if (!inverse_map) throw HypothesisError(ChartCondition::InverseMissing, "no inverse map supplied");
    std::vector<double> x(inverse_map->size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = evaluate((*inverse_map)[i], y);
    return x;
  }
  Matrix jstar_at(std::span<const double> x) const { return evaluate(jstar, x); }
  Matrix m_at(std::span<const double> x) const { return evaluate(M, x); }
};

namespace detail {

inline std::string sample_text(const Sample& s) {
  std::string t = "sample " + std::to_string(s.index) + " at (";
  for (std::size_t i = 0; i < s.x.size(); ++i) t += (i ? ", " : "") + format_number(s.x[i]);
  return t + ")";
}

inline double rel_gap(std::span<const double> a, std::span<const double> b) {
  double g = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) g = std::max(g, std::abs(a[i] - b[i]) / (1.0 + std::abs(a[i])));
  return g;
}

}  // namespace detail

inline VariableList default_y_variables(std::size_t n) { return default_variables(n, "y"); }

inline DarbouxChart build_chart(const DarbouxInput& in, double tol) {
  if (!(tol > 0.0)) throw Error("build_chart: tolerance must be positive");
  const StructureMatrix& J = in.J;
  const std::size_t n = J.dim();
  const VariableList& xv = J.variables();
  if (in.casimirs.size() + 2 != n)
    throw Error("build_chart: need " + std::to_string(n - 2) + " Casimirs, got " + std::to_string(in.casimirs.size()));

  DarbouxChart ch;
  ch.J = J;
  ch.x_vars = xv;
  ch.y_vars = in.y_vars.empty() ? default_y_variables(n) : in.y_vars;
  if (ch.y_vars.size() != n) throw Error("build_chart: need one y variable per coordinate");
  ch.dom = in.dom;
  ch.tolerance = tol;
  auto& diag = ch.diagnostics;

  const RankReport rank = verify_constant_rank(J, in.dom, tol);
  if (!rank.pass || rank.rank != 2) {
    std::string d = "structure rank is not constantly 2 (rank " + std::to_string(rank.rank) + " at the first sample";
    if (rank.disagreement)
      d += ", " + std::to_string(static_cast<std::size_t>(rank.disagreement->value)) + " at sample " +
           std::to_string(rank.disagreement->sample_index);
    throw HypothesisError(ChartCondition::Rank, d + ")");
  }
  diag.hypotheses.push_back({"constant rank 2", true, "on " + std::to_string(rank.samples_checked) + " samples"});

  for (std::size_t c = 0; c < in.casimirs.size(); ++c) {
    const CasimirReport cr = is_casimir(J, in.casimirs[c], in.dom, tol);
    if (!cr.pass()) {
      std::string d = "D" + std::to_string(c + 3) + " = " + render(in.casimirs[c]) + " is not a Casimir";
      if (cr.residual.worst) d += " (|J grad D| = " + detail::format_number(std::abs(cr.residual.worst->value)) + ")";
      throw HypothesisError(ChartCondition::Casimir, d,
                            cr.residual.worst ? std::optional(cr.residual.worst->sample_index) : std::nullopt);
    }
  }
  diag.hypotheses.push_back({"Casimirs annihilated by J", true, "on samples"});

  ch.forward.push_back(bind_to(in.d1, xv));
  ch.forward.push_back(bind_to(in.d2, xv));
  for (const Expr& D : in.casimirs) ch.forward.push_back(bind_to(D, xv));
  ch.M = jacobian(ch.forward, xv);
  for (auto& row : ch.M)
    for (Expr& e : row) e = simplify(e);

  ch.jstar.assign(n, std::vector<Expr>(n, Expr(0.0)));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      Expr s(0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
          const Expr jij = J.entry(i, j);
          if (jij.is_constant(0.0)) continue;
          s = s + jij * (ch.M[a][i] * ch.M[b][j] - ch.M[a][j] * ch.M[b][i]);
        }
      ch.jstar[a][b] = simplify(s);
      ch.jstar[b][a] = simplify(-ch.jstar[a][b]);
    }
  ch.eta = bracket(J, in.d1, in.d2);

  std::optional<double> eta_sign;
  diag.jstar_rank_min = n;
  for (const Sample& s : in.dom.samples()) {
    const Matrix m = ch.m_at(s.x);
    const double det = determinant(m);
    diag.det_m.add(det);
    if (!(std::abs(det) > tol))
      throw HypothesisError(ChartCondition::Jacobian,
                            "|det M| = " + detail::format_number(std::abs(det)) + " <= tol at " + detail::sample_text(s),
                            s.index);
    const double eta = evaluate(ch.eta, s.x);
    diag.eta.add(eta);
    if (!(std::abs(eta) > tol) || (eta_sign && (eta > 0) != (*eta_sign > 0)))
      throw HypothesisError(ChartCondition::EtaVanishing,
                            "eta = " + detail::format_number(eta) + " at " + detail::sample_text(s), s.index);
    if (!eta_sign) eta_sign = eta;

    const Matrix product = congruence(m, J.values(s.x));
    diag.bracket_mismatch = std::max(diag.bracket_mismatch, std::abs(product(0, 1) - eta));
    diag.diagonal_max = std::max({diag.diagonal_max, std::abs(product(0, 0)), std::abs(product(1, 1))});
    const Matrix js = ch.jstar_at(s.x);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        if (a >= 2 || b >= 2) diag.off_block_max = std::max(diag.off_block_max, std::abs(js(a, b)));
    const std::size_t r = skew_eliminate(js, tol).rank;
    diag.jstar_rank_min = std::min(diag.jstar_rank_min, r);
    diag.jstar_rank_max = std::max(diag.jstar_rank_max, r);
    ++diag.samples_checked;
  }
  diag.hypotheses.push_back({"det M nonzero", true, "on samples"});
  diag.hypotheses.push_back({"eta nonvanishing with constant sign", true, "on samples"});

  if (in.inverse_map) {
    if (in.inverse_map->size() != n) throw Error("build_chart: inverse map must have n components");
    std::vector<Expr> inv;
    for (const Expr& e : *in.inverse_map) inv.push_back(bind_to(e, ch.y_vars));
    for (const Sample& s : in.dom.samples()) {
      const auto y = ch.forward_at(s.x);
      std::vector<double> xb, yb;
      try {
        xb.resize(n);
        for (std::size_t i = 0; i < n; ++i) xb[i] = evaluate(inv[i], y);
        yb = ch.forward_at(xb);
      } catch (const DomainError& e) {
        throw HypothesisError(ChartCondition::InverseInconsistent,
                              std::string("inverse map fails at the image of ") + detail::sample_text(s) + ": " +
                                  e.what(),
                              s.index);
      }
      const double gap = std::max(detail::rel_gap(s.x, xb), detail::rel_gap(y, yb));
      diag.inverse_mismatch = std::max(diag.inverse_mismatch, gap);
      if (!(gap <= tol))
        throw HypothesisError(ChartCondition::InverseInconsistent,
                              "x(y(x)) or y(x(y)) differs by " + detail::format_number(gap) + " at " + detail::sample_text(s),
                              s.index);
    }
    ch.inverse_map = inv;
    std::vector<std::vector<Expr>> jy(n, std::vector<Expr>(n, Expr(0.0)));
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) jy[a][b] = simplify(substitute(ch.jstar[a][b], inv));
    ch.jstar_y = std::move(jy);
    ch.eta_y = simplify(substitute(ch.eta, inv));
    diag.hypotheses.push_back({"one-to-one", true, "two-sided inverse consistency on samples"});
  } else {
    diag.hypotheses.push_back({"one-to-one", false, "assumed; no inverse map supplied"});
  }
  return ch;
}

/// J*(p)/η(p) against S₂ ⊕ 0 at every sample.
inline ResidualReport verify_canonical(const DarbouxChart& ch, double tol) {
  ResidualReport rep("canonical", tol);
  const std::size_t n = ch.x_vars.size();
  for (const Sample& s : ch.dom.samples()) {
    const Matrix js = ch.jstar_at(s.x);
    const double eta = evaluate(ch.eta, s.x);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) {
        const double target = (a == 0 && b == 1) ? 1.0 : (a == 1 && b == 0) ? -1.0 : 0.0;
        const std::array<std::size_t, 2> idx{a, b};
        rep.record(s, idx, js(a, b) / eta - target);
      }
    ++rep.samples_checked;
  }
  rep.finalize();
  return rep;
}

/// Solves a·v = b by Gaussian elimination with partial pivoting.
inline std::vector<double> solve_linear(Matrix a, std::vector<double> b) {
  const std::size_t n = a.rows();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(p, k))) p = i;
    if (a(p, k) == 0.0) throw Error("solve_linear: singular matrix");
    a.swap_rows(k, p);
    std::swap(b[k], b[p]);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      for (std::size_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
      b[i] -= f * b[k];
    }
  }
  std::vector<double> v(n);
  for (std::size_t k = n; k-- > 0;) {
    double s = b[k];
    for (std::size_t j = k + 1; j < n; ++j) s -= a(k, j) * v[j];
    v[k] = s / a(k, k);
  }
  return v;
}

/// The canonical system in y with respect to τ.
struct ReducedSystem {
  bool symbolic = false;
  std::optional<Expr> hstar;  // H(x(y)), symbolic mode only
  std::vector<Expr> rhs;      // symbolic mode only: (∂H*/∂y2, -∂H*/∂y1, 0, ..., 0)
  std::function<std::vector<double>(std::span<const double>)> evaluate_rhs;
};

/// Symbolic mode needs the inverse map. Numeric mode inverts y(x) by Newton
/// iteration seeded at the nearest sample image and returns (1/η) M J ∇H there.
inline ReducedSystem reduce_hamiltonian(const DarbouxChart& ch, const Expr& H, bool symbolic = true) {
  const std::size_t n = ch.x_vars.size();
  ReducedSystem rs;
  rs.symbolic = symbolic;
  const Expr hx = bind_to(H, ch.x_vars);
  if (symbolic) {
    if (!ch.inverse_map)
      throw HypothesisError(ChartCondition::InverseMissing, "symbolic reduction needs an inverse map");
    const Expr hs = simplify(substitute(hx, *ch.inverse_map));
    rs.hstar = hs;
    rs.rhs.assign(n, Expr(0.0));
    rs.rhs[0] = simplify(differentiate(hs, ch.y_vars[1]));
    rs.rhs[1] = simplify(-differentiate(hs, ch.y_vars[0]));
    rs.evaluate_rhs = [rhs = rs.rhs](std::span<const double> y) {
      std::vector<double> out(rhs.size());
      for (std::size_t a = 0; a < rhs.size(); ++a) out[a] = evaluate(rhs[a], y);
      return out;
    };
    return rs;
  }

  std::vector<std::pair<std::vector<double>, std::vector<double>>> seeds;  // (y, x)
  for (const Sample& s : ch.dom.samples()) seeds.emplace_back(ch.forward_at(s.x), s.x);
  if (seeds.empty()) throw EmptyDomainError("reduce_hamiltonian: no samples to seed the inversion");
  const auto field = system_rhs(ch.J, hx);
  rs.evaluate_rhs = [ch, seeds = std::move(seeds), field, n](std::span<const double> y) {
    const auto* best = &seeds.front();
    double bd = std::numeric_limits<double>::infinity();
    for (const auto& sd : seeds) {
      double d = 0.0;
      for (std::size_t a = 0; a < n; ++a) d += (sd.first[a] - y[a]) * (sd.first[a] - y[a]);
      if (d < bd) {
        bd = d;
        best = &sd;
      }
    }
    std::vector<double> x = best->second;
    bool converged = false;
    for (int it = 0; it < 50 && !converged; ++it) {
      const auto yx = ch.forward_at(x);
      std::vector<double> r(n);
      for (std::size_t a = 0; a < n; ++a) r[a] = yx[a] - y[a];
      const auto dx = solve_linear(ch.m_at(x), r);
      double step = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        x[i] -= dx[i];
        step = std::max(step, std::abs(dx[i]) / (1.0 + std::abs(x[i])));
      }
      converged = step < 1e-14;
    }
    if (!converged) throw InternalError("reduce_hamiltonian: Newton inversion did not converge");
    std::vector<double> f(n);
    for (std::size_t i = 0; i < n; ++i) f[i] = evaluate(field[i], x);
    const double eta = evaluate(ch.eta, x);
    auto out = ch.m_at(x) * std::span<const double>(f);
    for (double& v : out) v /= eta;
    return out;
  };
  return rs;
}

struct CoordinatePair {
  std::size_t i = 0;
  std::size_t j = 0;
  double min_abs_bracket = 0.0;  // min over samples of |J_ij|
};

/// Coordinate pairs (x_i, x_j) whose bracket J_ij stays away from zero on the
/// samples, best first. A suggestion only; build_chart never picks one itself.
inline std::vector<CoordinatePair> suggest_coordinate_pairs(const StructureMatrix& J, const SampleDomain& dom) {
  const std::size_t n = J.dim();
  std::vector<CoordinatePair> out;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) out.push_back({i, j, std::numeric_limits<double>::infinity()});
  for (const Sample& s : dom.samples()) {
    const Matrix v = J.values(s.x);
    for (auto& c : out) c.min_abs_bracket = std::min(c.min_abs_bracket, std::abs(v(c.i, c.j)));
  }
  std::erase_if(out, [](const CoordinatePair& c) { return !(c.min_abs_bracket > 0.0); });
  std::stable_sort(out.begin(), out.end(),
                   [](const CoordinatePair& a, const CoordinatePair& b) { return a.min_abs_bracket > b.min_abs_bracket; });
  return out;
}

}  // namespace poissonkit
