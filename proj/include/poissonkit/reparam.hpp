#pragma once

// Reparametrization factors: nonvanishing η for which η·J is again a
// structure matrix. Substituting η·J into the Jacobi identities and using that
// J already satisfies them leaves the linear conditions
//
//   Σ_l (J_il J_jk + J_kl J_ij + J_jl J_ki) ∂_l η = 0,
//
// whose coefficients Ξ_ijkl are totally antisymmetric and vanish for l in
// {i, j, k}. Ξ vanishes identically exactly when rank J <= 2 (then every η is
// a factor); if the coefficient system has full column rank at every point,
// only constant η survive.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "poissonkit/casimir.hpp"
#include "poissonkit/elimination.hpp"
#include "poissonkit/errors.hpp"
#include "poissonkit/expr.hpp"
#include "poissonkit/linalg.hpp"
#include "poissonkit/sampling.hpp"
#include "poissonkit/structure.hpp"

namespace poissonkit {

/// Ξ_ijkl = J_il J_jk + J_kl J_ij + J_jl J_ki for a numeric skew matrix.
inline double xi(const Matrix& a, std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
  return a(i, l) * a(j, k) + a(k, l) * a(i, j) + a(j, l) * a(k, i);
}

inline double xi(const StructureMatrix& J, std::size_t i, std::size_t j, std::size_t k, std::size_t l,
                 std::span<const double> x) {
  const std::size_t n = J.dim();
  if (i >= n || j >= n || k >= n || l >= n) throw Error("xi: index out of range");
  return xi(J.values(x), i, j, k, l);
}

inline double xi(const StructureMatrix& J, std::size_t i, std::size_t j, std::size_t k, std::size_t l,
                 const Point& p) {
  return xi(J, i, j, k, l, coordinates(p, J.variables()));
}

inline Matrix principal_submatrix(const Matrix& a, std::span<const std::size_t> idx) {
  Matrix s(idx.size(), idx.size());
  for (std::size_t u = 0; u < idx.size(); ++u)
    for (std::size_t v = 0; v < idx.size(); ++v) s(u, v) = a(idx[u], idx[v]);
  return s;
}

/// Records, for every i<j<k<l, |det J^[ijkl] - Ξ_ijkl²| / (1 + |det|) into rep.
inline void record_pfaffian(const Matrix& a, const Sample& s, ResidualReport& rep) {
  const std::size_t n = a.rows();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      for (std::size_t k = j + 1; k < n; ++k)
        for (std::size_t l = k + 1; l < n; ++l) {
          const std::array<std::size_t, 4> idx{i, j, k, l};
          const double det = determinant(principal_submatrix(a, idx));
          const double x = xi(a, i, j, k, l);
          rep.record(s, idx, (det - x * x) / (1.0 + std::abs(det)));
        }
}

/// 4×4 principal minors against Ξ² at every sample; residuals are relative to 1 + |det|.
inline ResidualReport pfaffian_identity_check(const StructureMatrix& J, const SampleDomain& dom, double tol) {
  if (J.dim() < 4) throw Error("pfaffian_identity_check: needs n >= 4");
  ResidualReport rep("pfaffian", tol);
  for (const Sample& s : dom.samples()) {
    record_pfaffian(J.values(s.x), s, rep);
    ++rep.samples_checked;
  }
  rep.finalize();
  return rep;
}

// ---------------------------------------------------------------------------
// Factor residuals

/// η, ∇η and J at one point.
struct FactorLocal {
  Matrix value;
  std::vector<double> grad_eta;
  double eta = 0.0;
};

class FactorEvaluator {
 public:
  FactorEvaluator(const StructureMatrix& J, const Expr& eta)
      : J_(J), eta_(bind_to(eta, J.variables())), grad_(gradient(eta_, J.variables())) {}

  FactorLocal at(std::span<const double> x) const {
    FactorLocal loc{J_.values(x), std::vector<double>(grad_.size()), evaluate(eta_, x)};
    for (std::size_t l = 0; l < grad_.size(); ++l) loc.grad_eta[l] = evaluate(grad_[l], x);
    return loc;
  }

  const Expr& eta() const noexcept { return eta_; }

 private:
  const StructureMatrix& J_;
  Expr eta_;
  std::vector<Expr> grad_;
};

/// Both forms of the residual: the full l-sum and the sum over l outside {i, j, k}.
struct FactorResidualPair {
  double full = 0.0;
  double reduced = 0.0;
};

inline FactorResidualPair factor_residual_forms(const FactorLocal& loc, std::size_t i, std::size_t j, std::size_t k) {
  FactorResidualPair r;
  for (std::size_t l = 0; l < loc.grad_eta.size(); ++l) {
    const double term = xi(loc.value, i, j, k, l) * loc.grad_eta[l];
    r.full += term;
    if (l != i && l != j && l != k) r.reduced += term;
  }
  return r;
}

inline double factor_residual(const FactorLocal& loc, std::size_t i, std::size_t j, std::size_t k) {
  const auto r = factor_residual_forms(loc, i, j, k);
  if (std::abs(r.full - r.reduced) > 1e-12 * (1.0 + std::abs(r.full)))
    throw InternalError("factor residual: full and reduced l-sums disagree");
  return r.reduced;
}

inline double factor_residual(const StructureMatrix& J, const Expr& eta, std::size_t i, std::size_t j, std::size_t k,
                              std::span<const double> x) {
  const std::size_t n = J.dim();
  if (i >= n || j >= n || k >= n) throw Error("factor_residual: index out of range");
  return factor_residual(FactorEvaluator(J, eta).at(x), i, j, k);
}

inline double factor_residual(const StructureMatrix& J, const Expr& eta, std::size_t i, std::size_t j, std::size_t k,
                              const Point& p) {
  return factor_residual(J, eta, i, j, k, coordinates(p, J.variables()));
}

struct FactorReport {
  double tolerance = 0.0;
  bool nonvanishing = true;
  double min_abs_eta = INFINITY;
  std::optional<Witness> smallest_eta;
  ResidualReport factor;   // linear conditions on ∇η
  ResidualReport product;  // Jacobi residual of η·J
  /// Largest |R(ηJ) - (η² R(J) - η F)| / (1 + scale) seen; must stay at rounding level.
  double decomposition_mismatch = 0.0;
  bool agree = true;  // factor.pass == product.pass
  bool pass = false;
};

/// Checks that η is a reparametrization factor for J on the samples: η nonzero,
/// the linear conditions hold, and η·J passes the Jacobi check directly.
inline FactorReport check_factor(const StructureMatrix& J, const Expr& eta, const SampleDomain& dom, double tol) {
  if (!(tol > 0.0)) throw Error("check_factor: tolerance must be positive");
  const std::size_t n = J.dim();
  const FactorEvaluator fe(J, eta);
  const StructureMatrix scaled = J.scaled(fe.eta());
  FactorReport rep;
  rep.tolerance = tol;
  rep.factor = ResidualReport("factor", tol);
  rep.product = ResidualReport("jacobi(eta*J)", tol);
  for (const Sample& s : dom.samples()) {
    const FactorLocal loc = fe.at(s.x);
    const double a = std::abs(loc.eta);
    if (a < rep.min_abs_eta) {
      rep.min_abs_eta = a;
      rep.smallest_eta = Witness{s.index, s.x, {}, loc.eta};
    }
    if (!(a > 0.0)) rep.nonvanishing = false;
    const auto base = J.local(s.x);
    const auto prod = scaled.local(s.x);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        for (std::size_t k = j + 1; k < n; ++k) {
          const std::array<std::size_t, 3> idx{i, j, k};
          const double f = factor_residual(loc, i, j, k);
          const double rj = jacobi_residual(base, i, j, k);
          const double rp = jacobi_residual(prod, i, j, k);
          rep.factor.record(s, idx, f);
          rep.product.record(s, idx, rp);
          const double expected = loc.eta * loc.eta * rj - loc.eta * f;
          const double scale = 1.0 + std::abs(rp) + std::abs(loc.eta) * (std::abs(loc.eta * rj) + std::abs(f));
          rep.decomposition_mismatch = std::max(rep.decomposition_mismatch, std::abs(rp - expected) / scale);
        }
    ++rep.factor.samples_checked;
    ++rep.product.samples_checked;
  }
  rep.factor.finalize();
  rep.product.finalize();
  if (rep.decomposition_mismatch > 1e-8)
    throw InternalError("Jacobi residual of eta*J does not decompose into eta^2 R(J) - eta F (mismatch " +
                        std::to_string(rep.decomposition_mismatch) + ")");
  rep.agree = rep.factor.pass == rep.product.pass;
  rep.pass = rep.nonvanishing && rep.factor.pass && rep.product.pass;
  return rep;
}

// ---------------------------------------------------------------------------
// Family built from Casimirs

struct ReparamCandidate {
  Expr eta;
  std::string note;
};

enum class Family1Mode { Exp, OnePlusSquare };

inline std::string to_string(Family1Mode m) { return m == Family1Mode::Exp ? "exp" : "one-plus-square"; }

class FactorError : public Error {
 public:
  using Error::Error;
};

/// η = exp(D) or 1 + D² for a Casimir D; any nonvanishing smooth function of a
/// Casimir is a factor. Throws FactorError when D fails the Casimir check.
inline ReparamCandidate family1_factor(const StructureMatrix& J, const Expr& D, Family1Mode mode,
                                       const SampleDomain& dom, double tol) {
  const Expr d = bind_to(D, J.variables());
  const CasimirReport cr = is_casimir(J, d, dom, tol);
  if (!cr.pass())
    throw FactorError("'" + render(D) + "' is not a Casimir of " + J.name() + " (max |J grad D| = " +
                      std::to_string(cr.residual.max_abs) + ")");
  const Expr eta = mode == Family1Mode::Exp ? exp(d) : Expr(1.0) + pow(d, 2.0);
  return {simplify(eta), to_string(mode) + " of Casimir " + render(D)};
}

// ---------------------------------------------------------------------------
// Classification

/// Rows are triples i<j<k, columns l; entry Ξ_ijkl (zero for l in {i, j, k}).
/// Any factor's gradient lies in the kernel of this matrix.
inline Matrix coefficient_matrix(const Matrix& a) {
  const std::size_t n = a.rows();
  if (n < 3) throw Error("coefficient_matrix: needs n >= 3");
  Matrix c(n * (n - 1) * (n - 2) / 6, n);
  std::size_t row = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      for (std::size_t k = j + 1; k < n; ++k, ++row)
        for (std::size_t l = 0; l < n; ++l)
          if (l != i && l != j && l != k) c(row, l) = xi(a, i, j, k, l);
  return c;
}

inline Matrix coefficient_matrix_at(const StructureMatrix& J, std::span<const double> x) {
  return coefficient_matrix(J.values(x));
}

inline Matrix coefficient_matrix_at(const StructureMatrix& J, const Point& p) {
  return coefficient_matrix_at(J, coordinates(p, J.variables()));
}

enum class Verdict { Universal, ConstantsOnly, CasimirFamilyAvailable, Undetermined };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Universal: return "universal";
    case Verdict::ConstantsOnly: return "constants-only";
    case Verdict::CasimirFamilyAvailable: return "casimir-family-available";
    case Verdict::Undetermined: return "undetermined";
  }
  return "undetermined";
}

struct FactorClassification {
  Verdict verdict = Verdict::Undetermined;
  double tolerance = 0.0;
  double max_abs_xi = 0.0;
  std::optional<Witness> xi_witness;
  std::size_t min_coefficient_rank = 0;
  std::size_t max_coefficient_rank = 0;
  RankReport structure_rank;
  std::vector<std::string> notes;
};

/// Ξ values in (tol, kMarginalBand * tol] are too close to the threshold to support a verdict.
inline constexpr double kMarginalBand = 1e3;

inline FactorClassification classify(const StructureMatrix& J, const SampleDomain& dom, double tol) {
  if (!(tol > 0.0)) throw Error("classify: tolerance must be positive");
  const std::size_t n = J.dim();
  FactorClassification fc;
  fc.tolerance = tol;
  fc.structure_rank = verify_constant_rank(J, dom, tol);
  fc.min_coefficient_rank = n;
  fc.max_coefficient_rank = 0;
  for (const Sample& s : dom.samples()) {
    const Matrix a = J.values(s.x);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        for (std::size_t k = j + 1; k < n; ++k)
          for (std::size_t l = k + 1; l < n; ++l) {
            const double v = xi(a, i, j, k, l);
            if (!fc.xi_witness || std::abs(v) > fc.max_abs_xi) {
              fc.max_abs_xi = std::abs(v);
              fc.xi_witness = Witness{s.index, s.x, {i, j, k, l}, v};
            }
          }
    const std::size_t cr = n >= 3 ? numeric_rank(coefficient_matrix(a), tol) : 0;
    fc.min_coefficient_rank = std::min(fc.min_coefficient_rank, cr);
    fc.max_coefficient_rank = std::max(fc.max_coefficient_rank, cr);
  }

  const RankReport& rr = fc.structure_rank;
  if (fc.max_abs_xi <= tol) {
    if (rr.pass && rr.rank <= 2) {
      fc.verdict = Verdict::Universal;
    } else {
      fc.verdict = Verdict::Undetermined;
      fc.notes.push_back("all Xi vanish but the elimination rank is not a constant <= 2");
    }
  } else if (fc.max_abs_xi <= kMarginalBand * tol) {
    fc.verdict = Verdict::Undetermined;
    fc.notes.push_back("max |Xi| lies within the marginal band above the tolerance");
  } else if (fc.min_coefficient_rank == n) {
    if (rr.pass && rr.rank == n) {
      fc.verdict = Verdict::ConstantsOnly;
    } else {
      fc.verdict = Verdict::Undetermined;
      fc.notes.push_back("coefficient system has full rank but the structure is not of full constant rank");
    }
  } else if (fc.max_coefficient_rank < n && rr.pass && rr.rank < n) {
    fc.verdict = Verdict::CasimirFamilyAvailable;
    fc.notes.push_back("nonconstant factors exist as functions of Casimirs; completeness of this family is not claimed");
  } else {
    fc.verdict = Verdict::Undetermined;
    fc.notes.push_back("coefficient-system rank varies over the samples or disagrees with the structure rank");
  }
  return fc;
}

}  // namespace poissonkit
