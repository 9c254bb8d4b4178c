#pragma once

// Skew congruence elimination: rank of a skew-symmetric matrix by 2×2 pivot
// blocks. Each stage picks the largest remaining entry a_pq as the pivot and
// replaces every other remaining entry by
//
//   ã_kl = a_kl + (a_pl a_qk - a_pk a_ql) / a_pq,
//
// which is the result of clearing rows and columns p, q with congruent row and
// column operations. Rank is twice the number of pivots, hence always even.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "poissonkit/errors.hpp"
#include "poissonkit/linalg.hpp"
#include "poissonkit/sampling.hpp"
#include "poissonkit/structure.hpp"

namespace poissonkit {

struct EliminationStage {
  std::size_t pivot_row = 0;  // π1, original 0-based index
  std::size_t pivot_col = 0;  // π2
  double pivot = 0.0;         // a_{π1 π2} at this stage
  std::vector<std::size_t> remaining;  // original indices of the block left after the stage
  Matrix updated;                      // ã over `remaining`
};

struct EliminationTrace {
  std::vector<std::size_t> permutation;  // pivot pairs in order, then the unpivoted indices
  std::vector<std::pair<std::size_t, std::size_t>> pivots;
  std::vector<EliminationStage> stages;
  /// Accumulated row operations: transform·A·transformᵀ equals block_form().
  Matrix transform;
  double threshold = 0.0;
  std::size_t rank = 0;

  /// The normal form in original index positions: ±pivot at each pivot pair, zero elsewhere.
  Matrix block_form() const {
    const std::size_t n = transform.rows();
    Matrix b(n, n);
    for (const EliminationStage& s : stages) {
      b(s.pivot_row, s.pivot_col) = s.pivot;
      b(s.pivot_col, s.pivot_row) = -s.pivot;
    }
    return b;
  }

  /// Indices never used as a pivot; their rows of `transform` span the kernel.
  std::vector<std::size_t> unpivoted() const {
    return {permutation.begin() + static_cast<std::ptrdiff_t>(2 * pivots.size()), permutation.end()};
  }
};

/// A pivot counts as zero when |pivot| <= tol * (max |entry of a| + 1).
inline EliminationTrace skew_eliminate(const Matrix& a, double tol) {
  if (!(tol > 0.0)) throw Error("skew_eliminate: tolerance must be positive");
  if (a.rows() != a.cols()) throw Error("skew_eliminate: matrix not square");
  const std::size_t n = a.rows();
  EliminationTrace tr;
  tr.transform = Matrix::identity(n);
  tr.threshold = tol * (a.max_abs() + 1.0);

  Matrix work = a;
  std::vector<std::size_t> remaining(n);
  for (std::size_t i = 0; i < n; ++i) remaining[i] = i;

  while (remaining.size() >= 2) {
    std::size_t p = remaining[0], q = remaining[1];
    double best = -1.0;
    for (std::size_t u = 0; u < remaining.size(); ++u)
      for (std::size_t v = u + 1; v < remaining.size(); ++v) {
        const double m = std::abs(work(remaining[u], remaining[v]));
        if (m > best) {
          best = m;
          p = remaining[u];
          q = remaining[v];
        }
      }
    if (best <= tr.threshold) break;

    const double piv = work(p, q);
    std::vector<std::size_t> rest;
    for (std::size_t k : remaining)
      if (k != p && k != q) rest.push_back(k);

    for (std::size_t k : rest) {
      const double cq = work(k, q) / piv;
      const double cp = work(k, p) / piv;
      for (std::size_t c = 0; c < n; ++c)
        tr.transform(k, c) += -cq * tr.transform(p, c) + cp * tr.transform(q, c);
    }

    Matrix updated(rest.size(), rest.size());
    for (std::size_t u = 0; u < rest.size(); ++u)
      for (std::size_t v = 0; v < rest.size(); ++v) {
        if (u == v) continue;
        const std::size_t k = rest[u], l = rest[v];
        updated(u, v) = work(k, l) + (work(p, l) * work(q, k) - work(p, k) * work(q, l)) / piv;
      }
    for (std::size_t k : rest) {
      work(k, p) = work(p, k) = 0.0;
      work(k, q) = work(q, k) = 0.0;
    }
    for (std::size_t u = 0; u < rest.size(); ++u)
      for (std::size_t v = 0; v < rest.size(); ++v) work(rest[u], rest[v]) = updated(u, v);

    tr.pivots.emplace_back(p, q);
    tr.permutation.push_back(p);
    tr.permutation.push_back(q);
    tr.stages.push_back(EliminationStage{p, q, piv, rest, std::move(updated)});
    remaining = std::move(rest);
  }
  tr.permutation.insert(tr.permutation.end(), remaining.begin(), remaining.end());
  tr.rank = 2 * tr.pivots.size();
  return tr;
}

inline std::pair<std::size_t, EliminationTrace> rank_at(const StructureMatrix& J, std::span<const double> x,
                                                        double tol) {
  EliminationTrace tr = skew_eliminate(J.values(x), tol);
  const std::size_t r = tr.rank;
  return {r, std::move(tr)};
}

inline std::pair<std::size_t, EliminationTrace> rank_at(const StructureMatrix& J, const Point& p, double tol) {
  return rank_at(J, coordinates(p, J.variables()), tol);
}

struct RankReport {
  std::size_t rank = 0;  // rank at the first kept sample
  bool pass = true;      // every kept sample agrees
  std::map<std::size_t, std::size_t> histogram;  // rank -> number of samples
  std::optional<Witness> disagreement;           // first sample whose rank differs; value = its rank
  std::size_t samples_checked = 0;
};

inline RankReport verify_constant_rank(const StructureMatrix& J, const SampleDomain& dom, double tol) {
  if (!(tol > 0.0)) throw Error("verify_constant_rank: tolerance must be positive");
  RankReport rep;
  for (const Sample& s : dom.samples()) {
    const std::size_t r = skew_eliminate(J.values(s.x), tol).rank;
    if (rep.samples_checked == 0) rep.rank = r;
    ++rep.histogram[r];
    if (r != rep.rank && !rep.disagreement)
      rep.disagreement = Witness{s.index, s.x, {}, static_cast<double>(r)};
    ++rep.samples_checked;
  }
  rep.pass = rep.histogram.size() == 1;
  return rep;
}

}  // namespace poissonkit
