#pragma once

// JSON serialization of check results. Indices are 1-based in reports.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "poissonkit/casimir.hpp"
#include "poissonkit/darboux.hpp"
#include "poissonkit/elimination.hpp"
#include "poissonkit/equivalence.hpp"
#include "poissonkit/expr.hpp"
#include "poissonkit/reparam.hpp"
#include "poissonkit/sampling.hpp"

namespace poissonkit::cli {

using json = nlohmann::ordered_json;

inline std::vector<std::size_t> one_based(const std::vector<std::size_t>& idx) {
  std::vector<std::size_t> out(idx);
  for (std::size_t& i : out) ++i;
  return out;
}

/// Non-finite doubles become strings so the document stays valid JSON.
inline json number(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

inline json witness_json(const Witness& w, std::uint64_t seed) {
  json j;
  j["seed"] = seed;
  j["sample_index"] = w.sample_index;
  j["point"] = w.point;
  if (!w.indices.empty()) j["indices"] = one_based(w.indices);
  j["value"] = number(w.value);
  return j;
}

inline json residual_json(const ResidualReport& r, std::uint64_t seed) {
  json j;
  j["check"] = r.check;
  j["pass"] = r.pass;
  j["tolerance"] = r.tolerance;
  j["max_abs"] = number(r.max_abs);
  j["samples_checked"] = r.samples_checked;
  j["witness"] = r.worst ? witness_json(*r.worst, seed) : json(nullptr);
  return j;
}

inline json rank_json(const RankReport& r, std::uint64_t seed) {
  json j;
  j["check"] = "constant_rank";
  j["pass"] = r.pass;
  j["rank"] = r.rank;
  json hist = json::object();
  for (const auto& [rank, count] : r.histogram) hist[std::to_string(rank)] = count;
  j["histogram"] = hist;
  j["samples_checked"] = r.samples_checked;
  j["witness"] = r.disagreement ? witness_json(*r.disagreement, seed) : json(nullptr);
  return j;
}

inline json casimir_json(const Expr& D, const CasimirReport& c, std::uint64_t seed) {
  json j = residual_json(c.residual, seed);
  j["casimir"] = render(D);
  j["symbolic_zero"] = c.symbolic_zero;
  return j;
}

inline json factor_json(const Expr& eta, const FactorReport& f, std::uint64_t seed) {
  json j;
  j["candidate"] = render(eta);
  j["pass"] = f.pass;
  j["nonvanishing"] = f.nonvanishing;
  j["min_abs_eta"] = number(f.min_abs_eta);
  j["factor_residual"] = residual_json(f.factor, seed);
  j["scaled_jacobi"] = residual_json(f.product, seed);
  j["checks_agree"] = f.agree;
  j["decomposition_mismatch"] = number(f.decomposition_mismatch);
  return j;
}

inline json classification_json(const FactorClassification& c, std::uint64_t seed) {
  json j;
  j["verdict"] = to_string(c.verdict);
  j["tolerance"] = c.tolerance;
  j["max_abs_xi"] = number(c.max_abs_xi);
  j["xi_witness"] = c.xi_witness ? witness_json(*c.xi_witness, seed) : json(nullptr);
  j["coefficient_rank"] = {{"min", c.min_coefficient_rank}, {"max", c.max_coefficient_rank}};
  j["structure_rank"] = rank_json(c.structure_rank, seed);
  j["notes"] = c.notes;
  return j;
}

inline json range_json(const Range& r) { return {{"min", number(r.lo)}, {"max", number(r.hi)}}; }

inline json expr_matrix_json(const std::vector<std::vector<Expr>>& m) {
  json rows = json::array();
  for (const auto& row : m) {
    json r = json::array();
    for (const Expr& e : row) r.push_back(render(e));
    rows.push_back(r);
  }
  return rows;
}

inline json chart_json(const DarbouxChart& ch) {
  json j;
  json fwd = json::array();
  for (const Expr& e : ch.forward) fwd.push_back(render(e));
  j["forward_map"] = fwd;
  j["jacobian_M"] = expr_matrix_json(ch.M);
  j["eta"] = render(ch.eta);
  if (ch.eta_y) j["eta_y"] = render(*ch.eta_y);
  j["jstar"] = expr_matrix_json(ch.jstar);
  if (ch.jstar_y) j["jstar_y"] = expr_matrix_json(*ch.jstar_y);
  const ChartDiagnostics& d = ch.diagnostics;
  json diag;
  diag["det_M"] = range_json(d.det_m);
  diag["eta"] = range_json(d.eta);
  diag["off_block_max"] = number(d.off_block_max);
  diag["diagonal_max"] = number(d.diagonal_max);
  diag["bracket_mismatch"] = number(d.bracket_mismatch);
  if (ch.inverse_map) diag["inverse_mismatch"] = number(d.inverse_mismatch);
  diag["jstar_rank"] = {{"min", d.jstar_rank_min}, {"max", d.jstar_rank_max}};
  diag["samples_checked"] = d.samples_checked;
  j["diagnostics"] = diag;
  json hyp = json::array();
  for (const Hypothesis& h : d.hypotheses)
    hyp.push_back({{"name", h.name}, {"status", h.checked ? "checked" : "assumed"}, {"detail", h.detail}});
  j["hypotheses"] = hyp;
  return j;
}

inline json equivalence_json(const EquivalenceReport& r, bool darboux) {
  json j;
  j["pass"] = r.pass;
  j["tolerance"] = r.tolerance;
  j["max_discrepancy"] = number(r.max_discrepancy);
  j["worst_t"] = r.worst_t;
  j["worst_tau"] = r.worst_tau;
  j["tau_final"] = r.tau_final;
  j["eta_along_trajectory"] = range_json(r.eta);
  j["original_steps"] = r.original_steps;
  j["transformed_steps"] = r.transformed_steps;
  if (darboux) {
    j["casimir_coordinate_drift"] = number(r.frozen_drift);
    j["casimir_coordinate_rhs_max"] = number(r.frozen_rhs);
    j["box_exit_time"] = r.box_exit_time ? json(*r.box_exit_time) : json(nullptr);
  }
  return j;
}

}  // namespace poissonkit::cli
