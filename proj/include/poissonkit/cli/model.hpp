#pragma once

// Model files: JSON documents describing a structure matrix, its Hamiltonian,
// Casimirs, sampling domain and optional reparametrization, Darboux and
// simulation sections. Matrix keys are 1-based "i,j" with i < j.

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "poissonkit/catalog.hpp"
#include "poissonkit/darboux.hpp"
#include "poissonkit/errors.hpp"
#include "poissonkit/expr.hpp"
#include "poissonkit/odeint.hpp"
#include "poissonkit/parse.hpp"
#include "poissonkit/sampling.hpp"
#include "poissonkit/structure.hpp"

namespace poissonkit::cli {

using json = nlohmann::ordered_json;

/// Malformed or inconsistent model document.
class SchemaError : public Error {
 public:
  using Error::Error;
};

struct DarbouxSpec {
  std::string d1;
  std::string d2;
  std::optional<std::vector<std::string>> inverse;  // x1..xn in terms of y1..yn
};

struct SimulateSpec {
  std::vector<double> x0;
  double t_end = 10.0;
  Method method = Method::RK4;
  double step = 1e-3;
  double abs_tol = 1e-9;
  double rel_tol = 1e-9;
  double drift_tol = 1e-6;
  double compare_tol = 1e-4;
  std::optional<double> compare_t_end;
};

struct ModelFile {
  std::string name;
  std::size_t dimension = 0;
  VariableList variables;
  std::map<std::pair<std::size_t, std::size_t>, std::string> matrix;  // 0-based (i, j), i < j
  std::optional<std::string> hamiltonian;
  std::optional<std::vector<std::string>> casimirs;
  std::vector<Interval> intervals;
  std::optional<std::string> exclusion;
  std::size_t sample_count = 200;
  std::uint64_t seed = 42;
  double tolerance = 1e-9;
  std::vector<std::string> reparam;
  std::optional<DarbouxSpec> darboux;
  std::optional<SimulateSpec> simulate;
};

namespace detail {

inline const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw SchemaError(where + ": missing required field '" + key + "'");
  return j.at(key);
}

template <class T>
T get_as(const json& j, const std::string& where) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw SchemaError(where + ": wrong type");
  }
}

inline double get_number(const json& j, const std::string& where) {
  if (!j.is_number()) throw SchemaError(where + ": expected a number");
  return j.get<double>();
}

inline std::string get_string(const json& j, const std::string& where) {
  if (!j.is_string()) throw SchemaError(where + ": expected a string");
  return j.get<std::string>();
}

inline std::vector<std::string> get_strings(const json& j, const std::string& where) {
  if (!j.is_array()) throw SchemaError(where + ": expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_string(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

inline std::vector<double> get_numbers(const json& j, const std::string& where) {
  if (!j.is_array()) throw SchemaError(where + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_number(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

inline void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || item.key() == a;
    if (!ok) throw SchemaError(where + ": unknown field '" + item.key() + "'");
  }
}

inline std::size_t get_count(const json& j, const std::string& where) {
  if (!j.is_number_integer() || j.get<long long>() < 1) throw SchemaError(where + ": expected a positive integer");
  return j.get<std::size_t>();
}

inline Method method_from(const std::string& s, const std::string& where) {
  if (s == "rk4") return Method::RK4;
  if (s == "rk45") return Method::RK45;
  throw SchemaError(where + ": method must be \"rk4\" or \"rk45\"");
}

}  // namespace detail

inline ModelFile model_from_json(const json& doc) {
  using namespace detail;
  if (!doc.is_object()) throw SchemaError("model: expected a JSON object");
  reject_unknown(doc,
                 {"name", "dimension", "variables", "matrix", "hamiltonian", "casimirs", "domain", "sampling",
                  "tolerance", "reparam", "darboux", "simulate"},
                 "model");
  ModelFile m;
  m.name = get_string(require(doc, "name", "model"), "name");
  const json& dim = require(doc, "dimension", "model");
  if (!dim.is_number_integer() || dim.get<long long>() < 2) throw SchemaError("dimension: expected an integer >= 2");
  m.dimension = dim.get<std::size_t>();
  const std::size_t n = m.dimension;

  m.variables = doc.contains("variables") ? get_strings(doc["variables"], "variables") : default_variables(n);
  if (m.variables.size() != n) throw SchemaError("variables: expected " + std::to_string(n) + " names");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = i + 1; k < n; ++k)
      if (m.variables[i] == m.variables[k]) throw SchemaError("variables: duplicate name '" + m.variables[i] + "'");

  const json& mat = require(doc, "matrix", "model");
  if (!mat.is_object()) throw SchemaError("matrix: expected an object of \"i,j\": expression");
  for (const auto& item : mat.items()) {
    const std::string& key = item.key();
    std::size_t i = 0, j = 0;
    char comma = 0;
    std::istringstream ks(key);
    if (!(ks >> i >> comma >> j) || comma != ',' || !ks.eof())
      throw SchemaError("matrix: key '" + key + "' is not of the form \"i,j\"");
    if (!(1 <= i && i < j && j <= n)) throw SchemaError("matrix: key '" + key + "' needs 1 <= i < j <= n");
    m.matrix[{i - 1, j - 1}] = get_string(item.value(), "matrix " + key);
  }

  if (doc.contains("hamiltonian")) m.hamiltonian = get_string(doc["hamiltonian"], "hamiltonian");
  if (doc.contains("casimirs")) m.casimirs = get_strings(doc["casimirs"], "casimirs");

  const json& domain = require(doc, "domain", "model");
  if (!domain.is_object()) throw SchemaError("domain: expected an object");
  reject_unknown(domain, {"intervals", "exclusion"}, "domain");
  const json& ivs = require(domain, "intervals", "domain");
  if (!ivs.is_array() || ivs.size() != n) throw SchemaError("domain.intervals: expected " + std::to_string(n) + " intervals");
  for (std::size_t i = 0; i < n; ++i) {
    const auto lohi = get_numbers(ivs[i], "domain.intervals[" + std::to_string(i) + "]");
    if (lohi.size() != 2 || !(lohi[0] < lohi[1]))
      throw SchemaError("domain.intervals[" + std::to_string(i) + "]: expected [lo, hi] with lo < hi");
    m.intervals.push_back({lohi[0], lohi[1]});
  }
  if (domain.contains("exclusion")) m.exclusion = get_string(domain["exclusion"], "domain.exclusion");

  if (doc.contains("sampling")) {
    const json& s = doc["sampling"];
    if (!s.is_object()) throw SchemaError("sampling: expected an object");
    reject_unknown(s, {"count", "seed"}, "sampling");
    if (s.contains("count")) m.sample_count = get_count(s["count"], "sampling.count");
    if (s.contains("seed")) {
      if (!s["seed"].is_number_unsigned()) throw SchemaError("sampling.seed: expected a nonnegative integer");
      m.seed = s["seed"].get<std::uint64_t>();
    }
  }
  if (doc.contains("tolerance")) {
    m.tolerance = get_number(doc["tolerance"], "tolerance");
    if (!(m.tolerance > 0.0)) throw SchemaError("tolerance: must be positive");
  }
  if (doc.contains("reparam")) m.reparam = get_strings(doc["reparam"], "reparam");

  if (doc.contains("darboux")) {
    const json& d = doc["darboux"];
    if (!d.is_object()) throw SchemaError("darboux: expected an object");
    reject_unknown(d, {"d1", "d2", "inverse"}, "darboux");
    DarbouxSpec ds;
    ds.d1 = get_string(require(d, "d1", "darboux"), "darboux.d1");
    ds.d2 = get_string(require(d, "d2", "darboux"), "darboux.d2");
    if (d.contains("inverse")) {
      ds.inverse = get_strings(d["inverse"], "darboux.inverse");
      if (ds.inverse->size() != n) throw SchemaError("darboux.inverse: expected " + std::to_string(n) + " expressions");
    }
    m.darboux = std::move(ds);
  }

  if (doc.contains("simulate")) {
    const json& s = doc["simulate"];
    if (!s.is_object()) throw SchemaError("simulate: expected an object");
    reject_unknown(s, {"x0", "t_end", "method", "step", "abs_tol", "rel_tol", "drift_tol", "compare_tol", "compare_t_end"},
                   "simulate");
    SimulateSpec ss;
    ss.x0 = get_numbers(require(s, "x0", "simulate"), "simulate.x0");
    if (ss.x0.size() != n) throw SchemaError("simulate.x0: expected " + std::to_string(n) + " values");
    ss.t_end = get_number(require(s, "t_end", "simulate"), "simulate.t_end");
    if (!(ss.t_end > 0.0)) throw SchemaError("simulate.t_end: must be positive");
    if (s.contains("method")) ss.method = method_from(get_string(s["method"], "simulate.method"), "simulate.method");
    auto positive = [&s](const char* key, double& out) {
      if (!s.contains(key)) return;
      out = get_number(s[key], std::string("simulate.") + key);
      if (!(out > 0.0)) throw SchemaError(std::string("simulate.") + key + ": must be positive");
    };
    positive("step", ss.step);
    positive("abs_tol", ss.abs_tol);
    positive("rel_tol", ss.rel_tol);
    positive("drift_tol", ss.drift_tol);
    positive("compare_tol", ss.compare_tol);
    if (s.contains("compare_t_end")) {
      double v = 0.0;
      positive("compare_t_end", v);
      ss.compare_t_end = v;
    }
    m.simulate = std::move(ss);
  }
  return m;
}

inline json to_json(const ModelFile& m) {
  json doc;
  doc["name"] = m.name;
  doc["dimension"] = m.dimension;
  doc["variables"] = m.variables;
  json mat = json::object();
  for (const auto& [ij, e] : m.matrix) mat[std::to_string(ij.first + 1) + "," + std::to_string(ij.second + 1)] = e;
  doc["matrix"] = mat;
  if (m.hamiltonian) doc["hamiltonian"] = *m.hamiltonian;
  if (m.casimirs) doc["casimirs"] = *m.casimirs;
  json dom;
  json ivs = json::array();
  for (const Interval& iv : m.intervals) ivs.push_back({iv.lo, iv.hi});
  dom["intervals"] = ivs;
  if (m.exclusion) dom["exclusion"] = *m.exclusion;
  doc["domain"] = dom;
  doc["sampling"] = {{"count", m.sample_count}, {"seed", m.seed}};
  doc["tolerance"] = m.tolerance;
  if (!m.reparam.empty()) doc["reparam"] = m.reparam;
  if (m.darboux) {
    json d;
    d["d1"] = m.darboux->d1;
    d["d2"] = m.darboux->d2;
    if (m.darboux->inverse) d["inverse"] = *m.darboux->inverse;
    doc["darboux"] = d;
  }
  if (m.simulate) {
    const SimulateSpec& s = *m.simulate;
    json j;
    j["x0"] = s.x0;
    j["t_end"] = s.t_end;
    j["method"] = to_string(s.method);
    j["step"] = s.step;
    j["abs_tol"] = s.abs_tol;
    j["rel_tol"] = s.rel_tol;
    j["drift_tol"] = s.drift_tol;
    j["compare_tol"] = s.compare_tol;
    if (s.compare_t_end) j["compare_t_end"] = *s.compare_t_end;
    doc["simulate"] = j;
  }
  return doc;
}

inline ModelFile load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open model file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("model file '" + path + "' is not valid JSON: " + e.what());
  }
  return model_from_json(doc);
}

/// Parsed expressions and derived objects for a model file.
struct Model {
  ModelFile file;
  StructureMatrix J;
  std::optional<Expr> hamiltonian;
  std::vector<Expr> casimirs;
  SampleDomain domain;
  std::vector<Expr> reparam;
  std::optional<DarbouxInput> darboux;
};

namespace detail {

inline Expr parse_field(const std::string& text, const VariableList& vars, const std::string& where) {
  try {
    return parse(text, vars);
  } catch (const ParseError& e) {
    throw SchemaError(where + ": " + e.what());
  } catch (const UndeclaredVariable& e) {
    throw SchemaError(where + ": " + e.what());
  }
}

}  // namespace detail

/// Sampling count and seed may be overridden from the command line.
inline Model compile(const ModelFile& f, std::optional<std::size_t> samples = {}, std::optional<std::uint64_t> seed = {}) {
  Model m;
  m.file = f;
  std::map<std::pair<std::size_t, std::size_t>, Expr> entries;
  for (const auto& [ij, text] : f.matrix)
    entries[ij] = detail::parse_field(text, f.variables,
                                      "matrix " + std::to_string(ij.first + 1) + "," + std::to_string(ij.second + 1));
  m.J = StructureMatrix::from_entries(f.name, f.variables, entries);
  if (f.hamiltonian) m.hamiltonian = detail::parse_field(*f.hamiltonian, f.variables, "hamiltonian");
  if (f.casimirs)
    for (std::size_t c = 0; c < f.casimirs->size(); ++c)
      m.casimirs.push_back(detail::parse_field((*f.casimirs)[c], f.variables, "casimirs[" + std::to_string(c) + "]"));
  std::optional<Expr> excl;
  if (f.exclusion) excl = detail::parse_field(*f.exclusion, f.variables, "domain.exclusion");
  m.domain = SampleDomain(f.intervals, samples.value_or(f.sample_count), seed.value_or(f.seed), excl);
  for (std::size_t r = 0; r < f.reparam.size(); ++r)
    m.reparam.push_back(detail::parse_field(f.reparam[r], f.variables, "reparam[" + std::to_string(r) + "]"));
  if (f.darboux) {
    DarbouxInput in;
    in.J = m.J;
    in.casimirs = m.casimirs;
    in.d1 = detail::parse_field(f.darboux->d1, f.variables, "darboux.d1");
    in.d2 = detail::parse_field(f.darboux->d2, f.variables, "darboux.d2");
    in.dom = m.domain;
    in.y_vars = default_y_variables(f.dimension);
    if (f.darboux->inverse) {
      std::vector<Expr> inv;
      for (std::size_t i = 0; i < f.darboux->inverse->size(); ++i)
        inv.push_back(
            detail::parse_field((*f.darboux->inverse)[i], in.y_vars, "darboux.inverse[" + std::to_string(i) + "]"));
      in.inverse_map = std::move(inv);
    }
    m.darboux = std::move(in);
  }
  return m;
}

/// Model file for a catalog entry.
inline ModelFile model_from_entry(const CatalogEntry& e) {
  ModelFile m;
  m.name = e.name;
  m.dimension = e.dim();
  m.variables = e.J.variables();
  for (std::size_t i = 0; i < e.dim(); ++i)
    for (std::size_t j = i + 1; j < e.dim(); ++j) {
      const Expr v = e.J.entry(i, j);
      if (!v.is_constant(0.0)) m.matrix[{i, j}] = render(v);
    }
  m.hamiltonian = render(e.hamiltonian);
  std::vector<std::string> cs;
  for (const Expr& c : e.casimirs) cs.push_back(render(c));
  m.casimirs = cs;
  m.intervals = e.domain.box();
  if (e.domain.exclusion()) m.exclusion = render(*e.domain.exclusion());
  m.sample_count = e.domain.count();
  m.seed = e.domain.seed();
  for (const Expr& r : e.reparam_candidates) m.reparam.push_back(render(r));
  if (e.darboux) {
    DarbouxSpec d{render(e.darboux->d1), render(e.darboux->d2), std::nullopt};
    if (e.darboux->inverse_map) {
      std::vector<std::string> inv;
      for (const Expr& x : *e.darboux->inverse_map) inv.push_back(render(x));
      d.inverse = inv;
    }
    m.darboux = d;
  }
  if (e.initial_state) {
    SimulateSpec s;
    s.x0 = *e.initial_state;
    m.simulate = s;
  }
  return m;
}

}  // namespace poissonkit::cli
