#pragma once

// Command-line front end. Exit codes: 0 every check passed, 1 a verification
// failed, 2 usage or input error.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "poissonkit/casimir.hpp"
#include "poissonkit/catalog.hpp"
#include "poissonkit/cli/model.hpp"
#include "poissonkit/cli/report.hpp"
#include "poissonkit/darboux.hpp"
#include "poissonkit/elimination.hpp"
#include "poissonkit/equivalence.hpp"
#include "poissonkit/odeint.hpp"
#include "poissonkit/reparam.hpp"
#include "poissonkit/structure.hpp"

namespace poissonkit::cli {

enum ExitCode : int { kPass = 0, kFail = 1, kUsage = 2 };

struct CommonOptions {
  std::string model_path;
  std::string report_path;
  std::optional<double> tol;
  std::optional<std::size_t> samples;
  std::optional<std::uint64_t> seed;
};

struct SimulateOptions {
  std::string csv_path;
  std::string compare;  // "", "reparam" or "darboux"
};

/// Input problem detected while running a command; maps to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline const char* verdict_word(bool pass) { return pass ? "PASS" : "FAIL"; }

class Session {
 public:
  Session(std::string command, const CommonOptions& opt, std::ostream& out)
      : command_(std::move(command)), opt_(opt), out_(out), start_(std::chrono::steady_clock::now()) {
    file_ = load_model_file(opt.model_path);
    model_ = compile(file_, opt.samples, opt.seed);
    tol_ = opt.tol.value_or(file_.tolerance);
    if (!(tol_ > 0.0)) throw UsageError("--tol must be positive");
    report_["command"] = command_;
    report_["model"] = file_.name;
    report_["dimension"] = file_.dimension;
    report_["sampling"] = {{"count", model_.domain.count()},
                           {"seed", model_.domain.seed()},
                           {"kept", model_.domain.samples().size()}};
    report_["tolerance"] = tol_;
  }

  const Model& model() const { return model_; }
  const ModelFile& file() const { return file_; }
  double tol() const { return tol_; }
  std::uint64_t seed() const { return model_.domain.seed(); }
  json& report() { return report_; }
  std::ostream& out() { return out_; }

  int finish(bool pass) {
    report_["pass"] = pass;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    report_["volatile"] = {{"elapsed_seconds", secs}};
    out_ << command_ << " " << file_.name << ": " << verdict_word(pass) << "\n";
    if (!opt_.report_path.empty()) {
      std::ofstream f(opt_.report_path);
      if (!f) throw UsageError("cannot write report to '" + opt_.report_path + "'");
      f << report_.dump(2) << "\n";
    }
    return pass ? kPass : kFail;
  }

 private:
  std::string command_;
  const CommonOptions& opt_;
  std::ostream& out_;
  std::chrono::steady_clock::time_point start_;
  ModelFile file_;
  Model model_;
  double tol_ = 0.0;
  json report_;
};

inline std::string fmt(double v) { return poissonkit::detail::format_number(v); }

}  // namespace detail

inline int cmd_verify(const CommonOptions& opt, std::ostream& out) {
  detail::Session s("verify", opt, out);
  const Model& m = s.model();
  json checks = json::array();
  bool pass = true;

  const ResidualReport jac = verify_jacobi(m.J, m.domain, s.tol());
  checks.push_back(residual_json(jac, s.seed()));
  pass = pass && jac.pass;
  out << "  jacobi: " << detail::verdict_word(jac.pass) << " (max |residual| " << detail::fmt(jac.max_abs) << ")\n";

  const RankReport rank = verify_constant_rank(m.J, m.domain, s.tol());
  checks.push_back(rank_json(rank, s.seed()));
  pass = pass && rank.pass;
  out << "  rank: " << detail::verdict_word(rank.pass) << " (rank " << rank.rank << ")\n";

  for (const Expr& D : m.casimirs) {
    const CasimirReport c = is_casimir(m.J, D, m.domain, s.tol());
    checks.push_back(casimir_json(D, c, s.seed()));
    pass = pass && c.pass();
    out << "  casimir " << render(D) << ": " << detail::verdict_word(c.pass()) << "\n";
  }
  s.report()["checks"] = checks;
  return s.finish(pass);
}

inline int cmd_reparam(const std::string& sub, const CommonOptions& opt, std::ostream& out) {
  detail::Session s("reparam " + sub, opt, out);
  const Model& m = s.model();
  bool pass = true;

  if (sub == "check") {
    if (m.reparam.empty()) throw UsageError("model has no reparam candidates");
    json cands = json::array();
    for (const Expr& eta : m.reparam) {
      const FactorReport f = check_factor(m.J, eta, m.domain, s.tol());
      cands.push_back(factor_json(eta, f, s.seed()));
      pass = pass && f.pass;
      out << "  candidate " << render(eta) << ": " << detail::verdict_word(f.pass);
      if (!f.pass && f.product.worst) {
        const auto idx = one_based(f.product.worst->indices);
        out << " (witness (" << idx[0] << "," << idx[1] << "," << idx[2] << "), sample "
            << f.product.worst->sample_index << ")";
      }
      out << "\n";
    }
    s.report()["candidates"] = cands;
  } else if (sub == "family1") {
    if (m.casimirs.empty()) throw UsageError("family1 needs a nonempty casimirs section");
    json fam = json::array();
    for (const Expr& D : m.casimirs)
      for (Family1Mode mode : {Family1Mode::Exp, Family1Mode::OnePlusSquare}) {
        json entry;
        entry["casimir"] = render(D);
        entry["mode"] = to_string(mode);
        try {
          const ReparamCandidate c = family1_factor(m.J, D, mode, m.domain, s.tol());
          const FactorReport f = check_factor(m.J, c.eta, m.domain, s.tol());
          entry["result"] = factor_json(c.eta, f, s.seed());
          pass = pass && f.pass;
          out << "  " << to_string(mode) << " of " << render(D) << ": " << detail::verdict_word(f.pass) << "\n";
        } catch (const FactorError& e) {
          entry["error"] = e.what();
          pass = false;
          out << "  " << to_string(mode) << " of " << render(D) << ": FAIL (" << e.what() << ")\n";
        }
        fam.push_back(entry);
      }
    s.report()["family1"] = fam;
  } else if (sub != "classify") {
    throw UsageError("unknown reparam subcommand '" + sub + "'");
  }

  const FactorClassification c = classify(m.J, m.domain, s.tol());
  s.report()["classification"] = classification_json(c, s.seed());
  out << "  classification: " << to_string(c.verdict) << "\n";
  return s.finish(pass);
}

inline int cmd_darboux(const CommonOptions& opt, std::ostream& out) {
  detail::Session s("darboux", opt, out);
  const Model& m = s.model();
  if (!m.darboux) throw UsageError("model has no darboux section");
  if (!s.file().casimirs) throw UsageError("darboux needs a casimirs section");

  DarbouxChart ch;
  try {
    ch = build_chart(*m.darboux, s.tol());
  } catch (const HypothesisError& e) {
    json err;
    err["condition"] = to_string(e.condition());
    err["message"] = e.what();
    err["sample_index"] = e.sample_index() ? json(*e.sample_index()) : json(nullptr);
    s.report()["chart_error"] = err;
    out << "  " << e.what() << "\n";
    return s.finish(false);
  }
  s.report()["chart"] = chart_json(ch);
  const ResidualReport canon = verify_canonical(ch, s.tol());
  s.report()["canonical"] = residual_json(canon, s.seed());
  out << "  eta = " << render(ch.eta) << "\n";
  out << "  canonical form: " << detail::verdict_word(canon.pass) << " (max |J*/eta - S2+0| "
      << detail::fmt(canon.max_abs) << ")\n";

  if (m.hamiltonian) {
    json red;
    if (ch.inverse_map) {
      const ReducedSystem rs = reduce_hamiltonian(ch, *m.hamiltonian, true);
      red["mode"] = "symbolic";
      red["hstar"] = render(*rs.hstar);
      json rhs = json::array();
      for (const Expr& e : rs.rhs) rhs.push_back(render(e));
      red["rhs"] = rhs;
      out << "  H* = " << render(*rs.hstar) << "\n";
    } else {
      red["mode"] = "numeric";
      red["note"] = "no inverse map; the reduced field is evaluated through Newton inversion of y(x)";
    }
    s.report()["reduction"] = red;
  }
  return s.finish(canon.pass);
}

inline int cmd_simulate(const CommonOptions& opt, const SimulateOptions& sim, std::ostream& out) {
  detail::Session s("simulate", opt, out);
  const Model& m = s.model();
  if (!s.file().simulate) throw UsageError("model has no simulate section");
  if (!m.hamiltonian) throw UsageError("simulate needs a hamiltonian");
  if (!sim.compare.empty() && sim.compare != "reparam" && sim.compare != "darboux")
    throw UsageError("--compare must be 'reparam' or 'darboux'");
  const SimulateSpec& spec = *s.file().simulate;
  if (!m.domain.contains(spec.x0)) throw UsageError("simulate.x0 lies outside the model domain");

  IntegratorConfig cfg;
  cfg.method = spec.method;
  cfg.step = spec.step;
  cfg.abs_tol = spec.abs_tol;
  cfg.rel_tol = spec.rel_tol;

  json& rep = s.report();
  json integ;
  integ["method"] = to_string(cfg.method);
  if (cfg.method == Method::RK4) {
    integ["step"] = cfg.step;
  } else {
    integ["abs_tol"] = cfg.abs_tol;
    integ["rel_tol"] = cfg.rel_tol;
  }
  integ["x0"] = spec.x0;
  integ["t_end"] = spec.t_end;

  const ExprField field(system_rhs(m.J, *m.hamiltonian), m.J.variables());
  Trajectory tr;
  try {
    tr = integrate(VectorField(field), spec.x0, spec.t_end, cfg);
  } catch (const IntegrationError& e) {
    integ["error"] = {{"message", e.what()}, {"time", e.time()}, {"state", e.state()}};
    rep["integration"] = integ;
    out << "  " << e.what() << "\n";
    return s.finish(false);
  }
  integ["accepted_steps"] = tr.accepted;
  integ["rejected_steps"] = tr.rejected;
  integ["final_state"] = tr.back();
  rep["integration"] = integ;

  if (!sim.csv_path.empty()) {
    std::ofstream f(sim.csv_path);
    if (!f) throw UsageError("cannot write CSV to '" + sim.csv_path + "'");
    write_csv(f, tr, m.J.variables());
  }

  bool pass = true;
  json drift = json::array();
  auto add_drift = [&](const std::string& what, const Expr& f) {
    const double d = conserved_drift(tr, f, m.J.variables());
    const bool ok = d <= spec.drift_tol;
    pass = pass && ok;
    drift.push_back({{"quantity", what}, {"expression", render(f)}, {"drift", d}, {"tolerance", spec.drift_tol},
                     {"pass", ok}});
    out << "  drift of " << what << ": " << detail::fmt(d) << " " << detail::verdict_word(ok) << "\n";
  };
  add_drift("hamiltonian", *m.hamiltonian);
  for (std::size_t c = 0; c < m.casimirs.size(); ++c) add_drift("casimir " + std::to_string(c + 1), m.casimirs[c]);
  rep["drift"] = drift;

  if (!sim.compare.empty()) {
    const double t_cmp = spec.compare_t_end.value_or(spec.t_end);
    json cmp;
    cmp["mode"] = sim.compare;
    cmp["t_end"] = t_cmp;
    try {
      if (sim.compare == "reparam") {
        if (m.reparam.empty()) throw UsageError("--compare reparam needs a reparam candidate in the model");
        cmp["eta"] = render(m.reparam.front());
        const EquivalenceReport e =
            reparam_equivalence(m.J, *m.hamiltonian, m.reparam.front(), spec.x0, t_cmp, cfg, spec.compare_tol);
        cmp["result"] = equivalence_json(e, false);
        pass = pass && e.pass;
        out << "  reparam equivalence: " << detail::verdict_word(e.pass) << " (max discrepancy "
            << detail::fmt(e.max_discrepancy) << ")\n";
      } else {
        if (!m.darboux) throw UsageError("--compare darboux needs a darboux section in the model");
        const DarbouxChart ch = build_chart(*m.darboux, s.tol());
        const EquivalenceReport e = darboux_equivalence(ch, *m.hamiltonian, spec.x0, t_cmp, cfg, spec.compare_tol);
        cmp["result"] = equivalence_json(e, true);
        pass = pass && e.pass;
        out << "  darboux equivalence: " << detail::verdict_word(e.pass) << " (max discrepancy "
            << detail::fmt(e.max_discrepancy) << ")\n";
        if (e.box_exit_time) out << "  warning: trajectory leaves the domain box at t = " << detail::fmt(*e.box_exit_time) << "\n";
      }
    } catch (const IntegrationError& e) {
      cmp["error"] = {{"message", e.what()}, {"time", e.time()}, {"state", e.state()}};
      pass = false;
      out << "  " << e.what() << "\n";
    } catch (const HypothesisError& e) {
      cmp["error"] = {{"message", e.what()}, {"condition", to_string(e.condition())}};
      pass = false;
      out << "  " << e.what() << "\n";
    }
    rep["compare"] = cmp;
  }
  return s.finish(pass);
}

inline int cmd_export(const std::string& name, const std::string& out_path, bool list, std::ostream& out) {
  if (list) {
    for (const CatalogEntry& e : catalog()) out << e.name << "\n";
    return kPass;
  }
  const auto entry = find_entry(name);
  if (!entry) throw UsageError("no catalog entry named '" + name + "'");
  const std::string text = to_json(model_from_entry(*entry)).dump(2) + "\n";
  if (out_path.empty()) {
    out << text;
  } else {
    std::ofstream f(out_path);
    if (!f) throw UsageError("cannot write '" + out_path + "'");
    f << text;
  }
  return kPass;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Poisson structure toolkit: Jacobi checks, reparametrization factors, Darboux reduction"};
  app.require_subcommand(1);
  CommonOptions opt;
  SimulateOptions sim;
  auto add_common = [&opt](CLI::App* c) {
    c->add_option("MODEL_PATH", opt.model_path, "model JSON file")->required();
    c->add_option("--report", opt.report_path, "write the JSON report here");
    c->add_option("--tol", opt.tol, "tolerance (overrides the model)");
    c->add_option("--samples", opt.samples, "sample count (overrides the model)");
    c->add_option("--seed", opt.seed, "sampling seed (overrides the model)");
  };

  CLI::App* verify = app.add_subcommand("verify", "Jacobi identities, constant rank and Casimirs");
  add_common(verify);

  CLI::App* reparam = app.add_subcommand("reparam", "reparametrization factors");
  reparam->require_subcommand(1);
  CLI::App* r_check = reparam->add_subcommand("check", "check the model's candidate factors");
  CLI::App* r_family = reparam->add_subcommand("family1", "factors built from each Casimir");
  CLI::App* r_classify = reparam->add_subcommand("classify", "which factors the structure admits");
  for (CLI::App* c : {r_check, r_family, r_classify}) add_common(c);

  CLI::App* darboux = app.add_subcommand("darboux", "global Darboux chart of a rank-two structure");
  add_common(darboux);

  CLI::App* simulate = app.add_subcommand("simulate", "integrate the Poisson system");
  add_common(simulate);
  simulate->add_option("--csv", sim.csv_path, "trajectory CSV output");
  simulate->add_option("--compare", sim.compare, "also run an equivalence check")
      ->check(CLI::IsMember({"reparam", "darboux"}));

  std::string export_name, export_out;
  bool export_list = false;
  CLI::App* exp = app.add_subcommand("export", "write a catalog entry as a model file");
  exp->add_option("NAME", export_name, "catalog entry");
  exp->add_option("--out", export_out, "output path (default: standard output)");
  exp->add_flag("--list", export_list, "list catalog entries");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kPass;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return kUsage;
  }

  try {
    if (verify->parsed()) return cmd_verify(opt, out);
    if (r_check->parsed()) return cmd_reparam("check", opt, out);
    if (r_family->parsed()) return cmd_reparam("family1", opt, out);
    if (r_classify->parsed()) return cmd_reparam("classify", opt, out);
    if (darboux->parsed()) return cmd_darboux(opt, out);
    if (simulate->parsed()) return cmd_simulate(opt, sim, out);
    if (exp->parsed()) {
      if (!export_list && export_name.empty()) throw UsageError("export needs NAME or --list");
      return cmd_export(export_name, export_out, export_list, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace poissonkit::cli
