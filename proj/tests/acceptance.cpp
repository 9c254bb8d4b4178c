// Acceptance harness: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance <cli> <models-dir> <golden-dir>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oracle.hpp"
#include "poissonkit/catalog.hpp"
#include "poissonkit/equivalence.hpp"
#include "poissonkit/parse.hpp"
#include "support.hpp"

using namespace poissonkit;
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

/// Collects the first failure message of a criterion.
struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

std::string num(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

std::vector<CatalogEntry> rank2_entries() {
  std::vector<CatalogEntry> out;
  for (CatalogEntry& e : catalog())
    if (e.rank == 2) out.push_back(std::move(e));
  return out;
}

double det3(const Matrix& m) {
  return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
         m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
}

double det4(const Matrix& a) {
  double d = 0.0;
  for (std::size_t c = 0; c < 4; ++c) {
    Matrix minor(3, 3);
    for (std::size_t r = 1; r < 4; ++r)
      for (std::size_t k = 0, m = 0; k < 4; ++k)
        if (k != c) minor(r - 1, m++) = a(r, k);
    d += (c % 2 ? -1.0 : 1.0) * a(0, c) * det3(minor);
  }
  return d;
}

Outcome jacobi_verification() {
  Outcome o;
  const CatalogEntry e = euler_top();
  const ResidualReport r = verify_jacobi(e.J, e.domain, 1e-10);
  o.require(r.pass && r.samples_checked == 200, "euler_top residual " + num(r.max_abs));

  testsupport::Gen gen(1001);
  for (std::size_t n = 4; n <= 8; ++n) {
    const Expr f = gen.smooth_tree(default_variables(n), 3);
    const CatalogEntry s = rank2_single_entry(n, f);
    const ResidualReport rs = verify_jacobi(s.J, s.domain, 1e-10);
    o.require(rs.pass && rs.max_abs <= 1e-10, s.name + " with f = " + render(f) + " residual " + num(rs.max_abs));
  }

  const CatalogEntry s4 = canonical(4);
  const StructureMatrix scaled = s4.J.scaled(parse("exp(x2)", s4.J.variables()));
  const ResidualReport bad = verify_jacobi(scaled, s4.domain, 1e-10);
  double min_x2 = INFINITY;
  for (const Sample& s : s4.domain.samples()) min_x2 = std::min(min_x2, s.x[1]);
  o.require(!bad.pass && bad.worst.has_value(), "S4*exp(x2) was accepted");
  if (bad.worst)
    o.require(std::abs(bad.worst->value) >= std::exp(min_x2) - 1e-10,
              "S4*exp(x2) witness residual " + num(bad.worst->value) + " below exp(min x2)");
  return o;
}

Outcome pfaffian_identity() {
  Outcome o;
  testsupport::Gen gen(1002);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const Matrix a = gen.skew(4, -2.0, 2.0);
    const double det = det4(a), x = xi(a, 0, 1, 2, 3);
    const double gap = std::abs(det - x * x) / (1.0 + std::abs(det));
    worst = std::max(worst, gap);
  }
  o.require(worst <= 1e-9, "random 4x4 relative gap " + num(worst));
  for (const CatalogEntry& e : catalog()) {
    if (e.dim() != 6) continue;
    const ResidualReport r = pfaffian_identity_check(e.J, e.domain, 1e-9);
    o.require(r.pass, e.name + " principal 4x4 gap " + num(r.max_abs));
  }
  return o;
}

Outcome rank_oracle() {
  Outcome o;
  testsupport::Gen gen(1003);
  std::size_t checked = 0, mismatches = 0;
  for (const std::size_t r : {0u, 2u, 4u, 6u})
    for (std::size_t n = std::max<std::size_t>(r, 1); n <= 8; ++n)
      for (int t = 0; t < 60; ++t) {
        const Matrix a = gen.skew_of_rank(n, r / 2);
        const std::size_t got = skew_eliminate(a, 1e-9).rank;
        if (got != testsupport::svd_rank(a, 1e-9) || got != r) ++mismatches;
        ++checked;
      }
  o.require(checked >= 1000, "only " + std::to_string(checked) + " matrices");
  o.require(mismatches == 0, std::to_string(mismatches) + " mismatches out of " + std::to_string(checked));
  if (o.pass) o.detail = std::to_string(checked) + " matrices";
  return o;
}

Outcome casimir_families() {
  Outcome o;
  for (const CatalogEntry& e : catalog()) {
    if (e.rank >= e.dim()) continue;
    for (const Expr& D : e.casimirs)
      for (const Family1Mode m : {Family1Mode::Exp, Family1Mode::OnePlusSquare}) {
        const ReparamCandidate c = family1_factor(e.J, D, m, e.domain, 1e-10);
        const FactorReport r = check_factor(e.J, c.eta, e.domain, 1e-10);
        o.require(r.pass, e.name + " " + to_string(m) + " of " + render(D));
      }
    if (e.casimirs.size() >= 2) {
      const Expr eta = exp(e.casimirs[0]) * (Expr(1.0) + pow(e.casimirs[1], 2.0));
      o.require(check_factor(e.J, eta, e.domain, 1e-10).pass, e.name + " product of two Casimir factors");
    }
  }
  return o;
}

Outcome rank_two_characterization() {
  Outcome o;
  testsupport::Gen gen(1005);
  // The same η family for every entry: functions of x1, x2 only.
  const VariableList v2 = default_variables(2);
  std::vector<Expr> etas;
  for (int t = 0; t < 20; ++t) etas.push_back(gen.smooth_eta(v2));

  for (const CatalogEntry& e : rank2_entries())
    for (const Expr& eta : etas)
      o.require(check_factor(e.J, eta, e.domain, 1e-9).pass, e.name + " rejected " + render(eta));

  for (const std::size_t n : {4u, 6u}) {
    const CatalogEntry s = canonical(n);
    for (const Expr& eta : etas) {
      if (simplify(eta).is_constant()) continue;
      o.require(!check_factor(s.J, eta, s.domain, 1e-9).pass, s.name + " accepted " + render(eta));
    }
  }

  for (const CatalogEntry& e : catalog()) {
    const RankReport rr = verify_constant_rank(e.J, e.domain, 1e-9);
    const bool universal = classify(e.J, e.domain, 1e-9).verdict == Verdict::Universal;
    o.require(rr.pass && universal == (rr.rank <= 2), e.name + " classification disagrees with rank " +
                                                          std::to_string(rr.rank));
  }

  const CatalogEntry s4 = canonical(4);
  for (const Sample& s : s4.domain.samples()) {
    const std::size_t r = testsupport::svd_rank(coefficient_matrix_at(s4.J, s.x), 1e-9);
    o.require(r == 4, "S4 coefficient matrix rank " + std::to_string(r) + " at sample " + std::to_string(s.index));
  }
  return o;
}

Outcome identity_decomposition() {
  Outcome o;
  testsupport::Gen gen(1006);
  const std::vector<CatalogEntry> entries = catalog();
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const CatalogEntry& e = entries[gen.index(entries.size())];
    const std::size_t n = e.dim();
    if (n < 3) {
      --t;
      continue;
    }
    const Expr eta = gen.smooth_eta(e.J.variables());
    const StructureMatrix P = e.J.scaled(eta);
    const auto samples = e.domain.samples();
    const auto x = samples[gen.index(samples.size())].x;
    const FactorLocal loc = FactorEvaluator(e.J, eta).at(x);
    const auto lj = e.J.local(x), lp = P.local(x);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        for (std::size_t k = j + 1; k < n; ++k) {
          const double rp = jacobi_residual(lp, i, j, k);
          const double expect = loc.eta * loc.eta * jacobi_residual(lj, i, j, k) - loc.eta * factor_residual(loc, i, j, k);
          worst = std::max(worst, std::abs(rp - expect) / (1.0 + std::abs(rp)));
        }
  }
  o.require(worst <= 1e-10, "worst relative gap " + num(worst));
  return o;
}

Outcome euler_chart() {
  Outcome o;
  const CatalogEntry e = euler_top();
  const DarbouxChart ch = build_chart(*e.darboux, 1e-9);
  for (const Sample& s : e.domain.samples()) {
    const double x3 = s.x[2];
    const double eta = evaluate(ch.eta, s.x);
    o.require(std::abs(eta - x3) <= 1e-12, "eta differs from x3 at sample " + std::to_string(s.index));
    const Matrix js = evaluate(ch.jstar, s.x);
    const Matrix expect{{0, 1, 0}, {-1, 0, 0}, {0, 0, 0}};
    double block = 0.0, tail = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) {
        block = std::max(block, std::abs(js(i, j) / eta - expect(i, j)));
        if (i >= 2) tail = std::max(tail, std::abs(js(i, j)));
      }
    o.require(block <= 1e-10, "J*/eta off canonical by " + num(block));
    o.require(tail <= 1e-12, "Casimir rows of J* reach " + num(tail));
    const double dm = det3(evaluate(ch.M, s.x));
    o.require(dm > 0.0 && std::abs(dm - x3) <= 1e-12, "det M = " + num(dm) + " vs x3 = " + num(x3));
  }
  return o;
}

Outcome dynamic_equivalence() {
  Outcome o;
  const CatalogEntry e = euler_top();
  const std::vector<double> x0 = *e.initial_state;

  const EquivalenceReport a = reparam_equivalence(e.J, e.hamiltonian, exp(e.casimirs[0]), x0, 5.0,
                                                  IntegratorConfig::rk45(1e-9, 1e-9), 1e-5);
  o.require(a.pass, "(a) reparam discrepancy " + num(a.max_discrepancy));

  const DarbouxChart ch = build_chart(*e.darboux, 1e-9);
  const EquivalenceReport b = darboux_equivalence(ch, e.hamiltonian, x0, 5.0, IntegratorConfig::rk45(1e-9, 1e-9), 1e-4);
  o.require(b.pass, "(b) darboux discrepancy " + num(b.max_discrepancy));
  o.require(b.frozen_drift <= 1e-6, "(b) y3 drift " + num(b.frozen_drift));

  const Trajectory tr = integrate(system_rhs(e.J, e.hamiltonian), Point(e.J.variables(), x0), 10.0,
                                  IntegratorConfig::rk4(1e-3));
  for (const Expr& f : {e.hamiltonian, e.casimirs[0]}) {
    const double d = conserved_drift(tr, f, e.J.variables());
    o.require(d <= 1e-6, "(c) drift of " + render(f) + " is " + num(d));
  }

  const CatalogEntry osc = canonical(2);
  const auto rhs = system_rhs(osc.J, osc.hamiltonian);
  const auto error = [&](double h) {
    const Trajectory t = integrate(rhs, Point(osc.J.variables(), {1.0, 0.0}), 2.0 * M_PI, IntegratorConfig::rk4(h));
    return std::hypot(t.back()[0] - 1.0, t.back()[1]);
  };
  const double ratio = error(2e-2) / error(1e-2);
  o.require(ratio >= 12.0 && ratio <= 20.0, "(d) halving ratio " + num(ratio));
  return o;
}

Outcome casimir_agreement_under_scaling() {
  Outcome o;
  for (const CatalogEntry& e : catalog()) {
    const Expr d0 = e.casimirs.empty() ? e.hamiltonian : e.casimirs.front();
    const Expr eta = exp(d0);
    std::vector<Expr> probes = e.casimirs;
    probes.push_back(e.hamiltonian);
    for (const Expr& x : variables_of(e.J.variables())) probes.push_back(x);
    for (const Expr& D : probes) {
      const CasimirAgreement ag = casimir_agreement(e.J, eta, D, e.domain, 1e-9);
      o.require(ag.agree(), e.name + " disagrees on " + render(D));
    }
  }
  return o;
}

// ---------------------------------------------------------------------------
// CLI contract

struct CliRun {
  int code = -1;
  std::string output;
};

CliRun run(const std::string& cli, const std::string& args) {
  CliRun r;
  FILE* p = popen(("'" + cli + "' " + args + " 2>&1").c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  for (std::size_t n; (n = fread(buf.data(), 1, buf.size(), p)) > 0;) r.output.append(buf.data(), n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::string stable(const fs::path& report) {
  json j = json::parse(slurp(report));
  j.erase("volatile");
  return j.dump(2) + "\n";
}

Outcome cli_contract(const std::string& cli, const fs::path& models, const fs::path& golden) {
  Outcome o;
  const fs::path dir = fs::temp_directory_path() / ("poissonkit_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const fs::path model = dir / "euler_top.json";
  o.require(run(cli, "export euler_top --out '" + model.string() + "'").code == 0, "export euler_top failed");

  const std::array<std::pair<const char*, const char*>, 4> cmds{
      {{"verify", "verify.json"}, {"reparam classify", "reparam_classify.json"}, {"darboux", "darboux.json"},
       {"simulate", "simulate.json"}}};
  for (const auto& [cmd, file] : cmds) {
    std::array<std::string, 2> text;
    for (int k = 0; k < 2; ++k) {
      const fs::path rep = dir / (std::to_string(k) + file);
      const CliRun r = run(cli, std::string(cmd) + " '" + model.string() + "' --report '" + rep.string() + "'");
      o.require(r.code == 0, std::string(cmd) + " exited " + std::to_string(r.code));
      text[k] = fs::exists(rep) ? stable(rep) : "";
    }
    o.require(!text[0].empty() && text[0] == text[1], std::string(cmd) + " report not stable across runs");
    o.require(text[0] == slurp(golden / file), std::string(cmd) + " report differs from golden");
  }

  const auto exit_of = [&](const std::string& args) { return run(cli, args).code; };
  const std::string m = "'" + models.string() + "/";
  o.require(exit_of("verify " + m + "euler_top.json'") == 0, "pass fixture did not exit 0");
  o.require(exit_of("verify " + m + "bad_jacobi.json'") == 1, "fail fixture did not exit 1");
  o.require(exit_of("reparam check " + m + "s4.json'") == 1, "s4 candidate did not exit 1");
  o.require(exit_of("darboux " + m + "euler_top_casimir_d2.json'") == 1, "degenerate chart did not exit 1");
  o.require(exit_of("verify " + m + "malformed.json'") == 2, "malformed fixture did not exit 2");
  o.require(exit_of("darboux " + m + "euler_top_no_casimirs.json'") == 2, "missing Casimirs did not exit 2");
  o.require(exit_of("simulate " + m + "euler_top_outside.json'") == 2, "outside x0 did not exit 2");
  fs::remove_all(dir);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 4) {
    std::cerr << "usage: acceptance <cli> <models-dir> <golden-dir>\n";
    return 2;
  }
  const std::string cli = argv[1];
  const fs::path models = argv[2], golden = argv[3];

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"Jacobi verification", jacobi_verification},
      {"Pfaffian identity", pfaffian_identity},
      {"rank oracle equivalence", rank_oracle},
      {"Casimir factor families", casimir_families},
      {"rank-2 characterization", rank_two_characterization},
      {"Jacobi decomposition", identity_decomposition},
      {"Euler top chart", euler_chart},
      {"dynamic equivalence", dynamic_equivalence},
      {"Casimir agreement under scaling", casimir_agreement_under_scaling},
      {"CLI contract", [&] { return cli_contract(cli, models, golden); }},
  };

  int failures = 0;
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    Outcome o;
    try {
      o = criteria[c].second();
    } catch (const std::exception& ex) {
      o.pass = false;
      o.detail = std::string("exception: ") + ex.what();
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << (c + 1) << " " << criteria[c].first;
    if (!o.detail.empty()) std::cout << " (" << o.detail << ")";
    std::cout << "\n";
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
