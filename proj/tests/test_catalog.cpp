#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "poissonkit/catalog.hpp"
#include "poissonkit/parse.hpp"
#include "support.hpp"

using namespace poissonkit;

TEST(Catalog, EveryEntryPassesSelfTest) {
  std::set<std::string> names;
  for (const CatalogEntry& e : catalog()) {
    EXPECT_TRUE(names.insert(e.name).second) << "duplicate " << e.name;
    const SelfTestResult r = self_test(e);
    EXPECT_TRUE(r.pass) << e.name << ": " << (r.failures.empty() ? "" : r.failures.front());
    if (e.darboux) {
      const DarbouxChart ch = build_chart(*e.darboux, 1e-9);
      EXPECT_TRUE(verify_canonical(ch, 1e-9).pass) << e.name;
    }
    EXPECT_TRUE(find_entry(e.name).has_value());
  }
  EXPECT_FALSE(find_entry("no_such_system").has_value());
}

TEST(Catalog, SelfTestCatchesWrongStoredVerdict) {
  CatalogEntry e = canonical(4);
  e.verdict = Verdict::Universal;
  const SelfTestResult r = self_test(e);
  EXPECT_FALSE(r.pass);
  ASSERT_FALSE(r.failures.empty());
  EXPECT_NE(r.failures.front().find("verdict"), std::string::npos);
}

TEST(Canonical, Examples) {
  const CatalogEntry s2 = canonical(2);
  EXPECT_LE(max_abs_difference(s2.J.values(std::vector<double>{0.5, 0.5}), Matrix{{0, 1}, {-1, 0}}), 0.0);
  EXPECT_EQ(s2.verdict, Verdict::Universal);
  EXPECT_EQ(canonical(4).verdict, Verdict::ConstantsOnly);
  EXPECT_EQ(canonical(6).rank, 6u);
  EXPECT_THROW(canonical(3), Error);
  EXPECT_THROW(canonical(0), Error);
  const Matrix s6 = canonical(6).J.values(std::vector<double>(6, 1.0));
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(s6(i, j), (j == i + 1 && i % 2 == 0) ? 1.0 : (i == j + 1 && j % 2 == 0) ? -1.0 : 0.0);
}

TEST(EulerTop, Examples) {
  const CatalogEntry e = euler_top();
  EXPECT_TRUE(verify_jacobi(e.J, e.domain, 1e-10).pass);
  EXPECT_EQ(verify_constant_rank(e.J, e.domain, 1e-10).rank, 2u);
  ASSERT_TRUE(e.darboux.has_value());
  const DarbouxChart ch = build_chart(*e.darboux, 1e-9);
  EXPECT_TRUE(structurally_equal(ch.eta, parse("x3", e.J.variables())));
  EXPECT_EQ(e.verdict, Verdict::Universal);
  for (const Interval& iv : e.domain.box()) {
    EXPECT_EQ(iv.lo, 0.1);
    EXPECT_EQ(iv.hi, 2.0);
  }
  ASSERT_TRUE(e.initial_state.has_value());
  EXPECT_EQ(*e.initial_state, (std::vector<double>{1.0, 1.0, 1.0}));
  EXPECT_FALSE(e.reparam_candidates.empty());
}

TEST(Rank2SingleEntry, RandomEntriesSatisfyJacobi) {
  testsupport::Gen gen(60);
  const auto v = default_variables(4);
  for (int t = 0; t < 10; ++t) {
    const Expr f = gen.smooth_tree(v, 3);
    const CatalogEntry e = rank2_single_entry(4, f);
    EXPECT_TRUE(verify_jacobi(e.J, e.domain.with_sampling(50, t), 1e-10).pass) << render(f);
    for (const Expr& D : e.casimirs) EXPECT_TRUE(is_casimir(e.J, D, e.domain, 1e-12).pass());
  }
}

TEST(Rank2SingleEntry, Examples) {
  const auto v5 = default_variables(5);
  const CatalogEntry e5 = rank2_single_entry(5, parse("exp(x1)", v5));
  EXPECT_EQ(verify_constant_rank(e5.J, e5.domain, 1e-10).rank, 2u);
  EXPECT_EQ(classify(e5.J, e5.domain, 1e-9).verdict, Verdict::Universal);
  EXPECT_EQ(e5.casimirs.size(), 3u);

  const CatalogEntry e3 = rank2_single_entry(3, Expr(1.0));
  EXPECT_LE(max_abs_difference(e3.J.values(std::vector<double>{1, 1, 1}), Matrix{{0, 1, 0}, {-1, 0, 0}, {0, 0, 0}}), 0.0);
  EXPECT_THROW(rank2_single_entry(2, Expr(1.0)), Error);
  EXPECT_THROW(rank2_single_entry(3, parse("q", {"q"})), UndeclaredVariable);
}

TEST(PaddedSymplectic, Examples) {
  const CatalogEntry e = padded_symplectic(4, 2);
  EXPECT_EQ(e.dim(), 6u);
  EXPECT_EQ(verify_constant_rank(e.J, e.domain, 1e-10).rank, 4u);
  EXPECT_EQ(xi(e.J, 0, 1, 2, 3, std::vector<double>(6, 1.0)), 1.0);
  const auto& v = e.J.variables();
  EXPECT_TRUE(check_factor(e.J, parse("exp(x5)", v), e.domain, 1e-10).pass);
  const FactorReport bad = check_factor(e.J, parse("exp(x2)", v), e.domain, 1e-10);
  EXPECT_FALSE(bad.pass);
  ASSERT_TRUE(bad.product.worst.has_value());
  EXPECT_EQ(bad.product.worst->indices, (std::vector<std::size_t>{0, 2, 3}));
  EXPECT_THROW(padded_symplectic(3, 1), Error);
  EXPECT_THROW(padded_symplectic(4, 0), Error);
}
