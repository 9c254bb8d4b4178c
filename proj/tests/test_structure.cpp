#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "poissonkit/catalog.hpp"
#include "poissonkit/parse.hpp"
#include "poissonkit/structure.hpp"
#include "support.hpp"

using namespace poissonkit;

namespace {

StructureMatrix s4_scaled_by_exp_x2() { return canonical(4).J.scaled(parse("exp(x2)", default_variables(4))); }

}  // namespace

TEST(StructureMatrix, SkewByConstruction) {
  const StructureMatrix J = euler_top().J;
  const std::vector<double> x{0.3, -1.2, 2.0};
  const Matrix v = J.values(x);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(v(i, i), 0.0);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(v(i, j), -v(j, i));
  }
  EXPECT_DOUBLE_EQ(v(0, 1), 2.0);
  EXPECT_DOUBLE_EQ(v(0, 2), 1.2);
  EXPECT_DOUBLE_EQ(v(1, 2), 0.3);
}

TEST(StructureMatrix, RejectsBadShapes) {
  EXPECT_THROW(StructureMatrix("x", {"x1"}, {}), Error);
  EXPECT_THROW(StructureMatrix("x", {"x1", "x2", "x3"}, {Expr(1.0)}), Error);
  EXPECT_THROW(StructureMatrix("x", {"x1", "x2"}, {parse("q", {"q"})}), UndeclaredVariable);
  EXPECT_THROW(StructureMatrix::from_entries("x", {"x1", "x2"}, {{{1, 0}, Expr(1.0)}}), Error);
}

TEST(JacobiResidual, CanonicalIsZero) {
  testsupport::Gen gen(10);
  const StructureMatrix S = canonical(6).J;
  for (int t = 0; t < 20; ++t) {
    const auto x = gen.point(6, -3.0, 3.0);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j)
        for (std::size_t k = 0; k < 6; ++k) EXPECT_EQ(jacobi_residual(S, i, j, k, x), 0.0);
  }
}

TEST(JacobiResidual, EulerTopIsZero) {
  const StructureMatrix J = euler_top().J;
  testsupport::Gen gen(11);
  for (int t = 0; t < 50; ++t) EXPECT_NEAR(jacobi_residual(J, 0, 1, 2, gen.point(3, -2.0, 2.0)), 0.0, 1e-14);
}

TEST(JacobiResidual, ScaledCanonicalWitness) {
  // Only the ∂_2 η term survives; with the J_li orientation the value is -η².
  const StructureMatrix P = s4_scaled_by_exp_x2();
  testsupport::Gen gen(12);
  for (int t = 0; t < 20; ++t) {
    const auto x = gen.point(4, -1.0, 1.0);
    const double r = jacobi_residual(P, 0, 2, 3, x);
    EXPECT_NEAR(r, -std::exp(2.0 * x[1]), 1e-12 * std::exp(2.0 * x[1]));
    EXPECT_GE(std::abs(r), std::exp(x[1]) * std::min(1.0, std::exp(x[1])));
  }
}

TEST(JacobiResidual, PointOverloadUsesNames) {
  const StructureMatrix P = s4_scaled_by_exp_x2();
  const Point p({"x4", "x3", "x2", "x1"}, {0.0, 0.0, 0.5, 0.0});
  EXPECT_NEAR(jacobi_residual(P, 0, 2, 3, p), -std::exp(1.0), 1e-12);
}

TEST(JacobiResidual, PermutationSymmetry) {
  testsupport::Gen gen(13);
  const auto vars = default_variables(4);
  for (int t = 0; t < 30; ++t) {
    std::vector<Expr> up;
    for (int e = 0; e < 6; ++e) up.push_back(gen.smooth_tree(vars, 3));
    const StructureMatrix J("random", vars, up);
    const auto x = gen.point(4, -1.0, 1.0);
    const auto loc = J.local(x);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t k = 0; k < 4; ++k) {
          const double r = jacobi_residual(loc, i, j, k);
          const double scale = 1e-12 * (1.0 + std::abs(r));
          EXPECT_NEAR(jacobi_residual(loc, j, k, i), r, scale);
          EXPECT_NEAR(jacobi_residual(loc, j, i, k), -r, scale);
          EXPECT_NEAR(jacobi_residual(loc, i, k, j), -r, scale);
          if (i == j || j == k || i == k) EXPECT_EQ(jacobi_residual(J, i, j, k, x), 0.0);
        }
  }
}

TEST(VerifyJacobi, Examples) {
  EXPECT_TRUE(verify_jacobi(euler_top().J, SampleDomain::cube(3, -2.0, 2.0), 1e-10).pass);
  const auto v4 = default_variables(4);
  EXPECT_TRUE(verify_jacobi(rank2_single_entry(4, parse("1 + x3^2", v4)).J, SampleDomain::cube(4, -2.0, 2.0), 1e-10).pass);

  const SampleDomain dom = SampleDomain::cube(4, -1.0, 1.0);
  const ResidualReport bad = verify_jacobi(s4_scaled_by_exp_x2(), dom, 1e-10);
  EXPECT_FALSE(bad.pass);
  double min_eta = INFINITY;
  for (const Sample& s : dom.samples()) min_eta = std::min(min_eta, std::exp(s.x[1]));
  EXPECT_GE(bad.max_abs, min_eta);
  ASSERT_TRUE(bad.worst.has_value());
  EXPECT_EQ(bad.worst->indices.size(), 3u);
  EXPECT_EQ(bad.samples_checked, 200u);
}

TEST(VerifyJacobi, EmptyDomainIsAnError) {
  const SampleDomain dom({{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}}, 50, 1, parse("0*x1", default_variables(3)));
  EXPECT_THROW(verify_jacobi(euler_top().J, dom, 1e-10), EmptyDomainError);
}

TEST(VerifyJacobi, DomainErrorsNameTheEntry) {
  const auto v = default_variables(3);
  const StructureMatrix J("logs", v, {parse("log(x1)", v), Expr(0.0), Expr(0.0)});
  try {
    J.values(std::vector<double>{-1.0, 0.0, 0.0});
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("J_12"), std::string::npos) << e.what();
  }
}

TEST(SampleDomain, DeterministicAndFiltered) {
  const auto v = default_variables(2);
  const SampleDomain a({{-1.0, 1.0}, {-1.0, 1.0}}, 100, 7, parse("x1", v));
  const auto s1 = a.samples(), s2 = a.samples();
  ASSERT_EQ(s1.size(), s2.size());
  for (std::size_t i = 0; i < s1.size(); ++i) {
    EXPECT_EQ(s1[i].index, s2[i].index);
    EXPECT_EQ(s1[i].x, s2[i].x);
    EXPECT_TRUE(a.contains(s1[i].x));
  }
  // Reproducible from (seed, index) alone.
  const SampleDomain all({{-1.0, 1.0}, {-1.0, 1.0}}, 100, 7);
  const auto every = all.samples();
  for (const Sample& s : s1) EXPECT_EQ(every[s.index].x, s.x);
  EXPECT_THROW(SampleDomain({{1.0, 1.0}}, 10, 1), Error);
  EXPECT_THROW(SampleDomain({{0.0, 1.0}}, 0, 1), Error);
}

TEST(Bracket, Examples) {
  const StructureMatrix J = euler_top().J;
  const auto& v = J.variables();
  EXPECT_TRUE(structurally_equal(bracket(J, parse("x1", v), parse("x2", v)), parse("x3", v)));
  EXPECT_TRUE(bracket(J, Expr(4.0), parse("x1*x2", v)).is_constant(0.0));
  testsupport::Gen gen(14);
  for (int t = 0; t < 20; ++t) {
    const Expr f = gen.smooth_tree(v, 3), g = gen.smooth_tree(v, 3);
    const Expr ff = bracket(J, f, f), fg = bracket(J, f, g), gf = bracket(J, g, f);
    for (int k = 0; k < 5; ++k) {
      const auto x = gen.point(3, -1.0, 1.0);
      EXPECT_NEAR(evaluate(ff, x), 0.0, 1e-12);
      EXPECT_NEAR(evaluate(fg, x) + evaluate(gf, x), 0.0, 1e-12 * (1.0 + std::abs(evaluate(fg, x))));
    }
  }
}

TEST(SystemRhs, Examples) {
  const StructureMatrix J = euler_top().J;
  const auto& v = J.variables();
  for (const Expr& c : system_rhs(J, Expr(3.0))) EXPECT_TRUE(c.is_constant(0.0));
  const auto cas = system_rhs(J, euler_top().casimirs[0]);
  const auto rhs = system_rhs(J, euler_top().hamiltonian);
  const auto dH = gradient(euler_top().hamiltonian, v);
  for (const Sample& s : SampleDomain::cube(3, -2.0, 2.0).samples()) {
    double dhdt = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_NEAR(evaluate(cas[i], s.x), 0.0, 1e-14);
      dhdt += evaluate(dH[i], s.x) * evaluate(rhs[i], s.x);
    }
    EXPECT_NEAR(dhdt, 0.0, 1e-12);
  }
}

TEST(Pushforward, Examples) {
  const CatalogEntry e = euler_top();
  const auto& v = e.J.variables();
  const std::vector<Expr> id = variables_of(v);
  const std::vector<double> p{1.0, 1.0, 1.0};
  EXPECT_EQ(max_abs_difference(transform_pushforward(e.J, id, p), e.J.values(p)), 0.0);
  const std::vector<Expr> y{parse("x1", v), parse("x2", v), e.casimirs[0]};
  const Matrix js = transform_pushforward(e.J, y, p);
  EXPECT_LE(max_abs_difference(js, Matrix{{0, 1, 0}, {-1, 0, 0}, {0, 0, 0}}), 1e-15);
  EXPECT_LE(max_abs_difference(transform_pushforward(e.J, y, Point(v, {1.0, 1.0, 1.0})), js), 0.0);
}

TEST(Pushforward, SkewAndRankPreserving) {
  testsupport::Gen gen(15);
  const auto v = default_variables(4);
  const StructureMatrix S = canonical(4).J;
  const StructureMatrix R = rank2_single_entry(4, parse("2 + x3", v)).J;
  for (int t = 0; t < 50; ++t) {
    std::vector<Expr> y;
    for (std::size_t i = 0; i < 4; ++i) y.push_back(variables_of(v)[i] + Expr(0.3) * gen.smooth_tree(v, 2));
    const auto x = gen.point(4, 0.1, 1.0);
    for (const StructureMatrix* J : {&R, &S}) {
      const Matrix out = transform_pushforward(*J, y, x);
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(out(i, j), -out(j, i), 1e-12);
      const Matrix M = evaluate(jacobian(y, v), x);
      if (std::abs(determinant(M)) > 1e-6)
        EXPECT_EQ(numeric_rank(out, 1e-9), numeric_rank(J->values(x), 1e-9));
    }
  }
}
