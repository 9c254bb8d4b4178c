#pragma once

// Hand-rolled generators for property tests. Everything is seeded so failures
// reproduce.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "poissonkit/expr.hpp"
#include "poissonkit/linalg.hpp"

namespace testsupport {

using poissonkit::Expr;
using poissonkit::Matrix;
using poissonkit::Op;
using poissonkit::VariableList;

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  bool coin() { return index(2) == 1; }
  std::mt19937_64& engine() { return rng_; }

  std::vector<double> point(std::size_t n, double lo, double hi) {
    std::vector<double> x(n);
    for (double& v : x) v = uniform(lo, hi);
    return x;
  }

  /// Raw tree (no folding) over vars using operations that are defined
  /// everywhere: + - * neg sin cos exp atan and small integer powers.
  Expr smooth_tree(const VariableList& vars, int depth) {
    if (depth == 0 || index(4) == 0) {
      if (coin()) return variable(vars);
      return Expr(std::round(uniform(0.0, 3.0) * 4.0) / 4.0);
    }
    switch (index(9)) {
      case 0: return Expr::make(Op::Add, {smooth_tree(vars, depth - 1), smooth_tree(vars, depth - 1)});
      case 1: return Expr::make(Op::Sub, {smooth_tree(vars, depth - 1), smooth_tree(vars, depth - 1)});
      case 2: return Expr::make(Op::Mul, {smooth_tree(vars, depth - 1), smooth_tree(vars, depth - 1)});
      case 3: return Expr::make(Op::Neg, {smooth_tree(vars, depth - 1)});
      case 4: return Expr::make(Op::Sin, {smooth_tree(vars, depth - 1)});
      case 5: return Expr::make(Op::Cos, {smooth_tree(vars, depth - 1)});
      case 6: return Expr::make(Op::Atan, {smooth_tree(vars, depth - 1)});
      case 7:
        return Expr::make(Op::Exp, {Expr::make(Op::Mul, {Expr(0.25), smooth_tree(vars, depth - 1)})});
      default:
        return Expr::make(Op::Pow, {smooth_tree(vars, depth - 1), Expr(static_cast<double>(1 + index(3)))});
    }
  }

  /// Like smooth_tree but also with division, log, sqrt, tan and real powers
  /// whose arguments are kept positive on points with coordinates in [0.5, 2].
  Expr guarded_tree(const VariableList& vars, int depth) {
    if (depth == 0 || index(4) == 0) {
      if (coin()) return variable(vars);
      return Expr(std::round(uniform(0.25, 3.0) * 4.0) / 4.0);
    }
    const auto positive = [&](int d) {
      // 1 + u^2 > 0 for any u.
      return Expr::make(Op::Add, {Expr(1.0), Expr::make(Op::Pow, {smooth_tree(vars, d), Expr(2.0)})});
    };
    switch (index(6)) {
      case 0: return Expr::make(Op::Div, {guarded_tree(vars, depth - 1), positive(depth - 1)});
      case 1: return Expr::make(Op::Log, {positive(depth - 1)});
      case 2: return Expr::make(Op::Sqrt, {positive(depth - 1)});
      case 3: return Expr::make(Op::Tan, {Expr::make(Op::Mul, {Expr(0.5), Expr::make(Op::Atan, {smooth_tree(vars, depth - 1)})})});
      case 4: return Expr::make(Op::Pow, {positive(depth - 1), Expr(0.5 + index(3) * 0.25)});
      default: return smooth_tree(vars, depth);
    }
  }

  /// η = exp(L(x)) + P(x)² with L linear (coefficients in [-0.5, 0.5]) and P of
  /// degree <= 2 (coefficients in [-1, 1] over the number of terms). Positive.
  Expr smooth_eta(const VariableList& vars) {
    const auto xs = poissonkit::variables_of(vars);
    Expr lin = Expr(uniform(-0.5, 0.5));
    for (const Expr& x : xs) lin = lin + Expr(uniform(-0.5, 0.5)) * x;
    std::vector<Expr> terms{Expr(1.0)};
    for (std::size_t i = 0; i < xs.size(); ++i) {
      terms.push_back(xs[i]);
      for (std::size_t j = i; j < xs.size(); ++j) terms.push_back(xs[i] * xs[j]);
    }
    const double scale = 1.0 / static_cast<double>(terms.size());
    Expr poly(0.0);
    for (const Expr& t : terms) poly = poly + Expr(uniform(-1.0, 1.0) * scale) * t;
    return poissonkit::exp(lin) + poissonkit::pow(poly, 2.0);
  }

  /// Random skew matrix of rank 2r: sum of r terms u vᵀ - v uᵀ.
  Matrix skew_of_rank(std::size_t n, std::size_t r) {
    Matrix a(n, n);
    for (std::size_t t = 0; t < r; ++t) {
      const auto u = point(n, -1.0, 1.0);
      const auto v = point(n, -1.0, 1.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a(i, j) += u[i] * v[j] - v[i] * u[j];
    }
    for (std::size_t i = 0; i < n; ++i) a(i, i) = 0.0;
    return a;
  }

  Matrix skew(std::size_t n, double lo = -1.0, double hi = 1.0) {
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        a(i, j) = uniform(lo, hi);
        a(j, i) = -a(i, j);
      }
    return a;
  }

 private:
  Expr variable(const VariableList& vars) {
    const std::size_t i = index(vars.size());
    return Expr::variable(vars[i], i);
  }

  std::mt19937_64 rng_;
};

/// Centered difference of f along coordinate v at x.
template <class F>
double central_difference(const F& f, std::vector<double> x, std::size_t v, double h) {
  const double x0 = x[v];
  x[v] = x0 + h;
  const double fp = f(x);
  x[v] = x0 - h;
  const double fm = f(x);
  return (fp - fm) / (2.0 * h);
}

}  // namespace testsupport
