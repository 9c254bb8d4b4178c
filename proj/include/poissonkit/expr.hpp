#pragma once

// Immutable symbolic expression trees over named real variables.
//
// Nodes are shared and never mutated, so an Expr is cheap to copy and safe to
// evaluate from several threads. The arithmetic operators and the math
// functions in this header fold constants and drop neutral elements as they
// build; Expr::make builds a node verbatim (the parser uses it so that a parse
// is a faithful image of the source text).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "poissonkit/errors.hpp"

namespace poissonkit {

enum class Op : std::uint8_t {
  Constant,
  Variable,
  Neg,
  Sin,
  Cos,
  Tan,
  Exp,
  Log,
  Sqrt,
  Atan,
  Add,
  Sub,
  Mul,
  Div,
  Pow,
};

using VariableList = std::vector<std::string>;

inline bool is_unary(Op op) { return op >= Op::Neg && op <= Op::Atan; }
inline bool is_binary(Op op) { return op >= Op::Add; }

inline std::string_view function_name(Op op) {
  switch (op) {
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Tan: return "tan";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sqrt: return "sqrt";
    case Op::Atan: return "atan";
    default: return "";
  }
}

class Expr {
 public:
  Expr() : Expr(0.0) {}
  Expr(double value);  // NOLINT(google-explicit-constructor): constants mix freely with expressions

  static Expr variable(std::string name, std::size_t index);
  /// Builds the node exactly as given, without folding.
  static Expr make(Op op, std::vector<Expr> children);

  Op op() const noexcept;
  double constant_value() const noexcept;
  const std::string& name() const noexcept;
  std::size_t index() const noexcept;
  const std::vector<Expr>& children() const noexcept;
  const Expr& child(std::size_t i) const noexcept { return children()[i]; }

  bool is_constant() const noexcept { return op() == Op::Constant; }
  bool is_constant(double v) const noexcept { return is_constant() && constant_value() == v; }
  bool is_variable() const noexcept { return op() == Op::Variable; }

  bool same_node(const Expr& other) const noexcept { return node_ == other.node_; }

 private:
  struct Node;
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

struct Expr::Node {
  Op op = Op::Constant;
  double value = 0.0;
  std::string name;
  std::size_t index = 0;
  std::vector<Expr> children;
};

inline Expr::Expr(double value) {
  auto n = std::make_shared<Node>();
  n->op = Op::Constant;
  n->value = value;
  node_ = std::move(n);
}

inline Expr Expr::variable(std::string name, std::size_t index) {
  auto n = std::make_shared<Node>();
  n->op = Op::Variable;
  n->name = std::move(name);
  n->index = index;
  return Expr(std::shared_ptr<const Node>(std::move(n)));
}

inline Expr Expr::make(Op op, std::vector<Expr> children) {
  const std::size_t want = op == Op::Constant || op == Op::Variable ? 0 : is_unary(op) ? 1 : 2;
  if (children.size() != want) throw Error("Expr::make: wrong number of children");
  auto n = std::make_shared<Node>();
  n->op = op;
  n->children = std::move(children);
  return Expr(std::shared_ptr<const Node>(std::move(n)));
}

inline Op Expr::op() const noexcept { return node_->op; }
inline double Expr::constant_value() const noexcept { return node_->value; }
inline const std::string& Expr::name() const noexcept { return node_->name; }
inline std::size_t Expr::index() const noexcept { return node_->index; }
inline const std::vector<Expr>& Expr::children() const noexcept { return node_->children; }

inline bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.same_node(b)) return true;
  if (a.op() != b.op()) return false;
  switch (a.op()) {
    case Op::Constant:
      // Bitwise so that -0.0 and 0.0 differ, matching what render prints.
      return std::signbit(a.constant_value()) == std::signbit(b.constant_value()) &&
             a.constant_value() == b.constant_value();
    case Op::Variable:
      return a.name() == b.name();
    default:
      break;
  }
  for (std::size_t i = 0; i < a.children().size(); ++i)
    if (!structurally_equal(a.child(i), b.child(i))) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Rendering

namespace detail {

inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Binding strength of a rendered node; higher binds tighter.
inline int precedence(const Expr& e) {
  switch (e.op()) {
    case Op::Add:
    case Op::Sub: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    case Op::Neg: return 3;
    case Op::Pow: return 4;
    case Op::Constant: return e.constant_value() < 0 || std::signbit(e.constant_value()) ? 0 : 5;
    default: return 5;
  }
}

inline void render_into(const Expr& e, std::string& out);

inline void render_child(const Expr& e, int min_prec, std::string& out) {
  if (precedence(e) < min_prec) {
    out += '(';
    render_into(e, out);
    out += ')';
  } else {
    render_into(e, out);
  }
}

inline void render_into(const Expr& e, std::string& out) {
  switch (e.op()) {
    case Op::Constant:
      out += format_number(e.constant_value());
      return;
    case Op::Variable:
      out += e.name();
      return;
    case Op::Neg:
      out += '-';
      render_child(e.child(0), 3, out);
      return;
    case Op::Add:
    case Op::Sub:
      render_child(e.child(0), 1, out);
      out += e.op() == Op::Add ? " + " : " - ";
      render_child(e.child(1), 2, out);
      return;
    case Op::Mul:
    case Op::Div:
      render_child(e.child(0), 2, out);
      out += e.op() == Op::Mul ? "*" : "/";
      render_child(e.child(1), 3, out);
      return;
    case Op::Pow:
      render_child(e.child(0), 5, out);
      out += '^';
      render_child(e.child(1), 3, out);
      return;
    default:
      out += function_name(e.op());
      out += '(';
      render_into(e.child(0), out);
      out += ')';
      return;
  }
}

}  // namespace detail

/// Text in the expression grammar; parse(render(e)) is structurally equal to e
/// for every tree produced by parse.
inline std::string render(const Expr& e) {
  std::string out;
  detail::render_into(e, out);
  return out;
}

inline std::ostream& operator<<(std::ostream& os, const Expr& e) { return os << render(e); }

// ---------------------------------------------------------------------------
// Folding builders

namespace detail {

inline bool finite_fold(double v) { return std::isfinite(v); }

inline bool is_integer(double v) { return std::isfinite(v) && std::floor(v) == v; }

}  // namespace detail

inline Expr operator+(const Expr& a, const Expr& b);
inline Expr operator-(const Expr& a, const Expr& b);
inline Expr operator*(const Expr& a, const Expr& b);
inline Expr operator/(const Expr& a, const Expr& b);

inline Expr operator-(const Expr& a) {
  if (a.is_constant()) return Expr(-a.constant_value());
  if (a.op() == Op::Neg) return a.child(0);
  if (a.op() == Op::Sub) return a.child(1) - a.child(0);
  return Expr::make(Op::Neg, {a});
}

inline Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant() && detail::finite_fold(a.constant_value() + b.constant_value()))
    return Expr(a.constant_value() + b.constant_value());
  if (a.is_constant(0.0)) return b;
  if (b.is_constant(0.0)) return a;
  if (b.op() == Op::Neg) return Expr::make(Op::Sub, {a, b.child(0)});
  if (b.is_constant() && b.constant_value() < 0) return a - Expr(-b.constant_value());
  if (a.op() == Op::Neg) return b - a.child(0);
  return Expr::make(Op::Add, {a, b});
}

inline Expr operator-(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant() && detail::finite_fold(a.constant_value() - b.constant_value()))
    return Expr(a.constant_value() - b.constant_value());
  if (b.is_constant(0.0)) return a;
  if (a.is_constant(0.0)) return -b;
  if (b.op() == Op::Neg) return a + b.child(0);
  if (b.is_constant() && b.constant_value() < 0) return a + Expr(-b.constant_value());
  return Expr::make(Op::Sub, {a, b});
}

inline Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant() && detail::finite_fold(a.constant_value() * b.constant_value()))
    return Expr(a.constant_value() * b.constant_value());
  if (a.is_constant(0.0) || b.is_constant(0.0)) return Expr(0.0);
  if (a.is_constant(1.0)) return b;
  if (b.is_constant(1.0)) return a;
  if (a.is_constant(-1.0)) return -b;
  if (b.is_constant(-1.0)) return -a;
  if (a.op() == Op::Neg) return -(a.child(0) * b);
  if (b.op() == Op::Neg) return -(a * b.child(0));
  if (a.is_constant() && a.constant_value() < 0) return -(Expr(-a.constant_value()) * b);
  if (b.is_constant() && b.constant_value() < 0) return -(a * Expr(-b.constant_value()));
  return Expr::make(Op::Mul, {a, b});
}

inline Expr operator/(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant() && b.constant_value() != 0.0 &&
      detail::finite_fold(a.constant_value() / b.constant_value()))
    return Expr(a.constant_value() / b.constant_value());
  if (a.is_constant(0.0) && !(b.is_constant(0.0))) return Expr(0.0);
  if (b.is_constant(1.0)) return a;
  if (b.is_constant(-1.0)) return -a;
  if (a.op() == Op::Neg) return -(a.child(0) / b);
  if (b.op() == Op::Neg) return -(a / b.child(0));
  if (a.is_constant() && a.constant_value() < 0) return -(Expr(-a.constant_value()) / b);
  if (b.is_constant() && b.constant_value() < 0) return -(a / Expr(-b.constant_value()));
  return Expr::make(Op::Div, {a, b});
}

namespace detail {

inline Expr unary(Op op, const Expr& a, double (*fn)(double), bool (*in_domain)(double)) {
  if (a.is_constant() && in_domain(a.constant_value())) {
    const double v = fn(a.constant_value());
    if (std::isfinite(v)) return Expr(v);
  }
  return Expr::make(op, {a});
}

inline bool anywhere(double) { return true; }

}  // namespace detail

inline Expr sin(const Expr& a) { return detail::unary(Op::Sin, a, [](double v) { return std::sin(v); }, detail::anywhere); }
inline Expr cos(const Expr& a) { return detail::unary(Op::Cos, a, [](double v) { return std::cos(v); }, detail::anywhere); }
inline Expr tan(const Expr& a) { return detail::unary(Op::Tan, a, [](double v) { return std::tan(v); }, detail::anywhere); }
inline Expr exp(const Expr& a) { return detail::unary(Op::Exp, a, [](double v) { return std::exp(v); }, detail::anywhere); }
inline Expr log(const Expr& a) {
  return detail::unary(Op::Log, a, [](double v) { return std::log(v); }, [](double v) { return v > 0.0; });
}
inline Expr sqrt(const Expr& a) {
  return detail::unary(Op::Sqrt, a, [](double v) { return std::sqrt(v); }, [](double v) { return v >= 0.0; });
}
inline Expr atan(const Expr& a) { return detail::unary(Op::Atan, a, [](double v) { return std::atan(v); }, detail::anywhere); }

inline Expr pow(const Expr& base, const Expr& exponent) {
  if (exponent.is_constant(0.0)) return Expr(1.0);
  if (exponent.is_constant(1.0)) return base;
  if (base.is_constant(1.0)) return Expr(1.0);
  if (base.is_constant() && exponent.is_constant()) {
    const double b = base.constant_value();
    const double p = exponent.constant_value();
    const bool ok = detail::is_integer(p) ? !(b == 0.0 && p < 0.0) : b > 0.0;
    if (ok && std::isfinite(std::pow(b, p))) return Expr(std::pow(b, p));
  }
  // sqrt(u)^2 == u wherever the left side is defined.
  if (base.op() == Op::Sqrt && exponent.is_constant(2.0)) return base.child(0);
  return Expr::make(Op::Pow, {base, exponent});
}

inline Expr pow(const Expr& base, double exponent) { return pow(base, Expr(exponent)); }

/// Rebuilds e bottom-up through the folding builders. Value-preserving at
/// every admissible point; idempotent.
inline Expr simplify(const Expr& e) {
  switch (e.op()) {
    case Op::Constant:
    case Op::Variable:
      return e;
    default:
      break;
  }
  const Expr a = simplify(e.child(0));
  switch (e.op()) {
    case Op::Neg: return -a;
    case Op::Sin: return sin(a);
    case Op::Cos: return cos(a);
    case Op::Tan: return tan(a);
    case Op::Exp: return exp(a);
    case Op::Log: return log(a);
    case Op::Sqrt: return sqrt(a);
    case Op::Atan: return atan(a);
    default: break;
  }
  const Expr b = simplify(e.child(1));
  switch (e.op()) {
    case Op::Add: return a + b;
    case Op::Sub: return a - b;
    case Op::Mul: return a * b;
    case Op::Div: return a / b;
    case Op::Pow: return pow(a, b);
    default: throw InternalError("simplify: unhandled node");
  }
}

// ---------------------------------------------------------------------------
// Differentiation

inline Expr differentiate(const Expr& e, std::string_view var) {
  switch (e.op()) {
    case Op::Constant:
      return Expr(0.0);
    case Op::Variable:
      return Expr(e.name() == var ? 1.0 : 0.0);
    default:
      break;
  }
  const Expr& a = e.child(0);
  const Expr da = differentiate(a, var);
  switch (e.op()) {
    case Op::Neg: return -da;
    case Op::Sin: return da * cos(a);
    case Op::Cos: return -(da * sin(a));
    case Op::Tan: return da / pow(cos(a), 2.0);
    case Op::Exp: return da * exp(a);
    case Op::Log: return da / a;
    case Op::Sqrt: return da / (Expr(2.0) * sqrt(a));
    case Op::Atan: return da / (Expr(1.0) + pow(a, 2.0));
    default: break;
  }
  const Expr& b = e.child(1);
  const Expr db = differentiate(b, var);
  switch (e.op()) {
    case Op::Add: return da + db;
    case Op::Sub: return da - db;
    case Op::Mul: return da * b + a * db;
    case Op::Div: return da / b - a * db / pow(b, 2.0);
    case Op::Pow: {
      if (db.is_constant(0.0)) {
        if (da.is_constant(0.0)) return Expr(0.0);
        if (b.is_constant()) return Expr(b.constant_value()) * pow(a, b.constant_value() - 1.0) * da;
        return b * pow(a, b - Expr(1.0)) * da;
      }
      if (da.is_constant(0.0)) return pow(a, b) * log(a) * db;
      return pow(a, b) * (db * log(a) + b * da / a);
    }
    default:
      throw InternalError("differentiate: unhandled node");
  }
}

// ---------------------------------------------------------------------------
// Evaluation

/// A named evaluation site: one finite value per declared variable.
class Point {
 public:
  Point() = default;
  Point(VariableList names, std::vector<double> values) : names_(std::move(names)), values_(std::move(values)) {
    if (names_.size() != values_.size()) throw Error("Point: names and values differ in length");
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (!std::isfinite(values_[i])) throw Error("Point: non-finite value for '" + names_[i] + "'");
      for (std::size_t j = 0; j < i; ++j)
        if (names_[j] == names_[i]) throw Error("Point: variable '" + names_[i] + "' listed twice");
    }
  }

  const VariableList& names() const noexcept { return names_; }
  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  /// Index of name in this point, or size() when absent.
  std::size_t find(std::string_view name) const {
    return static_cast<std::size_t>(std::find(names_.begin(), names_.end(), name) - names_.begin());
  }

 private:
  VariableList names_;
  std::vector<double> values_;
};

namespace detail {

[[noreturn]] inline void domain_fail(const char* reason, const Expr& e) { throw DomainError(reason, render(e)); }

template <class Lookup>
double eval(const Expr& e, const Lookup& lookup) {
  switch (e.op()) {
    case Op::Constant: return e.constant_value();
    case Op::Variable: return lookup(e);
    default: break;
  }
  const double a = eval(e.child(0), lookup);
  double r = 0.0;
  switch (e.op()) {
    case Op::Neg: return -a;
    case Op::Sin: return std::sin(a);
    case Op::Cos: return std::cos(a);
    case Op::Tan: r = std::tan(a); break;
    case Op::Exp: r = std::exp(a); break;
    case Op::Log:
      if (!(a > 0.0)) domain_fail("log of nonpositive value", e);
      return std::log(a);
    case Op::Sqrt:
      if (a < 0.0) domain_fail("sqrt of negative value", e);
      return std::sqrt(a);
    case Op::Atan: return std::atan(a);
    default: {
      const double b = eval(e.child(1), lookup);
      switch (e.op()) {
        case Op::Add: r = a + b; break;
        case Op::Sub: r = a - b; break;
        case Op::Mul: r = a * b; break;
        case Op::Div:
          if (b == 0.0) domain_fail("division by zero", e);
          r = a / b;
          break;
        case Op::Pow:
          if (is_integer(b)) {
            if (a == 0.0 && b < 0.0) domain_fail("zero to a negative power", e);
          } else if (!(a > 0.0) && !(a == 0.0 && b > 0.0)) {
            domain_fail("non-integer power of a nonpositive base", e);
          }
          r = std::pow(a, b);
          break;
        default:
          throw InternalError("evaluate: unhandled node");
      }
    }
  }
  if (!std::isfinite(r)) domain_fail("non-finite result", e);
  return r;
}

}  // namespace detail

/// Evaluates with variables looked up by their declared index.
inline double evaluate(const Expr& e, std::span<const double> x) {
  return detail::eval(e, [&](const Expr& v) -> double {
    if (v.index() >= x.size()) throw UndeclaredVariable(v.name());
    return x[v.index()];
  });
}

inline double evaluate(const Expr& e, const Point& p) {
  return detail::eval(e, [&](const Expr& v) -> double {
    if (v.index() < p.size() && p.names()[v.index()] == v.name()) return p[v.index()];
    const std::size_t at = p.find(v.name());
    if (at == p.size()) throw UndeclaredVariable(v.name());
    return p[at];
  });
}

// ---------------------------------------------------------------------------
// Structural utilities

inline void collect_variables(const Expr& e, std::set<std::string>& out) {
  if (e.is_variable()) {
    out.insert(e.name());
    return;
  }
  for (const Expr& c : e.children()) collect_variables(c, out);
}

inline std::set<std::string> free_variables(const Expr& e) {
  std::set<std::string> out;
  collect_variables(e, out);
  return out;
}

/// Replaces every variable of index i by replacements[i], folding as it rebuilds.
inline Expr substitute(const Expr& e, std::span<const Expr> replacements) {
  switch (e.op()) {
    case Op::Constant: return e;
    case Op::Variable:
      if (e.index() >= replacements.size()) throw UndeclaredVariable(e.name());
      return replacements[e.index()];
    default: break;
  }
  std::vector<Expr> kids;
  kids.reserve(e.children().size());
  for (const Expr& c : e.children()) kids.push_back(substitute(c, replacements));
  return simplify(Expr::make(e.op(), std::move(kids)));
}

/// Re-indexes variables against vars; throws UndeclaredVariable for names not in vars.
inline Expr bind_to(const Expr& e, const VariableList& vars) {
  switch (e.op()) {
    case Op::Constant: return e;
    case Op::Variable: {
      const auto it = std::find(vars.begin(), vars.end(), e.name());
      if (it == vars.end()) throw UndeclaredVariable(e.name());
      const auto idx = static_cast<std::size_t>(it - vars.begin());
      return idx == e.index() ? e : Expr::variable(e.name(), idx);
    }
    default: break;
  }
  std::vector<Expr> kids;
  kids.reserve(e.children().size());
  for (const Expr& c : e.children()) kids.push_back(bind_to(c, vars));
  return Expr::make(e.op(), std::move(kids));
}

inline std::size_t node_count(const Expr& e) {
  std::size_t n = 1;
  for (const Expr& c : e.children()) n += node_count(c);
  return n;
}

/// Variables x1..xn.
inline VariableList default_variables(std::size_t n, std::string_view prefix = "x") {
  VariableList v;
  v.reserve(n);
  for (std::size_t i = 1; i <= n; ++i) v.push_back(std::string(prefix) + std::to_string(i));
  return v;
}

/// Variable handles for vars, in order.
inline std::vector<Expr> variables_of(const VariableList& vars) {
  std::vector<Expr> out;
  out.reserve(vars.size());
  for (std::size_t i = 0; i < vars.size(); ++i) out.push_back(Expr::variable(vars[i], i));
  return out;
}

}  // namespace poissonkit
