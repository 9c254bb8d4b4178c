#pragma once

// Recursive-descent parser for the expression grammar:
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?
//   primary := number | ident | ident '(' expr ')' | '(' expr ')'
//
// '^' is right-associative and binds tighter than unary minus, so -x^2 is
// -(x^2) and 2^-1 is 2^(-1). Numbers are decimal with an optional exponent.

#include <cctype>
#include <charconv>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "poissonkit/errors.hpp"
#include "poissonkit/expr.hpp"

namespace poissonkit {

namespace detail {

class Parser {
 public:
  Parser(std::string_view src, const VariableList& vars) : src_(src), vars_(vars) {}

  Expr run() {
    Expr e = expr();
    skip_space();
    if (pos_ != src_.size()) fail({"operator", "end of input"});
    return e;
  }

 private:
  Expr expr() {
    Expr lhs = term();
    for (;;) {
      const char c = peek();
      if (c != '+' && c != '-') return lhs;
      ++pos_;
      Expr rhs = term();
      lhs = Expr::make(c == '+' ? Op::Add : Op::Sub, {lhs, rhs});
    }
  }

  Expr term() {
    Expr lhs = unary();
    for (;;) {
      const char c = peek();
      if (c != '*' && c != '/') return lhs;
      ++pos_;
      Expr rhs = unary();
      lhs = Expr::make(c == '*' ? Op::Mul : Op::Div, {lhs, rhs});
    }
  }

  Expr unary() {
    if (peek() == '-') {
      ++pos_;
      return Expr::make(Op::Neg, {unary()});
    }
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (peek() == '^') {
      ++pos_;
      return Expr::make(Op::Pow, {base, unary()});
    }
    return base;
  }

  Expr primary() {
    const char c = peek();
    if (c == '(') {
      ++pos_;
      Expr inner = expr();
      expect(')');
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail({"number", "identifier", "'('", "'-'"});
  }

  Expr number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t n = 0;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_, ++n;
      return n;
    };
    std::size_t mantissa = digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      mantissa += digits();
    }
    if (mantissa == 0) {
      pos_ = start;
      fail({"digit"});
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (digits() == 0) fail({"exponent digits"});
    }
    double value = 0.0;
    const auto res = std::from_chars(src_.data() + start, src_.data() + pos_, value);
    if (res.ec != std::errc() || res.ptr != src_.data() + pos_) {
      pos_ = start;
      fail({"number"});
    }
    return Expr(value);
  }

  Expr identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      ++pos_;
    const std::string name(src_.substr(start, pos_ - start));
    const Op fn = function_op(name);
    if (fn != Op::Constant) {
      expect('(');
      Expr arg = expr();
      expect(')');
      return Expr::make(fn, {arg});
    }
    for (std::size_t i = 0; i < vars_.size(); ++i)
      if (vars_[i] == name) return Expr::variable(name, i);
    throw UndeclaredVariable(name);
  }

  static Op function_op(std::string_view name) {
    for (Op op : {Op::Sin, Op::Cos, Op::Tan, Op::Exp, Op::Log, Op::Sqrt, Op::Atan})
      if (function_name(op) == name) return op;
    return Op::Constant;
  }

  char peek() {
    skip_space();
    return pos_ < src_.size() ? src_[pos_] : '\0';
  }

  void expect(char c) {
    if (peek() != c) fail({std::string("'") + c + "'"});
    ++pos_;
  }

  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  [[noreturn]] void fail(std::vector<std::string> expected) {
    skip_space();
    const std::string found = pos_ < src_.size() ? "'" + std::string(1, src_[pos_]) + "'" : "end of input";
    throw ParseError(pos_, std::move(expected), found);
  }

  std::string_view src_;
  const VariableList& vars_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses src against the declared variables. Throws ParseError or UndeclaredVariable.
inline Expr parse(std::string_view src, const VariableList& vars) { return detail::Parser(src, vars).run(); }

}  // namespace poissonkit
