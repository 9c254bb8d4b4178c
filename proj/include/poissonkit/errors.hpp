#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace poissonkit {

/// Base of every error thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t position, std::vector<std::string> expected, const std::string& found)
      : Error(format(position, expected, found)), position_(position), expected_(std::move(expected)) {}

  std::size_t position() const noexcept { return position_; }
  const std::vector<std::string>& expected() const noexcept { return expected_; }

 private:
  static std::string format(std::size_t position, const std::vector<std::string>& expected,
                            const std::string& found) {
    std::string msg = "syntax error at position " + std::to_string(position) + ": expected ";
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i > 0) msg += (i + 1 == expected.size()) ? " or " : ", ";
      msg += expected[i];
    }
    msg += ", found " + found;
    return msg;
  }

  std::size_t position_;
  std::vector<std::string> expected_;
};

class UndeclaredVariable : public Error {
 public:
  explicit UndeclaredVariable(std::string name)
      : Error("undeclared variable '" + name + "'"), name_(std::move(name)) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

/// Evaluation outside the real domain of an operation (log of nonpositive, x/0, ...).
class DomainError : public Error {
 public:
  DomainError(std::string reason, std::string subexpression)
      : Error(reason + " in '" + subexpression + "'"),
        reason_(std::move(reason)),
        subexpression_(std::move(subexpression)) {}

  const std::string& reason() const noexcept { return reason_; }
  const std::string& subexpression() const noexcept { return subexpression_; }

 private:
  std::string reason_;
  std::string subexpression_;
};

/// The exclusion predicate rejected every sample; verification would be vacuous.
class EmptyDomainError : public Error {
 public:
  using Error::Error;
};

/// Two computations that must agree by construction disagreed.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace poissonkit
