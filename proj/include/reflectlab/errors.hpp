#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace reflectlab {

/// Malformed tree, probability row, or node-set mismatch between a process and
/// the model it is used with.
class ModelError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Operation called outside its domain (e.g. conditional expectation at the
/// terminal level, an invalid stopping time, barrier preconditions).
class DomainError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// The implicit step is not well posed: mu * dt >= 1.
class StepSizeError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Bracketing or bisection failure in the scalar implicit solve, or a driver
/// that cannot be resolved exactly in rational mode.
class SolverError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Strict separation (L < U everywhere) required but not satisfied.
class SeparationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Exhaustive enumeration refused because it would exceed the budget.
class EnumerationOverflow : public std::runtime_error {
  public:
    EnumerationOverflow(std::string count, std::string budget, const std::string& what)
        : std::runtime_error("enumeration refused: " + what + " count " + count +
                             " exceeds budget " + budget),
          count_(std::move(count)),
          budget_(std::move(budget)) {}

    const std::string& count() const { return count_; }
    const std::string& budget() const { return budget_; }

  private:
    std::string count_;
    std::string budget_;
};

/// Scenario file problems, reported with 1-based line/column.
class ParseError : public std::runtime_error {
  public:
    ParseError(std::size_t line, std::size_t column, const std::string& message)
        : std::runtime_error("line " + std::to_string(line) + ", column " +
                             std::to_string(column) + ": " + message),
          line_(line),
          column_(column) {}

    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

  private:
    std::size_t line_;
    std::size_t column_;
};

}  // namespace reflectlab
