#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace vfest {

// Bad arguments or a precondition the caller could have checked.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A function evaluated outside its domain (e.g. Power form at mu <= 0).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed or unusable input data. `row` is 1-based over data rows, 0 when
// the problem is not tied to a single row.
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& what, std::size_t row = 0)
      : std::runtime_error(row ? "row " + std::to_string(row) + ": " + what : what),
        row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

// Numerical failure: non-finite evaluations, underflow, grid explosion.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Iterative solver gave up. Carries the best iterate so callers can inspect it.
class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, std::vector<double> best, double residual)
      : NumericalError(what), best_(std::move(best)), residual_(residual) {}
  const std::vector<double>& best_iterate() const noexcept { return best_; }
  double residual() const noexcept { return residual_; }

 private:
  std::vector<double> best_;
  double residual_;
};

}  // namespace vfest
