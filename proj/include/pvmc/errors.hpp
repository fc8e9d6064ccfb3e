#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pvmc {

/// Violated precondition on an argument (empty input, bad count, ...).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A combine/identity pair handed to a scan that does not behave as promised.
class ScanConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Importance ratio with a zero proposal density in the denominator.
class IllPosedWeightsError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Numerical breakdown at a given time step (non-SPD covariance, all-zero weights).
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, std::size_t time_index)
      : std::runtime_error(what + " (t=" + std::to_string(time_index) + ")"),
        time_index_(time_index) {}
  std::size_t time_index() const noexcept { return time_index_; }

 private:
  std::size_t time_index_;
};

class TrainingFailure : public std::runtime_error {
 public:
  TrainingFailure(const std::string& what, std::size_t step)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class UnsupportedModelError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Brute-force enumeration refused because the trajectory count is too large.
class SizeGuardError : public std::length_error {
 public:
  using std::length_error::length_error;
};

}  // namespace pvmc
