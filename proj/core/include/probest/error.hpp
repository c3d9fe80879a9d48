#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace probest {

/// Precondition on an argument was violated (bad size, out-of-range value).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Operation requires state the object does not carry (e.g. missing truth
/// probabilities).
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed text input. `line()` is 1-based and counts the header row.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Metric has no value for this input (AUC on a single-class sample).
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Post-hoc calibrator could not be fitted.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite loss encountered during gradient descent.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, std::size_t epoch, std::size_t batch)
      : std::runtime_error(what), epoch_(epoch), batch_(batch) {}
  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
};

}  // namespace probest
