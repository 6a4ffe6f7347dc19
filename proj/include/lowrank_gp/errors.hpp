#pragma once

#include <stdexcept>
#include <string>

namespace lowrank_gp {

/// Invalid argument or violated precondition (bad spec, dimension mismatch,
/// out-of-range k, ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Factorization or iteration failed in a way the caller cannot fix by
/// changing arguments.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, double condition_estimate = 0.0)
      : std::runtime_error(what), condition_estimate_(condition_estimate) {}

  double condition_estimate() const noexcept { return condition_estimate_; }

 private:
  double condition_estimate_;
};

/// Problem size exceeds a configured dense-algebra cap.
class CapacityError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Malformed experiment configuration or CLI invocation.
class ConfigError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// CSV ingestion failure; line is 1-based (0 when not line-specific).
class IngestError : public DomainError {
 public:
  IngestError(const std::string& what, std::size_t line)
      : DomainError(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace lowrank_gp
