#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace mfg {

// Input outside the mathematical domain of a primitive (c <= 0, a <= 0, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Iterative routine failed to reach its tolerance.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, double lo, double hi)
      : std::runtime_error(what), lo_(lo), hi_(hi) {}
  double bracket_lo() const { return lo_; }
  double bracket_hi() const { return hi_; }

 private:
  double lo_;
  double hi_;
};

// Caller broke a documented precondition (shape mismatch, empty history).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Non-finite value during Euler stepping.
class SimulationError : public std::runtime_error {
 public:
  SimulationError(const std::string& what, std::size_t scenario,
                  std::size_t path, std::size_t step)
      : std::runtime_error(what + " (scenario " + std::to_string(scenario) +
                           ", path " + std::to_string(path) + ", step " +
                           std::to_string(step) + ")"),
        scenario_(scenario),
        path_(path),
        step_(step) {}
  std::size_t scenario() const { return scenario_; }
  std::size_t path() const { return path_; }
  std::size_t step() const { return step_; }

 private:
  std::size_t scenario_;
  std::size_t path_;
  std::size_t step_;
};

// NaN loss or objective during training; carries the noise seed of the batch.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, std::uint64_t batch_seed)
      : std::runtime_error(what + " (batch seed " +
                           std::to_string(batch_seed) + ")"),
        batch_seed_(batch_seed) {}
  std::uint64_t batch_seed() const { return batch_seed_; }

 private:
  std::uint64_t batch_seed_;
};

// Malformed file: weights, config. Line is 1-based, offset 1-based column.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t offset)
      : std::runtime_error(what + " at line " + std::to_string(line) +
                           ", offset " + std::to_string(offset)),
        line_(line),
        offset_(offset) {}
  std::size_t line() const { return line_; }
  std::size_t offset() const { return offset_; }

 private:
  std::size_t line_;
  std::size_t offset_;
};

class VersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mfg
