#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace santa {

// Shapes are not conformable for the requested operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// NaN/Inf input or a degenerate value (zero norm, empty support).
class NumericError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// API misuse: bad arguments, out-of-range hyperparameters, unknown flags.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed lexicon/corpus/checkpoint record.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Gradient check could not be performed (e.g. the objective is not deterministic).
class CheckError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Suppressed decoding has no admissible token left.
class DecodingError : public std::runtime_error {
 public:
  DecodingError(const std::string& what, std::size_t step)
      : std::runtime_error(what + " (decode step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace santa
