#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace weakvar {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters, tolerances or option combinations.
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// The state does not decay at the grid boundary or the grid does not contain the model's support.
class DomainTooSmallError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Conditioning on a position where the density is below the node threshold.
class NodeUndefinedError : public Error {
 public:
  using Error::Error;
};

class UnsupportedOracleError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class InstabilityError : public Error {
 public:
  InstabilityError(const std::string& what, std::size_t step)
      : Error("step " + std::to_string(step) + ": " + what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class DegenerateStateError : public Error {
 public:
  using Error::Error;
};

}  // namespace weakvar
