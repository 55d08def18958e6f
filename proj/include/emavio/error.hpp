#pragma once

#include <stdexcept>
#include <string>

namespace emavio {

// Base for every error raised by the library. The CLI maps any of these to a
// nonzero exit status.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not conform for an op.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value or combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Caller broke a precondition (empty list, non-scalar loss, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Input sits too close to a singularity (gimbal lock).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// backward() found gradients already populated; zero_grad() first.
class GradientStateError : public Error {
 public:
  using Error::Error;
};

// Loss became non-finite during training.
class TrainingDivergence : public Error {
 public:
  TrainingDivergence(const std::string& what, long step) : Error(what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Text format violation with the 1-based line where it happened.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

enum class DataErrorCode { kVersionMismatch, kTruncated, kChecksumMismatch, kMalformed };

class DatasetError : public Error {
 public:
  DatasetError(DataErrorCode code, const std::string& what) : Error(what), code_(code) {}
  DataErrorCode code() const { return code_; }

 private:
  DataErrorCode code_;
};

}  // namespace emavio
