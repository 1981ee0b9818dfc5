#pragma once

#include <stdexcept>
#include <string>

namespace knockforge {

// Process exit codes shared by the CLI and the error hierarchy.
enum class ExitCode : int {
  kSuccess = 0,
  kUsage = 2,
  kIo = 3,
  kDataContract = 4,
  kNumerical = 5,
};

class Error : public std::runtime_error {
 public:
  Error(const std::string& message, ExitCode code)
      : std::runtime_error(message), code_(code) {}
  ExitCode exit_code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

// A caller broke a documented precondition (shape, range, emptiness).
class ContractViolation : public Error {
 public:
  explicit ContractViolation(const std::string& message)
      : Error(message, ExitCode::kDataContract) {}
};

// Input is well-formed but carries no usable information (constant column,
// zero signal, zero trace).
class DegenerateInput : public Error {
 public:
  explicit DegenerateInput(const std::string& message)
      : Error(message, ExitCode::kDataContract) {}
};

// A matrix could not be repaired to positive semidefiniteness within budget.
class NonPsdError : public Error {
 public:
  NonPsdError(const std::string& message, double min_eigenvalue)
      : Error(message, ExitCode::kNumerical), min_eigenvalue_(min_eigenvalue) {}
  double min_eigenvalue() const noexcept { return min_eigenvalue_; }

 private:
  double min_eigenvalue_;
};

class NumericalFailure : public Error {
 public:
  explicit NumericalFailure(const std::string& message)
      : Error(message, ExitCode::kNumerical) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error(message, ExitCode::kIo) {}
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& message)
      : Error(message, ExitCode::kUsage) {}
};

}  // namespace knockforge
