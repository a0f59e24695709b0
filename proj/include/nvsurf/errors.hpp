// errors.hpp - exception hierarchy shared by the whole library.
//
// Two broad classes matter for callers (and for the CLI exit-status
// contract): invalid input (ValidationError and friends, exit 1) and
// numerical failure during an otherwise valid computation
// (NumericalError and friends, exit 2).

#pragma once

#include <stdexcept>
#include <string>

namespace nvsurf {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad user input: violated invariants, malformed files, infeasible queries.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Config/file parse problems; message names the offending key or cell.
class SchemaError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Physically or mathematically infeasible query domain (e.g. no grating
// period can phase-match the requested order).
class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A computation failed numerically on valid input.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Stationary solution is not unique; carries the dimension of the space of
// stationary solutions found.
class DegeneracyError : public NumericalError {
 public:
  DegeneracyError(const std::string& msg, int null_space_dim)
      : NumericalError(msg), null_space_dim(null_space_dim) {}
  int null_space_dim;
};

class StiffnessError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SingularityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class PoleError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class UnphysicalAbsorptionError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class UndefinedSnrError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegenerateOptimumError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace nvsurf
