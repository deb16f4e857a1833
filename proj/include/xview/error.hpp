// Error taxonomy shared by all xview components.
//
// Every failure mode surfaces as a distinct exception type so callers (and
// the CLI's exit-status mapping) can tell shape bugs from bad files from
// diverged training runs.

#ifndef XVIEW_ERROR_HPP
#define XVIEW_ERROR_HPP

#include <stdexcept>
#include <string>

namespace xview {

// Root of all xview exceptions.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor/operand shape disagreement. Messages name both shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid argument value (rate out of range, empty batch, log of <= 0, ...).
class ValueError : public Error {
 public:
  using Error::Error;
};

// API contract violation (backward on a non-scalar, missing labels, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Model or experiment configuration rejected during validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// CTC target that no alignment of the given length can produce.
class InfeasibleTargetError : public Error {
 public:
  using Error::Error;
};

// Base for dataset/checkpoint file problems.
class IoError : public Error {
 public:
  using Error::Error;
};

// Bad magic bytes or unsupported container version.
class FormatError : public IoError {
 public:
  using IoError::IoError;
};

// File ends before the payload the header promised.
class TruncatedError : public IoError {
 public:
  using IoError::IoError;
};

// Payload decoded but violates a domain invariant (e.g. CTC-infeasible
// labels); the offending record is named in the message.
class DataValidationError : public IoError {
 public:
  using IoError::IoError;
};

// Training loss became non-finite.
class DivergedError : public Error {
 public:
  using Error::Error;
};

// Metric is undefined for the given inputs (e.g. PER over empty references).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace xview

#endif  // XVIEW_ERROR_HPP
