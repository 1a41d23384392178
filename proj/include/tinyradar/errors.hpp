#pragma once

#include <stdexcept>
#include <string>

namespace tinyradar {

// All library failures derive from Error so callers can catch one type and
// still dispatch on the concrete category (the CLI maps each to an exit code).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed container: bad magic, unsupported version, unknown tag.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Byte stream shorter (or longer) than its header declares.
class LengthError : public Error {
 public:
  using Error::Error;
};

// Argument or data outside the documented domain.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// An operation produced no result (e.g. a window longer than the recording).
class EmptyResultError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Non-finite input where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Call sequence violated (e.g. backward before forward).
class StateError : public Error {
 public:
  using Error::Error;
};

// Integer accumulator could overflow for the requested quantization.
class OverflowError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace tinyradar
