#pragma once

#include <stdexcept>
#include <string>

namespace iqbart {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments or malformed input data.
class InputError : public Error {
 public:
  using Error::Error;
};

class MissingColumnError : public InputError {
 public:
  using InputError::InputError;
};

class NonFiniteError : public InputError {
 public:
  using InputError::InputError;
};

// A computation could not produce a finite result.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace iqbart
