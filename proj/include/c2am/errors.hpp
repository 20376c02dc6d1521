#pragma once

#include <stdexcept>
#include <string>

namespace c2am {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dimension or channel mismatch between two inputs.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A precondition on argument values failed (empty mask, n < 2, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents: bad magic, truncation, unparsable CSV rows.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Filesystem failure.
class IoError : public Error {
 public:
  using Error::Error;
};

// Unknown or invalid configuration key/value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace c2am
