#pragma once

#include <stdexcept>
#include <string>

namespace propen {

// Base of everything the library throws. The C API maps each subclass to a
// distinct status code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Matching produced no pairs; the caller should relax delta_x / delta_y.
class EmptyMatchError : public Error {
 public:
  using Error::Error;
};

class NonFiniteError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

std::string dimension_message(const char* what, long expected, long actual);

}  // namespace propen
