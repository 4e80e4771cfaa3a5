#pragma once

#include <stdexcept>
#include <string>

namespace lidarseg {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unreadable, missing, or malformed input data (files, manifests, calibration).
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite values encountered during loss evaluation or training.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace lidarseg
