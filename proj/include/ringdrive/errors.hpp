#pragma once

#include <stdexcept>
#include <string>

namespace ringdrive {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArg : public Error {
 public:
  using Error::Error;
};

// Basis enumeration would exceed the configured state-count cap.
class DimensionCap : public Error {
 public:
  using Error::Error;
};

class ConvergenceFailure : public Error {
 public:
  using Error::Error;
};

class BasisMismatch : public Error {
 public:
  using Error::Error;
};

// A loss or gradient evaluated to inf/nan.
class NonFinite : public Error {
 public:
  using Error::Error;
};

}  // namespace ringdrive
