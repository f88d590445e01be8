#pragma once

#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sqswap {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CapacityExceeded : public Error {
 public:
  using Error::Error;
};

class NonNormalizedInput : public Error {
 public:
  using Error::Error;
};

class BasisMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidSplit : public Error {
 public:
  using Error::Error;
};

class DegenerateWorkingPoint : public Error {
 public:
  using Error::Error;
};

class DenominatorNonPositive : public Error {
 public:
  using Error::Error;
};

class BoundaryPhase : public Error {
 public:
  using Error::Error;
};

class ZeroFringeAmplitude : public Error {
 public:
  using Error::Error;
};

class NonNormalizedDistribution : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

using WarningHandler = std::function<void(std::string_view)>;

/// Process-wide sink for soft warnings (norm drift, validity regime).
inline WarningHandler& warning_handler() {
  static WarningHandler handler = [](std::string_view msg) {
    std::cerr << "sqswap warning: " << msg << '\n';
  };
  return handler;
}

inline void warn(const std::string& msg) {
  if (auto& h = warning_handler()) h(msg);
}

}  // namespace sqswap
