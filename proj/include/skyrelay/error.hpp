#pragma once

#include <stdexcept>
#include <string>

namespace skyrelay {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid scenario or option values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a formula.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// No point satisfies the requested constraint set.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// The numerical machinery failed (line search, factorization, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace skyrelay
