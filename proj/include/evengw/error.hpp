#ifndef EVENGW_ERROR_HPP
#define EVENGW_ERROR_HPP

#include <stdexcept>
#include <string>

namespace evengw {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-range input (bad weights, empty lists, bad parameters).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Dimensions of two objects do not agree.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// A configured size cap (expansion terms, basis size, brute-force size) was exceeded.
class CapExceeded : public Error {
 public:
  using Error::Error;
};

/// A numerical routine failed to converge or produced an inconsistent result.
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace evengw

#endif  // EVENGW_ERROR_HPP
