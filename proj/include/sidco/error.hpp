#pragma once

#include <stdexcept>
#include <string>

namespace sidco {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A precondition on the arguments was violated (dimensions, ranges, NaN).
class InvalidInput : public Error {
public:
  using Error::Error;
};

/// An iterative kernel hit its iteration cap without converging.
class NumericsFailure : public Error {
public:
  using Error::Error;
};

/// A matrix that must have full rank does not.
class RankDeficient : public Error {
public:
  using Error::Error;
};

/// A frame vector is collinear with another one, so no trust region exists.
class DegenerateVector : public Error {
public:
  using Error::Error;
};

/// A file could not be read, written or parsed.
class FormatError : public Error {
public:
  using Error::Error;
};

} // namespace sidco
