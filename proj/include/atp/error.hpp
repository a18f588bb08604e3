#pragma once

#include <stdexcept>
#include <string>

namespace atp {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input could not be parsed (malformed JSON, TSV, binary container).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Input parsed but violates a documented invariant or precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// File-system level failure: missing file, unreadable, unwritable.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace atp
