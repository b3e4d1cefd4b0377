#pragma once

#include <stdexcept>
#include <string>

namespace preqinfo {

// Base of every error raised by the library. Callers that only need to know
// "something in preqinfo rejected the input" catch this.
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

class IncompatibleError : public Error {
 public:
  using Error::Error;
};

class MissingOperand : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  enum class Kind { BadMagic, Truncated, CountMismatch, BadValue, Io };

  ParseError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

#define PREQINFO_CHECK(cond, ExcType, msg) \
  do {                                     \
    if (!(cond)) throw ExcType(msg);       \
  } while (0)

}  // namespace preqinfo
