#pragma once

#include <stdexcept>
#include <string>

namespace cohnet {

enum class ErrorKind {
  InvalidArgument,
  BadMagic,
  Truncated,
  DimensionOverflow,
  ShapeMismatch,
  Io,
  NumericalAbort,
  NoValidPixels,
  Undefined,
};

// Single exception type for the library; callers switch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorKind::InvalidArgument, what);
}

}  // namespace cohnet
