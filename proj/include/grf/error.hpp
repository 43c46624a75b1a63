#pragma once

#include <stdexcept>
#include <string>

namespace grf {

/// Broad failure classes. The CLI maps these onto process exit codes.
enum class ErrorKind {
  Usage,    // bad flags or config
  Data,     // missing/corrupt input, unknown relation, invalid id
  Numeric,  // shape mismatch, non-finite values
};

enum class ErrorCode {
  Config,
  Io,
  Format,
  Version,
  UnknownRelation,
  InvalidId,
  EmptyGrounding,
  UnsupportedTrace,
  Overflow,
  Shape,
  NonFinite,
};

inline ErrorKind kind_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::Config:
      return ErrorKind::Usage;
    case ErrorCode::Shape:
    case ErrorCode::NonFinite:
      return ErrorKind::Numeric;
    default:
      return ErrorKind::Data;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorKind kind() const noexcept { return kind_of(code_); }

 private:
  ErrorCode code_;
};

/// Exit codes: 0 success, 2 usage, 3 data, 4 numeric.
inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage:
      return 2;
    case ErrorKind::Data:
      return 3;
    case ErrorKind::Numeric:
      return 4;
  }
  return 1;
}

}  // namespace grf
