#pragma once

#include <stdexcept>
#include <string>

namespace nfcast {

enum class ErrorKind {
  MissingColumn,
  MalformedRow,
  OutOfRange,
  NonFinite,
  TooFewWindows,
  VersionMismatch,
  Corrupt,
  ShapeMismatch,
  IndexOutOfBounds,
  NotScalar,
  EmptyMask,
  ClassOutOfRange,
  Degenerate,
  EmptySpace,
  KernelTooLarge,
  Diverged,
  ObjectiveFailure,
  InvalidArgument,
  Io,
};

const char* to_string(ErrorKind kind) noexcept;

// Every failure raised by the library carries a kind so callers (the CLI in
// particular) can map it to an exit code without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace nfcast
