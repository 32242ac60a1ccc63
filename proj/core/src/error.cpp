#include "nfcast/error.hpp"

namespace nfcast {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::MalformedRow: return "MalformedRow";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::TooFewWindows: return "TooFewWindows";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::Corrupt: return "Corrupt";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::IndexOutOfBounds: return "IndexOutOfBounds";
    case ErrorKind::NotScalar: return "NotScalar";
    case ErrorKind::EmptyMask: return "EmptyMask";
    case ErrorKind::ClassOutOfRange: return "ClassOutOfRange";
    case ErrorKind::Degenerate: return "Degenerate";
    case ErrorKind::EmptySpace: return "EmptySpace";
    case ErrorKind::KernelTooLarge: return "KernelTooLarge";
    case ErrorKind::Diverged: return "Diverged";
    case ErrorKind::ObjectiveFailure: return "ObjectiveFailure";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

}  // namespace nfcast
