#pragma once

#include <stdexcept>
#include <string>

namespace sspace {

/// Coarse failure category; the C API and CLI map these onto status and exit codes.
enum class ErrorKind {
  Usage,     // invalid argument or spec
  Io,        // file missing, unreadable, unwritable
  Format,    // malformed container
  Mismatch,  // name/shape/dimension disagreement between inputs
  Numeric,   // non-finite data, zero norm, SVD failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage: return "usage";
    case ErrorKind::Io: return "io";
    case ErrorKind::Format: return "format";
    case ErrorKind::Mismatch: return "mismatch";
    case ErrorKind::Numeric: return "numeric";
  }
  return "unknown";
}

}  // namespace sspace
