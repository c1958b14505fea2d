#pragma once

#include <stdexcept>
#include <string>

namespace handobj {

enum class ErrorKind {
  Io,               // missing/unreadable file
  Parse,            // malformed input record
  InvalidArgument,  // bad parameter or index
  Geometry,         // geometric precondition (watertightness, degeneracy, ...)
  Divergence,       // numerical blow-up in an iterative procedure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Process exit code used by the command-line tool for each error kind.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Geometry:
      return 3;
    case ErrorKind::Divergence:
      return 4;
    default:
      return 2;
  }
}

}  // namespace handobj
