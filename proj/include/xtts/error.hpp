#pragma once

#include <stdexcept>
#include <string>

namespace xtts {

enum class ErrorKind {
  Usage,   // bad flags or arguments
  Config,  // configuration or checkpoint/config mismatch
  Format,  // malformed file contents
  Io,      // unreadable or unwritable paths
  Shape,   // tensor shape contract violated
  Data,    // corpus or text content violates a precondition
  State,   // object used in an invalid state (e.g. consumed tape)
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace xtts
