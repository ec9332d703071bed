#include "xtts/error.hpp"

namespace xtts {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage: return "usage";
    case ErrorKind::Config: return "config";
    case ErrorKind::Format: return "format";
    case ErrorKind::Io: return "io";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Data: return "data";
    case ErrorKind::State: return "state";
  }
  return "unknown";
}

}  // namespace xtts
