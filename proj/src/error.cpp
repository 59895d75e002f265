#include "qlens/error.hpp"

namespace qlens {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid argument";
    case ErrorKind::kShapeMismatch: return "shape mismatch";
    case ErrorKind::kEmptyInput: return "empty input";
    case ErrorKind::kNonFinite: return "non-finite value";
    case ErrorKind::kBadMagic: return "bad magic";
    case ErrorKind::kBadVersion: return "bad version";
    case ErrorKind::kUnexpectedEof: return "unexpected end of file";
    case ErrorKind::kIo: return "i/o error";
    case ErrorKind::kNumerical: return "numerical failure";
  }
  return "unknown";
}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace qlens
