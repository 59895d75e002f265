#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qlens {

enum class ErrorKind {
  kInvalidArgument,
  kShapeMismatch,
  kEmptyInput,
  kNonFinite,
  kBadMagic,
  kBadVersion,
  kUnexpectedEof,
  kIo,
  kNumerical,
};

std::string_view to_string(ErrorKind kind);

/// Exception type used across the library. The kind drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace qlens
