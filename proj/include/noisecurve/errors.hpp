#pragma once

#include <stdexcept>
#include <string>

namespace noisecurve {

// Stable numeric codes, mirrored one-to-one by the C API in noisecurve.h.
enum class ErrorCode : int {
  ok = 0,
  invalid_argument = 1,
  shape_mismatch = 2,
  config = 3,
  io = 4,
  format_magic = 5,
  format_header = 6,
  format_truncated = 7,
  degenerate_boundary = 8,
  numeric = 9,
  verify_failed = 10,
  internal = 11,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace noisecurve
