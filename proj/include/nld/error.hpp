#pragma once

#include <stdexcept>
#include <string>

namespace nld {

enum class ErrorCode {
  invalid_argument,
  shape_mismatch,
  non_finite,
  empty_acquisition,
  degenerate_calibration,
  underdetermined,
  nothing_to_calibrate,
  geometry_mismatch,
  bad_magic,
  bad_version,
  bad_dtype,
  truncated,
  io,
  config,
};

const char* to_string(ErrorCode code);

// Every failure raised by the library carries a code so callers (and the CLI)
// can tell file-format errors apart from numerical ones.
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

}  // namespace nld
