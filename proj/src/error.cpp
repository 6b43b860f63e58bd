#include "nld/error.hpp"

namespace nld {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::shape_mismatch: return "shape mismatch";
    case ErrorCode::non_finite: return "non-finite value";
    case ErrorCode::empty_acquisition: return "empty acquisition";
    case ErrorCode::degenerate_calibration: return "degenerate calibration";
    case ErrorCode::underdetermined: return "underdetermined";
    case ErrorCode::nothing_to_calibrate: return "nothing to calibrate";
    case ErrorCode::geometry_mismatch: return "geometry mismatch";
    case ErrorCode::bad_magic: return "bad magic";
    case ErrorCode::bad_version: return "bad version";
    case ErrorCode::bad_dtype: return "bad dtype";
    case ErrorCode::truncated: return "truncated payload";
    case ErrorCode::io: return "i/o error";
    case ErrorCode::config: return "configuration error";
  }
  return "unknown";
}

}  // namespace nld
