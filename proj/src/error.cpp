#include "vimlop/error.hpp"

namespace vimlop {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidCovariance: return "invalid-covariance";
    case ErrorCode::kDomain: return "domain";
    case ErrorCode::kEmptyInput: return "empty-input";
    case ErrorCode::kTopology: return "topology";
    case ErrorCode::kBehindCamera: return "behind-camera";
    case ErrorCode::kDegenerateOrientation: return "degenerate-orientation";
    case ErrorCode::kDegenerateGeometry: return "degenerate-geometry";
    case ErrorCode::kEmptyInliers: return "empty-inliers";
    case ErrorCode::kInvalidInitialization: return "invalid-initialization";
    case ErrorCode::kCountShortfall: return "count-shortfall";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kConfig: return "config";
  }
  return "unknown";
}

}  // namespace vimlop
