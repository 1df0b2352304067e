#pragma once

#include <stdexcept>
#include <string>

namespace vimlop {

enum class ErrorCode {
  kInvalidCovariance,
  kDomain,
  kEmptyInput,
  kTopology,
  kBehindCamera,
  kDegenerateOrientation,
  kDegenerateGeometry,
  kEmptyInliers,
  kInvalidInitialization,
  kCountShortfall,
  kIo,
  kParse,
  kConfig,
};

const char* to_string(ErrorCode code);

/// Exception carrying a machine-checkable category alongside the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vimlop
