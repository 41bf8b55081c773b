#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ecvis {

enum class ErrorCode {
  BadMagic,
  BadHeader,
  DimOverflow,
  TruncatedPayload,
  IoFailure,
  NotDivisible,
  BadScale,
  ShapeMismatch,
  UnsupportedOp,
  NonScalarOutput,
  NonFiniteValue,
  NoConvergence,
  DegenerateEigenvalue,
  TooFewPoints,
  SingleCluster,
  CoincidentCentroids,
  NonFiniteCost,
  TooFewChannels,
  BadGrid,
  SingleFrame,
  BadAlpha,
  BadSpec,
  BoxOutOfRange,
  BadConfig,
  DivergenceDetected,
  SupervisionLeak,
};

std::string_view to_string(ErrorCode code);

/// Every failure in the library is reported through this exception; `code()`
/// identifies the condition, `what()` carries the human readable detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ecvis
