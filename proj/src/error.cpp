#include "ecvis/error.hpp"

namespace ecvis {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::BadHeader: return "BadHeader";
    case ErrorCode::DimOverflow: return "DimOverflow";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::NotDivisible: return "NotDivisible";
    case ErrorCode::BadScale: return "BadScale";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::UnsupportedOp: return "UnsupportedOp";
    case ErrorCode::NonScalarOutput: return "NonScalarOutput";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::DegenerateEigenvalue: return "DegenerateEigenvalue";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::SingleCluster: return "SingleCluster";
    case ErrorCode::CoincidentCentroids: return "CoincidentCentroids";
    case ErrorCode::NonFiniteCost: return "NonFiniteCost";
    case ErrorCode::TooFewChannels: return "TooFewChannels";
    case ErrorCode::BadGrid: return "BadGrid";
    case ErrorCode::SingleFrame: return "SingleFrame";
    case ErrorCode::BadAlpha: return "BadAlpha";
    case ErrorCode::BadSpec: return "BadSpec";
    case ErrorCode::BoxOutOfRange: return "BoxOutOfRange";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::SupervisionLeak: return "SupervisionLeak";
  }
  return "Unknown";
}

namespace {

std::string compose(ErrorCode code, const std::string& detail) {
  std::string msg(to_string(code).data());
  msg.append(": ").append(detail);
  return msg;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(compose(code, detail)), code_(code) {}

}  // namespace ecvis
