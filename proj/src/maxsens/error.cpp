#include "maxsens/error.hpp"

namespace maxsens {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kAssembly: return "assembly";
    case ErrorCode::kConfiguration: return "configuration";
    case ErrorCode::kSolver: return "solver";
    case ErrorCode::kLocation: return "location";
    case ErrorCode::kSingularity: return "singularity";
    case ErrorCode::kProximity: return "proximity";
    case ErrorCode::kUndefinedRatio: return "undefined-ratio";
    case ErrorCode::kFit: return "fit";
    case ErrorCode::kInversion: return "inversion";
    case ErrorCode::kDetection: return "detection";
    case ErrorCode::kCompatibility: return "compatibility";
    case ErrorCode::kInverseCrime: return "inverse-crime";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

}  // namespace maxsens
