#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace maxsens {

enum class ErrorCode {
  kInvalidArgument = 1,
  kParse,
  kAssembly,
  kConfiguration,
  kSolver,
  kLocation,
  kSingularity,
  kProximity,
  kUndefinedRatio,
  kFit,
  kInversion,
  kDetection,
  kCompatibility,
  kInverseCrime,
  kIo,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; the C API maps `code()` onto its
// status enum one to one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace maxsens
