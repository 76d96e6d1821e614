#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace samba {

enum class ErrorCode {
  MalformedFile,
  UnsupportedDepth,
  InconsistentStack,
  UnsupportedChannelCount,
  NonPositiveSigma,
  InvalidConfig,
  EmptyPath,
  DegeneratePolygon,
  OutOfBounds,
  NoLabels,
  EmptyCounts,
  EmptyTrainingSet,
  DimensionMismatch,
  FeatureMismatch,
  MalformedModel,
  UnsupportedVersion,
  BackendUnavailable,
  InferenceFailure,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every engine failure surfaces as this exception; `code()` is what callers
/// (HTTP status mapping, CLI exit codes) switch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace samba
