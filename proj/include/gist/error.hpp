#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gist {

enum class ErrorCode {
  BadMagic,
  TruncatedPayload,
  NonFiniteValue,
  FormatError,
  IoError,
  ManifestParseError,
  MissingArtifact,
  ShapeMismatch,
  LengthMismatch,
  InvalidArgument,
  DegenerateMatrix,
  RankDeficient,
  RowMismatch,
  OutOfRange,
  SelfComparison,
  UnknownModel,
  UnknownTestSet,
  UnknownMetric,
  EmptyObjective,
  NoFaults,
  TooFewRows,
  TooFewClusters,
  MixedRuns,
  TooFewSamples,
  AllTied,
  TooFewModels,
  NotEnoughTypes,
  DimensionMismatch,
};

std::string_view to_string(ErrorCode code);

/// All toolkit failures surface as this exception; `code()` lets callers
/// branch without parsing the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gist
