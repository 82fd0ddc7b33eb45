#include "gist/log.hpp"

#include "gist/error.hpp"

#include <iostream>
#include <mutex>

namespace gist {
namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

WarningSink& sink() {
  static WarningSink s = [](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; };
  return s;
}

}  // namespace

void warn(std::string_view message) {
  std::lock_guard lock(sink_mutex());
  if (sink()) sink()(message);
}

WarningSink set_warning_sink(WarningSink s) {
  std::lock_guard lock(sink_mutex());
  auto previous = std::move(sink());
  sink() = std::move(s);
  return previous;
}

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ManifestParseError: return "ManifestParseError";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateMatrix: return "DegenerateMatrix";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::RowMismatch: return "RowMismatch";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::SelfComparison: return "SelfComparison";
    case ErrorCode::UnknownModel: return "UnknownModel";
    case ErrorCode::UnknownTestSet: return "UnknownTestSet";
    case ErrorCode::UnknownMetric: return "UnknownMetric";
    case ErrorCode::EmptyObjective: return "EmptyObjective";
    case ErrorCode::NoFaults: return "NoFaults";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::TooFewClusters: return "TooFewClusters";
    case ErrorCode::MixedRuns: return "MixedRuns";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::AllTied: return "AllTied";
    case ErrorCode::TooFewModels: return "TooFewModels";
    case ErrorCode::NotEnoughTypes: return "NotEnoughTypes";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
  }
  return "Unknown";
}

}  // namespace gist
