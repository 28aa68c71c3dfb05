#include "repclass/error.hpp"

namespace repclass {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::CountMismatch: return "CountMismatch";
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::RaggedRows: return "RaggedRows";
    case ErrorKind::EmptyFile: return "EmptyFile";
    case ErrorKind::ZeroColumn: return "ZeroColumn";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::UnknownLabel: return "UnknownLabel";
    case ErrorKind::Io: return "Io";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Config: return "ConfigError";
  }
  return "Unknown";
}

ErrorCategory category_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument:
    case ErrorKind::Config:
      return ErrorCategory::Config;
    case ErrorKind::NotPositiveDefinite:
    case ErrorKind::RankDeficient:
      return ErrorCategory::Solver;
    default:
      return ErrorCategory::Data;
  }
}

}  // namespace repclass
