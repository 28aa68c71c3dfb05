#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace repclass {

enum class ErrorKind {
  // linear algebra
  DimensionMismatch,
  NotPositiveDefinite,
  RankDeficient,
  NonFiniteValue,
  // data ingestion
  BadMagic,
  CountMismatch,
  TruncatedFile,
  RaggedRows,
  EmptyFile,
  ZeroColumn,
  InsufficientSamples,
  UnknownLabel,
  Io,
  // metrics
  LengthMismatch,
  LabelOutOfRange,
  // configuration / arguments
  InvalidArgument,
  Config,
};

std::string_view to_string(ErrorKind kind);

/// Exit-code category used by the command-line tool.
enum class ErrorCategory { Config = 2, Data = 3, Solver = 4 };

ErrorCategory category_of(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace repclass
