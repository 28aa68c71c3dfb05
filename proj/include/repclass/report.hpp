#pragma once

#include "repclass/bench.hpp"

#include <string>
#include <vector>

namespace repclass {

/// Bumped whenever a field of the machine-readable records changes.
inline constexpr const char* kResultsSchema = "repclass.results/1";
inline constexpr const char* kSweepSchema = "repclass.sweep/1";
inline constexpr const char* kManifestSchema = "repclass.manifest/1";

struct DatasetChecksum {
  std::string role;  // train, train_labels, test, test_labels
  std::string path;  // as written in the config
  std::string sha256;
};

struct RunManifest {
  std::string toolkit_version;
  std::string timestamp;  // UTC, ISO 8601
  std::string command;
  int threads = 1;
  std::string config;  // canonical config text; rerunnable as-is
  std::vector<DatasetChecksum> datasets;
};

std::string toolkit_version();
std::string utc_timestamp();

/// Checksums of every file named by the protocol's data sources.
std::vector<DatasetChecksum> checksum_sources(const ProtocolSpec& spec);

std::string render_manifest(const RunManifest& manifest);

/// One JSON object per line: a header, one record per (method, repeat), one
/// aggregate per method. Holds nothing that varies between identical reruns.
std::string render_results_jsonl(const BenchmarkResult& result, const RunManifest& manifest);

/// Wall-clock times per (method, repeat); kept apart from the results.
std::string render_timings_jsonl(const BenchmarkResult& result, const RunManifest& manifest);

/// Human-readable table, one row per method aggregate.
std::string render_results_table(const BenchmarkResult& result, const RunManifest& manifest);

std::string render_sweep_jsonl(const std::vector<SweepRow>& rows, const ProtocolSpec& spec, const RunManifest& manifest);

/// lambda, accuracy and F1 columns, tab separated, for plotting.
std::string render_sweep_tsv(const std::vector<SweepRow>& rows);

}  // namespace repclass
