#pragma once

#include "repclass/bench.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace repclass {

/// A parsed run configuration.
///
/// The file is INI-style:
///
///   [protocol]   name, seed, repeats, per_class_train, pca_dim, subsample_test, chunk_size, threads
///   [data]       train, train_labels, test, test_labels
///   [method.ID]  type (NSC|SRC|CRC|NRC|CRNRC), lambda, mu, tol, max_iter, ridge
///   [sweep]      grid, method (ID of the CRNRC section supplying ADMM settings)
///
/// `#` and `;` start comment lines. Unknown sections or keys are rejected.
struct RunConfig {
  ProtocolSpec protocol;
  std::vector<double> sweep_grid;
  std::string sweep_method;  // empty: first CRNRC method
};

/// Throws Error(Config) with the offending key or line.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Only the [method.*] sections, for single-sample classification; the other
/// sections may be present but are not required.
std::vector<ClassifierSpec> load_methods(const std::filesystem::path& path);

/// Accepts either a config file or a manifest.json written by a previous run.
RunConfig load_config_or_manifest(const std::filesystem::path& path);

/// Canonical text form; parse_config(render_config(c)) reproduces c. Execution
/// settings that cannot change results (threads) are left out.
std::string render_config(const RunConfig& config);

/// "0,1e-4,1e-3" -> values; whitespace allowed. Throws Error(Config) on bad or empty input.
std::vector<double> parse_grid(const std::string& text);

/// Formats a double so that parsing it back yields the same value.
std::string format_real(double value);

}  // namespace repclass
