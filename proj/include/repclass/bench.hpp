#pragma once

#include "repclass/classifiers.hpp"
#include "repclass/data.hpp"
#include "repclass/error.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace repclass {

/// Where a split comes from: an IDX pair when `labels` is set, otherwise a
/// feature table (text or binary container).
struct DataSource {
  std::string path;
  std::string labels;
};

struct ProtocolSpec {
  std::string name = "protocol";
  DataSource train;
  DataSource test;
  Eigen::Index per_class_train = 50;
  int repeats = 10;
  std::vector<ClassifierSpec> methods;
  std::optional<Eigen::Index> pca_dim;
  std::uint64_t seed = 0;
  /// Evaluate on a fixed uniform subset of the test set (drawn from `seed`).
  std::optional<Eigen::Index> subsample_test;
  /// Worker threads for per-sample classification. Results do not depend on it.
  int threads = 1;
  /// Test samples per work unit. Results depend on it only through floating-point
  /// blocking, so it is part of the reproducible configuration.
  Eigen::Index chunk_size = 256;

  void validate() const;
};

struct MetricRecord {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f1;
  std::int64_t correct = 0;
  std::int64_t total = 0;
};

/// Accuracy plus per-class precision/recall/F1; a class with no true positives
/// gets F1 = 0 and still counts in the macro average over all K classes.
MetricRecord compute_metrics(std::span<const int> predicted, std::span<const int> truth, int class_count);

struct MethodRun {
  std::string method;  // display name
  int repeat = 0;
  bool failed = false;
  std::string error;
  ErrorKind error_kind = ErrorKind::InvalidArgument;  // meaningful only when failed
  MetricRecord metrics;
  std::int64_t unconverged = 0;
  double mean_iterations = 0.0;
  double wall_seconds = 0.0;  // not part of the reproducible output
  std::vector<int> predicted;
};

struct MethodAggregate {
  std::string method;
  int completed = 0;
  int failed = 0;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;
  double macro_f1_mean = 0.0;
  double macro_f1_std = 0.0;
};

struct BenchmarkResult {
  std::string protocol;
  std::vector<std::int64_t> class_labels;  // original label of each dense id
  Eigen::Index train_pool_size = 0;
  Eigen::Index test_size = 0;
  bool test_subsampled = false;
  std::optional<Eigen::Index> pca_dim;
  std::vector<MethodRun> runs;             // method-major, then repeat
  std::vector<MethodAggregate> aggregates; // one per method, in spec order

  const MethodAggregate* aggregate(std::string_view method) const;
};

struct ProtocolData {
  Dataset train;
  Dataset test;  // labels aligned to train's dense ids
};

/// Absolute paths are used as given; relative paths are tried against the
/// working directory, then against $REPCLASS_DATA_DIR.
std::filesystem::path resolve_data_path(const std::string& path);

Dataset load_source(const DataSource& source);
ProtocolData load_protocol_data(const ProtocolSpec& spec);

/// sample -> optional PCA (fit on the sampled train split) -> fit -> classify -> metrics,
/// for every repeat and method. A failing method is recorded, not rethrown.
BenchmarkResult run_protocol(const ProtocolSpec& spec, const ProtocolData& data);
BenchmarkResult run_protocol(const ProtocolSpec& spec);

struct SweepRow {
  double lambda = 0.0;
  MethodAggregate aggregate;
};

/// CRNRC at every lambda in `grid`, on the same splits. `base` supplies the
/// ADMM settings; its method must be CRNRC.
std::vector<SweepRow> sweep_lambda(const ProtocolSpec& spec, const ClassifierSpec& base, std::span<const double> grid,
                                   const ProtocolData& data);

}  // namespace repclass
