#include "repclass/bench.hpp"

#include "repclass/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

namespace repclass {

void ProtocolSpec::validate() const {
  if (repeats < 1) throw Error(ErrorKind::Config, "repeats must be at least 1");
  if (per_class_train < 1) throw Error(ErrorKind::Config, "per_class_train must be at least 1");
  if (methods.empty()) throw Error(ErrorKind::Config, "protocol lists no methods");
  if (pca_dim && *pca_dim < 1) throw Error(ErrorKind::Config, "pca_dim must be positive");
  if (subsample_test && *subsample_test < 1) throw Error(ErrorKind::Config, "subsample_test must be positive");
  if (threads < 1) throw Error(ErrorKind::Config, "threads must be at least 1");
  if (chunk_size < 1) throw Error(ErrorKind::Config, "chunk_size must be at least 1");
  for (const auto& m : methods) {
    try {
      m.validate();
    } catch (const Error& e) {
      throw Error(ErrorKind::Config, e.what());
    }
  }
}

MetricRecord compute_metrics(std::span<const int> predicted, std::span<const int> truth, int class_count) {
  if (predicted.size() != truth.size()) {
    throw Error(ErrorKind::LengthMismatch, std::to_string(predicted.size()) + " predictions for " +
                                               std::to_string(truth.size()) + " labels");
  }
  if (truth.empty()) throw Error(ErrorKind::LengthMismatch, "no predictions to score");
  if (class_count < 1) throw Error(ErrorKind::LabelOutOfRange, "class count must be positive");
  const auto k = static_cast<std::size_t>(class_count);
  std::vector<std::int64_t> tp(k, 0), fp(k, 0), fn(k, 0);
  MetricRecord m;
  for (std::size_t s = 0; s < truth.size(); ++s) {
    const int p = predicted[s];
    const int t = truth[s];
    if (p < 0 || p >= class_count || t < 0 || t >= class_count) {
      throw Error(ErrorKind::LabelOutOfRange, "label outside 0.." + std::to_string(class_count - 1) +
                                                  " at position " + std::to_string(s));
    }
    if (p == t) {
      ++m.correct;
      ++tp[static_cast<std::size_t>(t)];
    } else {
      ++fp[static_cast<std::size_t>(p)];
      ++fn[static_cast<std::size_t>(t)];
    }
  }
  m.total = static_cast<std::int64_t>(truth.size());
  m.accuracy = static_cast<double>(m.correct) / static_cast<double>(m.total);
  m.precision.resize(k);
  m.recall.resize(k);
  m.f1.resize(k);
  double f1_sum = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    const double pd = static_cast<double>(tp[c] + fp[c]);
    const double rd = static_cast<double>(tp[c] + fn[c]);
    m.precision[c] = pd > 0 ? static_cast<double>(tp[c]) / pd : 0.0;
    m.recall[c] = rd > 0 ? static_cast<double>(tp[c]) / rd : 0.0;
    const double s = m.precision[c] + m.recall[c];
    m.f1[c] = s > 0 ? 2.0 * m.precision[c] * m.recall[c] / s : 0.0;
    f1_sum += m.f1[c];
  }
  m.macro_f1 = f1_sum / static_cast<double>(k);
  return m;
}

const MethodAggregate* BenchmarkResult::aggregate(std::string_view method) const {
  for (const auto& a : aggregates)
    if (a.method == method) return &a;
  return nullptr;
}

std::filesystem::path resolve_data_path(const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_absolute() || std::filesystem::exists(p)) return p;
  if (const char* root = std::getenv("REPCLASS_DATA_DIR"); root != nullptr && *root != '\0') {
    const auto candidate = std::filesystem::path(root) / p;
    if (std::filesystem::exists(candidate)) return candidate;
  }
  return p;
}

Dataset load_source(const DataSource& source) {
  if (source.path.empty()) throw Error(ErrorKind::Config, "data source has no path");
  const auto path = resolve_data_path(source.path);
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::Io, "dataset not found: " + path.string());
  if (!source.labels.empty()) {
    const auto labels = resolve_data_path(source.labels);
    if (!std::filesystem::exists(labels)) throw Error(ErrorKind::Io, "dataset not found: " + labels.string());
    return load_idx(path, labels);
  }
  return load_feature_table(path);
}

ProtocolData load_protocol_data(const ProtocolSpec& spec) {
  Dataset train = load_source(spec.train);
  Dataset test = load_source(spec.test).aligned_to(train);
  if (test.dimension() != train.dimension()) {
    throw Error(ErrorKind::DimensionMismatch, "train has dimension " + std::to_string(train.dimension()) +
                                                  ", test has " + std::to_string(test.dimension()));
  }
  return ProtocolData{std::move(train), std::move(test)};
}

namespace {

struct SplitData {
  Dataset train;
  Matrix test;
};

SplitData prepare_split(const ProtocolSpec& spec, const Dataset& pool, const Matrix& test, int repeat) {
  const SplitSpec split{spec.per_class_train, spec.seed, spec.repeats};
  Dataset train = stratified_sample(pool, split, repeat);
  if (!spec.pca_dim) return SplitData{std::move(train), test};
  if (*spec.pca_dim > std::min(train.dimension(), train.size())) {
    throw Error(ErrorKind::Config, "pca_dim " + std::to_string(*spec.pca_dim) + " exceeds min(d, n) of the split");
  }
  const PcaModel pca = pca_fit(train.features(), *spec.pca_dim);
  Matrix projected = pca_project(pca, train.features());
  Matrix projected_test = pca_project(pca, test);
  return SplitData{train.with_features(std::move(projected)), std::move(projected_test)};
}

// Classifies every test column; work is cut into fixed chunks so the result
// does not depend on the number of threads.
std::vector<ResidualReport> classify_all(const ClassifierSpec& spec, const FittedModel& model, const Matrix& test,
                                         Eigen::Index chunk_size, int threads) {
  const Eigen::Index m = test.cols();
  const Eigen::Index chunks = (m + chunk_size - 1) / chunk_size;
  std::vector<ResidualReport> reports(static_cast<std::size_t>(m));
  std::atomic<Eigen::Index> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&]() {
    for (;;) {
      const Eigen::Index chunk = next.fetch_add(1);
      if (chunk >= chunks) return;
      const Eigen::Index begin = chunk * chunk_size;
      const Eigen::Index width = std::min(chunk_size, m - begin);
      try {
        auto part = classify_batch(spec, model, test.middleCols(begin, width));
        for (Eigen::Index j = 0; j < width; ++j) {
          reports[static_cast<std::size_t>(begin + j)] = std::move(part[static_cast<std::size_t>(j)]);
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = chunks;
        return;
      }
    }
  };

  const int workers = static_cast<int>(std::min<Eigen::Index>(threads, chunks));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return reports;
}

MethodRun evaluate(const ClassifierSpec& spec, const SplitData& split, const std::vector<int>& truth, int class_count,
                   const ProtocolSpec& protocol, int repeat) {
  MethodRun run;
  run.method = spec.display_name();
  run.repeat = repeat;
  const auto start = std::chrono::steady_clock::now();
  try {
    const FittedModel model = fit(spec, split.train);
    auto reports = classify_all(spec, model, split.test, protocol.chunk_size, protocol.threads);
    run.predicted.reserve(reports.size());
    double iterations = 0.0;
    for (const auto& r : reports) {
      run.predicted.push_back(r.predicted);
      if (r.diagnostics) {
        iterations += r.diagnostics->iterations;
        if (!r.diagnostics->converged) ++run.unconverged;
      }
    }
    run.mean_iterations = reports.empty() ? 0.0 : iterations / static_cast<double>(reports.size());
    run.metrics = compute_metrics(run.predicted, truth, class_count);
    if (run.unconverged > 0) {
      spdlog::warn("{} repeat {}: {} of {} samples stopped at the iteration cap", run.method, repeat,
                   run.unconverged, reports.size());
    }
  } catch (const Error& e) {
    run.failed = true;
    run.error = e.what();
    run.error_kind = e.kind();
    run.predicted.clear();
    spdlog::error("{} repeat {} failed: {}", run.method, repeat, e.what());
  }
  run.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

MethodAggregate aggregate_runs(const std::string& method, const std::vector<const MethodRun*>& runs) {
  MethodAggregate agg;
  agg.method = method;
  std::vector<double> acc, f1;
  for (const MethodRun* r : runs) {
    if (r->failed) {
      ++agg.failed;
      continue;
    }
    acc.push_back(r->metrics.accuracy);
    f1.push_back(r->metrics.macro_f1);
  }
  agg.completed = static_cast<int>(acc.size());
  auto mean_std = [](const std::vector<double>& v, double& mean, double& sd) {
    if (v.empty()) {
      mean = std::nan("");
      sd = std::nan("");
      return;
    }
    double sum = 0.0;
    for (double x : v) sum += x;
    mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  };
  mean_std(acc, agg.accuracy_mean, agg.accuracy_std);
  mean_std(f1, agg.macro_f1_mean, agg.macro_f1_std);
  return agg;
}

Dataset evaluation_set(const ProtocolSpec& spec, const Dataset& test) {
  if (!spec.subsample_test || *spec.subsample_test >= test.size()) return test;
  return subsample(test, *spec.subsample_test, spec.seed);
}

}  // namespace

BenchmarkResult run_protocol(const ProtocolSpec& spec, const ProtocolData& data) {
  spec.validate();
  const Dataset test = evaluation_set(spec, data.test);

  BenchmarkResult result;
  result.protocol = spec.name;
  result.class_labels = data.train.original_labels();
  result.train_pool_size = data.train.size();
  result.test_size = test.size();
  result.test_subsampled = test.size() != data.test.size();
  result.pca_dim = spec.pca_dim;
  if (result.test_subsampled) {
    spdlog::info("{}: evaluating on {} of {} test samples (subsampled)", spec.name, test.size(), data.test.size());
  }

  const std::size_t method_count = spec.methods.size();
  std::vector<std::vector<MethodRun>> by_method(method_count);
  for (int r = 0; r < spec.repeats; ++r) {
    SplitData split;
    try {
      split = prepare_split(spec, data.train, test.features(), r);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Config || e.kind() == ErrorKind::InsufficientSamples) throw;
      for (std::size_t m = 0; m < method_count; ++m) {
        MethodRun failed;
        failed.method = spec.methods[m].display_name();
        failed.repeat = r;
        failed.failed = true;
        failed.error = e.what();
        failed.error_kind = e.kind();
        by_method[m].push_back(std::move(failed));
      }
      continue;
    }
    for (std::size_t m = 0; m < method_count; ++m) {
      by_method[m].push_back(evaluate(spec.methods[m], split, test.labels(), data.train.class_count(), spec, r));
      spdlog::info("{} {} repeat {}/{}: accuracy {:.4f}", spec.name, by_method[m].back().method, r + 1,
                   spec.repeats, by_method[m].back().metrics.accuracy);
    }
  }

  for (std::size_t m = 0; m < method_count; ++m) {
    std::vector<const MethodRun*> refs;
    for (const auto& run : by_method[m]) refs.push_back(&run);
    result.aggregates.push_back(aggregate_runs(spec.methods[m].display_name(), refs));
    for (auto& run : by_method[m]) result.runs.push_back(std::move(run));
  }
  return result;
}

BenchmarkResult run_protocol(const ProtocolSpec& spec) {
  spec.validate();
  return run_protocol(spec, load_protocol_data(spec));
}

std::vector<SweepRow> sweep_lambda(const ProtocolSpec& spec, const ClassifierSpec& base, std::span<const double> grid,
                                   const ProtocolData& data) {
  if (grid.empty()) throw Error(ErrorKind::Config, "lambda grid is empty");
  if (base.method != Method::CRNRC) throw Error(ErrorKind::Config, "lambda sweeps run CRNRC only");
  for (double l : grid) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw Error(ErrorKind::Config, "lambda grid values must be >= 0");
  }
  std::vector<SweepRow> rows;
  rows.reserve(grid.size());
  for (double l : grid) {
    ProtocolSpec one = spec;
    ClassifierSpec method = base;
    method.lambda = l;
    method.name = "CRNRC";
    one.methods = {method};
    BenchmarkResult r = run_protocol(one, data);
    rows.push_back(SweepRow{l, r.aggregates.front()});
  }
  return rows;
}

}  // namespace repclass
