#include "repclass/report.hpp"

#include "repclass/config.hpp"
#include "repclass/digest.hpp"

#include "json.hpp"

#include <chrono>
#include <ctime>
#include <iomanip>
#include <sstream>

#ifndef REPCLASS_VERSION
#define REPCLASS_VERSION "0.0.0"
#endif

namespace repclass {

using nlohmann::ordered_json;

std::string toolkit_version() { return REPCLASS_VERSION; }

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<DatasetChecksum> checksum_sources(const ProtocolSpec& spec) {
  std::vector<DatasetChecksum> out;
  auto add = [&](const char* role, const std::string& path) {
    if (path.empty()) return;
    out.push_back(DatasetChecksum{role, path, sha256_file(resolve_data_path(path))});
  };
  add("train", spec.train.path);
  add("train_labels", spec.train.labels);
  add("test", spec.test.path);
  add("test_labels", spec.test.labels);
  return out;
}

namespace {

ordered_json datasets_json(const std::vector<DatasetChecksum>& datasets) {
  ordered_json arr = ordered_json::array();
  for (const auto& d : datasets) arr.push_back({{"role", d.role}, {"path", d.path}, {"sha256", d.sha256}});
  return arr;
}

ordered_json aggregate_json(const MethodAggregate& a) {
  return {{"method", a.method},
          {"completed", a.completed},
          {"failed", a.failed},
          {"accuracy_mean", a.accuracy_mean},
          {"accuracy_std", a.accuracy_std},
          {"macro_f1_mean", a.macro_f1_mean},
          {"macro_f1_std", a.macro_f1_std}};
}

ordered_json header_json(const char* schema, const RunManifest& manifest) {
  return {{"record", "header"},
          {"schema", schema},
          {"manifest", "manifest.json"},
          {"config_sha256", sha256_string(manifest.config)},
          {"datasets", datasets_json(manifest.datasets)}};
}

std::string percent(double v) {
  if (std::isnan(v)) return "n/a";
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << 100.0 * v;
  return out.str();
}

}  // namespace

std::string render_manifest(const RunManifest& manifest) {
  ordered_json j = {{"schema", kManifestSchema},
                    {"toolkit_version", manifest.toolkit_version},
                    {"timestamp", manifest.timestamp},
                    {"command", manifest.command},
                    {"threads", manifest.threads},
                    {"config_sha256", sha256_string(manifest.config)},
                    {"config", manifest.config},
                    {"datasets", datasets_json(manifest.datasets)}};
  return j.dump(2) + "\n";
}

std::string render_results_jsonl(const BenchmarkResult& result, const RunManifest& manifest) {
  std::ostringstream out;
  ordered_json header = header_json(kResultsSchema, manifest);
  header["protocol"] = result.protocol;
  header["class_labels"] = result.class_labels;
  header["train_pool_size"] = result.train_pool_size;
  header["test_size"] = result.test_size;
  header["test_subsampled"] = result.test_subsampled;
  header["pca_dim"] = result.pca_dim ? ordered_json(*result.pca_dim) : ordered_json(nullptr);
  out << header.dump() << '\n';

  for (const auto& run : result.runs) {
    ordered_json j = {{"record", "run"}, {"method", run.method}, {"repeat", run.repeat}};
    if (run.failed) {
      j["status"] = "failed";
      j["error"] = run.error;
    } else {
      const MetricRecord& m = run.metrics;
      j["status"] = "ok";
      j["accuracy"] = m.accuracy;
      j["macro_f1"] = m.macro_f1;
      j["correct"] = m.correct;
      j["total"] = m.total;
      j["precision"] = m.precision;
      j["recall"] = m.recall;
      j["f1"] = m.f1;
      j["unconverged"] = run.unconverged;
      j["mean_iterations"] = run.mean_iterations;
    }
    out << j.dump() << '\n';
  }
  for (const auto& a : result.aggregates) {
    ordered_json j = {{"record", "aggregate"}};
    j.update(aggregate_json(a));
    out << j.dump() << '\n';
  }
  return out.str();
}

std::string render_timings_jsonl(const BenchmarkResult& result, const RunManifest& manifest) {
  std::ostringstream out;
  out << ordered_json{{"record", "header"}, {"manifest", "manifest.json"}, {"threads", manifest.threads}}.dump()
      << '\n';
  for (const auto& run : result.runs) {
    out << ordered_json{{"record", "timing"}, {"method", run.method}, {"repeat", run.repeat},
                        {"wall_seconds", run.wall_seconds}}
               .dump()
        << '\n';
  }
  return out.str();
}

std::string render_results_table(const BenchmarkResult& result, const RunManifest& manifest) {
  std::ostringstream out;
  out << "protocol " << result.protocol << "  (manifest.json, config sha256 " << sha256_string(manifest.config)
      << ")\n";
  out << "train pool " << result.train_pool_size << ", test " << result.test_size;
  if (result.test_subsampled) out << " [test set SUBSAMPLED]";
  if (result.pca_dim) out << ", PCA " << *result.pca_dim;
  out << "\n\n";
  out << std::left << std::setw(16) << "method" << std::right << std::setw(6) << "ok" << std::setw(8) << "failed"
      << std::setw(10) << "acc %" << std::setw(8) << "std" << std::setw(10) << "F1 %" << std::setw(8) << "std"
      << '\n';
  for (const auto& a : result.aggregates) {
    out << std::left << std::setw(16) << a.method << std::right << std::setw(6) << a.completed << std::setw(8)
        << a.failed << std::setw(10) << percent(a.accuracy_mean) << std::setw(8) << percent(a.accuracy_std)
        << std::setw(10) << percent(a.macro_f1_mean) << std::setw(8) << percent(a.macro_f1_std) << '\n';
  }
  bool any_failed = false;
  for (const auto& run : result.runs) any_failed = any_failed || run.failed;
  if (any_failed) {
    out << "\nfailures:\n";
    for (const auto& run : result.runs) {
      if (run.failed) out << "  " << run.method << " repeat " << run.repeat << ": " << run.error << '\n';
    }
  }
  return out.str();
}

std::string render_sweep_jsonl(const std::vector<SweepRow>& rows, const ProtocolSpec& spec,
                               const RunManifest& manifest) {
  std::ostringstream out;
  ordered_json header = header_json(kSweepSchema, manifest);
  header["protocol"] = spec.name;
  header["rows"] = rows.size();
  out << header.dump() << '\n';
  for (const auto& row : rows) {
    ordered_json j = {{"record", "sweep"}, {"lambda", row.lambda}};
    j.update(aggregate_json(row.aggregate));
    out << j.dump() << '\n';
  }
  return out.str();
}

std::string render_sweep_tsv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "lambda\taccuracy_mean\taccuracy_std\tmacro_f1_mean\tmacro_f1_std\n";
  auto cell = [](double v) { return std::isnan(v) ? std::string("nan") : format_real(v); };
  for (const auto& row : rows) {
    const auto& a = row.aggregate;
    out << format_real(row.lambda) << '\t' << cell(a.accuracy_mean) << '\t' << cell(a.accuracy_std) << '\t'
        << cell(a.macro_f1_mean) << '\t' << cell(a.macro_f1_std) << '\n';
  }
  return out.str();
}

}  // namespace repclass
