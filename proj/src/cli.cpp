#include "repclass/cli.hpp"

#include "repclass/bench.hpp"
#include "repclass/classifiers.hpp"
#include "repclass/config.hpp"
#include "repclass/error.hpp"
#include "repclass/report.hpp"

#include "CLI11.hpp"

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace repclass {

namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> subsample_test;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--threads", o.threads, "Worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
  cmd->add_option("--seed-override", o.seed, "Replace the config seed");
  cmd->add_option("--subsample-test", o.subsample_test, "Evaluate on this many test samples (0 = all)")
      ->check(CLI::NonNegativeNumber);
}

void apply(const Overrides& o, ProtocolSpec& spec) {
  if (o.threads) spec.threads = *o.threads;
  if (o.seed) spec.seed = *o.seed;
  if (o.subsample_test) {
    if (*o.subsample_test > 0) {
      spec.subsample_test = *o.subsample_test;
    } else {
      spec.subsample_test.reset();
    }
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

fs::path prepare_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create output directory " + dir + ": " + ec.message());
  return fs::path(dir);
}

std::string join_command(const std::vector<std::string>& args) {
  std::string s = "repclass";
  for (const auto& a : args) s += " " + a;
  return s;
}

RunManifest make_manifest(const RunConfig& config, const std::vector<std::string>& args) {
  RunManifest m;
  m.toolkit_version = toolkit_version();
  m.timestamp = utc_timestamp();
  m.command = join_command(args);
  m.threads = config.protocol.threads;
  m.config = render_config(config);
  m.datasets = checksum_sources(config.protocol);
  return m;
}

/// Exit status for a finished benchmark: the category of the first failed run.
int failure_status(const BenchmarkResult& result, std::ostream& err) {
  for (const auto& run : result.runs) {
    if (run.failed) {
      err << "error: " << run.method << " repeat " << run.repeat << " failed: " << run.error << '\n';
      return static_cast<int>(category_of(run.error_kind));
    }
  }
  return kExitOk;
}

int cmd_bench(const std::string& config_path, const std::string& out_dir, const Overrides& o,
              const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig config = load_config_or_manifest(config_path);
  apply(o, config.protocol);
  config.protocol.validate();
  const ProtocolData data = load_protocol_data(config.protocol);
  const RunManifest manifest = make_manifest(config, args);
  const BenchmarkResult result = run_protocol(config.protocol, data);

  const fs::path dir = prepare_out_dir(out_dir);
  const std::string table = render_results_table(result, manifest);
  write_file(dir / "manifest.json", render_manifest(manifest));
  write_file(dir / "results.jsonl", render_results_jsonl(result, manifest));
  write_file(dir / "timings.jsonl", render_timings_jsonl(result, manifest));
  write_file(dir / "results.txt", table);
  out << table;
  return failure_status(result, err);
}

int cmd_sweep(const std::string& config_path, const std::optional<std::string>& grid_text, const std::string& out_dir,
              const Overrides& o, const std::vector<std::string>& args, std::ostream& out) {
  RunConfig config = load_config_or_manifest(config_path);
  apply(o, config.protocol);
  if (grid_text) config.sweep_grid = parse_grid(*grid_text);
  if (config.sweep_grid.empty()) throw Error(ErrorKind::Config, "no lambda grid given (--grid or [sweep] grid)");

  ClassifierSpec base;
  base.method = Method::CRNRC;
  if (!config.sweep_method.empty()) {
    const auto& ms = config.protocol.methods;
    const auto it = std::find_if(ms.begin(), ms.end(), [&](const ClassifierSpec& m) {
      return m.display_name() == config.sweep_method;
    });
    if (it == ms.end()) throw Error(ErrorKind::Config, "[sweep] method '" + config.sweep_method + "' is not defined");
    base = *it;
  } else {
    for (const auto& m : config.protocol.methods) {
      if (m.method == Method::CRNRC) {
        base = m;
        break;
      }
    }
  }
  if (base.method != Method::CRNRC) throw Error(ErrorKind::Config, "lambda sweeps run CRNRC only");
  config.protocol.validate();

  const ProtocolData data = load_protocol_data(config.protocol);
  const RunManifest manifest = make_manifest(config, args);
  const auto rows = sweep_lambda(config.protocol, base, config.sweep_grid, data);

  const fs::path dir = prepare_out_dir(out_dir);
  const std::string tsv = render_sweep_tsv(rows);
  write_file(dir / "manifest.json", render_manifest(manifest));
  write_file(dir / "sweep.jsonl", render_sweep_jsonl(rows, config.protocol, manifest));
  write_file(dir / "sweep.tsv", tsv);
  out << tsv;
  for (const auto& row : rows) {
    if (row.aggregate.completed == 0) {
      throw Error(ErrorKind::NotPositiveDefinite, "every repeat failed at lambda " + format_real(row.lambda));
    }
  }
  return kExitOk;
}

struct Samples {
  Matrix features;
  std::vector<std::optional<std::int64_t>> truth;
};

/// Rows of whitespace/comma separated numbers. A row of d values is an
/// unlabeled sample; a row of d+1 values carries its label first.
Samples read_samples(const fs::path& path, Eigen::Index d) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "dataset not found: " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::replace(line.begin(), line.end(), ',', ' ');
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    std::vector<double> row;
    std::string tok;
    while (fields >> tok) {
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0') {
        throw Error(ErrorKind::RaggedRows, path.string() + ":" + std::to_string(line_no) + ": bad number '" + tok + "'");
      }
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::NonFiniteValue, path.string() + ":" + std::to_string(line_no) + ": non-finite value");
      }
      row.push_back(v);
    }
    if (static_cast<Eigen::Index>(row.size()) != d && static_cast<Eigen::Index>(row.size()) != d + 1) {
      throw Error(ErrorKind::DimensionMismatch, path.string() + ":" + std::to_string(line_no) + ": sample has " +
                                                    std::to_string(row.size()) + " values, training dimension is " +
                                                    std::to_string(d));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorKind::EmptyFile, path.string() + " holds no samples");
  Samples s;
  s.features.resize(d, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const auto& row = rows[j];
    const std::size_t offset = static_cast<Eigen::Index>(row.size()) == d ? 0 : 1;
    if (offset == 1) {
      s.truth.emplace_back(static_cast<std::int64_t>(row[0]));
    } else {
      s.truth.emplace_back(std::nullopt);
    }
    for (Eigen::Index i = 0; i < d; ++i) s.features(i, static_cast<Eigen::Index>(j)) = row[offset + i];
  }
  return s;
}

std::string join(const Eigen::Ref<const Vector>& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? " " : "") + format_real(v(i));
  return s;
}

int cmd_classify(const std::string& config_path, const std::string& train_path, const std::string& train_labels,
                 const std::string& sample_path, const std::string& method_id, bool dump_coding, std::ostream& out) {
  const auto methods = load_methods(config_path);
  ClassifierSpec spec = methods.front();
  if (!method_id.empty()) {
    const auto it = std::find_if(methods.begin(), methods.end(),
                                 [&](const ClassifierSpec& m) { return m.display_name() == method_id; });
    if (it == methods.end()) throw Error(ErrorKind::Config, "method '" + method_id + "' is not defined in the config");
    spec = *it;
  }
  const Dataset train = load_source(DataSource{train_path, train_labels});
  const Samples samples = read_samples(resolve_data_path(sample_path), train.dimension());
  const FittedModel model = fit(spec, train);
  const auto reports = classify_batch(spec, model, samples.features);
  const auto& labels = train.original_labels();

  std::string class_line;
  for (std::size_t c = 0; c < labels.size(); ++c) class_line += (c ? " " : "") + std::to_string(labels[c]);
  out << "method: " << spec.display_name() << " (" << to_string(spec.method) << ")\n";
  out << "classes: " << class_line << '\n';
  bool failed = false;
  for (std::size_t j = 0; j < reports.size(); ++j) {
    const ResidualReport& r = reports[j];
    out << "\nsample: " << j << '\n';
    out << "predicted: " << labels[static_cast<std::size_t>(r.predicted)] << '\n';
    if (samples.truth[j]) out << "truth: " << *samples.truth[j] << '\n';
    out << "residuals: " << join(r.residuals) << '\n';
    out << "coefficient_mass: " << join(class_coefficient_mass(model.train(), r.coding)) << '\n';
    if (r.diagnostics) {
      out << "iterations: " << r.diagnostics->iterations << '\n';
      out << "converged: " << (r.diagnostics->converged ? "yes" : "no") << '\n';
      out << "final_gap: " << format_real(r.diagnostics->final_gap) << '\n';
      out << "objective: " << format_real(r.diagnostics->objective) << '\n';
      failed = failed || !std::isfinite(r.diagnostics->objective);
    }
    if (dump_coding) out << "coding: " << join(r.coding) << '\n';
  }
  if (failed) throw Error(ErrorKind::NotPositiveDefinite, "solver produced a non-finite objective");
  return kExitOk;
}

enum class TableFormat { Idx, Text, Binary };

TableFormat format_from_path(const fs::path& path, bool for_input) {
  const std::string name = path.filename().string();
  const std::string ext = path.extension().string();
  if (for_input && name.find("-ubyte") != std::string::npos) return TableFormat::Idx;
  if (ext == ".txt" || ext == ".csv" || ext == ".tsv" || ext == ".dat") return TableFormat::Text;
  if (ext == ".rbcf" || ext == ".bin") return TableFormat::Binary;
  throw Error(ErrorKind::Config, "cannot tell the format of '" + path.string() +
                                     "' from its extension (expected .txt/.csv/.tsv/.dat, .rbcf/.bin or an IDX -ubyte file)");
}

int cmd_convert(const std::string& input, const std::string& labels, const std::string& format,
                const std::string& output, std::ostream& out) {
  TableFormat target;
  if (format.empty()) {
    target = format_from_path(output, false);
  } else if (format == "text") {
    target = TableFormat::Text;
  } else if (format == "binary") {
    target = TableFormat::Binary;
  } else {
    throw Error(ErrorKind::Config, "unknown output format '" + format + "' (text or binary)");
  }

  Dataset data;
  if (!labels.empty()) {
    data = load_source(DataSource{input, labels});
  } else {
    const TableFormat source = format_from_path(input, true);
    if (source == TableFormat::Idx) {
      throw Error(ErrorKind::Config, "IDX input needs --labels");
    }
    data = load_source(DataSource{input, ""});
  }
  if (target == TableFormat::Binary) {
    save_binary(data, output);
  } else {
    save_feature_table(data, output);
  }
  out << "wrote " << data.size() << " samples of dimension " << data.dimension() << " in " << data.class_count()
      << " classes to " << output << '\n';
  return kExitOk;
}

/// Routes library logging to the error stream for the duration of a command.
class LogScope {
 public:
  LogScope(std::ostream& err, spdlog::level::level_enum level) : previous_(spdlog::default_logger()) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
    sink->set_pattern("[%l] %v");
    auto logger = std::make_shared<spdlog::logger>("repclass-cli", sink);
    logger->set_level(level);
    spdlog::set_default_logger(logger);
  }
  ~LogScope() { spdlog::set_default_logger(previous_); }
  LogScope(const LogScope&) = delete;
  LogScope& operator=(const LogScope&) = delete;

 private:
  std::shared_ptr<spdlog::logger> previous_;
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Representation-based classifiers and benchmark protocols", "repclass"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", toolkit_version());
  bool verbose = false;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

  std::string config_path;
  std::string out_dir;
  Overrides overrides;

  auto* bench = app.add_subcommand("bench", "Run a benchmark protocol");
  bench->add_option("--config", config_path, "Config file or manifest.json of an earlier run")->required();
  bench->add_option("--out", out_dir, "Output directory")->required();
  add_overrides(bench, overrides);

  std::optional<std::string> grid;
  auto* sweep = app.add_subcommand("sweep", "CRNRC accuracy over a lambda grid");
  sweep->add_option("--config", config_path, "Config file or manifest.json of an earlier run")->required();
  sweep->add_option("--grid", grid, "Comma-separated lambda values, e.g. 0,1e-4,1e-3");
  sweep->add_option("--out", out_dir, "Output directory")->required();
  add_overrides(sweep, overrides);

  std::string train_path;
  std::string train_labels;
  std::string sample_path;
  std::string method_id;
  bool dump_coding = false;
  auto* classify = app.add_subcommand("classify", "Classify samples and report per-class residuals");
  classify->add_option("--config", config_path, "Config with [method.*] sections")->required();
  classify->add_option("--train", train_path, "Training feature table, binary container or IDX images")->required();
  classify->add_option("--train-labels", train_labels, "IDX label file when --train is IDX");
  classify->add_option("--sample", sample_path, "Sample rows: d values, or label followed by d values")->required();
  classify->add_option("--method", method_id, "Method ID (default: first in the config)");
  classify->add_flag("--dump-coding", dump_coding, "Print the coding vector");

  std::string input;
  std::string labels;
  std::string format;
  std::string output;
  auto* convert = app.add_subcommand("convert", "Convert between IDX, text and binary containers");
  convert->add_option("--input", input, "Input file")->required();
  convert->add_option("--labels", labels, "IDX label file (input is IDX)");
  convert->add_option("--format", format, "text or binary (default: from the output extension)");
  convert->add_option("--output", output, "Output file")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  LogScope log(err, verbose ? spdlog::level::debug : quiet ? spdlog::level::warn : spdlog::level::info);
  try {
    if (*bench) return cmd_bench(config_path, out_dir, overrides, args, out, err);
    if (*sweep) return cmd_sweep(config_path, grid, out_dir, overrides, args, out);
    if (*classify) return cmd_classify(config_path, train_path, train_labels, sample_path, method_id, dump_coding, out);
    if (*convert) return cmd_convert(input, labels, format, output, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(category_of(e.kind()));
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::bad_alloc&) {
    err << "error: out of memory\n";
    return kExitData;
  }
  return kExitConfig;
}

}  // namespace repclass
