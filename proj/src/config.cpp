#include "repclass/config.hpp"

#include "repclass/error.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include "json.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace repclass {

namespace pt = boost::property_tree;

std::string format_real(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw Error(ErrorKind::InvalidArgument, "cannot format number");
  return std::string(buf, ptr);
}

namespace {

double to_real(const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw Error(ErrorKind::Config, key + ": '" + text + "' is not a number");
  }
  return v;
}

std::int64_t to_integer(const std::string& key, const std::string& text) {
  std::int64_t v = 0;
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), last, v);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw Error(ErrorKind::Config, key + ": '" + text + "' is not an integer");
  }
  return v;
}

std::uint64_t to_unsigned(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), last, v);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw Error(ErrorKind::Config, key + ": '" + text + "' is not a nonnegative integer");
  }
  return v;
}

void check_keys(const std::string& section, const pt::ptree& tree, const std::set<std::string>& allowed) {
  for (const auto& [key, value] : tree) {
    if (!allowed.contains(key)) throw Error(ErrorKind::Config, "unknown key '" + key + "' in [" + section + "]");
  }
}

ClassifierSpec parse_method_section(const std::string& id, const pt::ptree& tree) {
  const std::string section = "method." + id;
  check_keys(section, tree, {"type", "lambda", "mu", "tol", "max_iter", "ridge"});
  ClassifierSpec spec;
  spec.name = id;
  const auto type = tree.get_optional<std::string>("type");
  if (!type) throw Error(ErrorKind::Config, "[" + section + "] needs a type");
  try {
    spec.method = parse_method(*type);
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, "[" + section + "] " + e.what());
  }
  if (spec.method == Method::NRC) spec.lambda = 0.0;
  if (auto v = tree.get_optional<std::string>("lambda")) spec.lambda = to_real(section + ".lambda", *v);
  if (auto v = tree.get_optional<std::string>("mu")) spec.admm.mu = to_real(section + ".mu", *v);
  if (auto v = tree.get_optional<std::string>("tol")) spec.admm.tol = to_real(section + ".tol", *v);
  if (auto v = tree.get_optional<std::string>("max_iter")) {
    spec.admm.max_iter = static_cast<int>(to_integer(section + ".max_iter", *v));
  }
  if (auto v = tree.get_optional<std::string>("ridge")) spec.ridge = to_real(section + ".ridge", *v);
  try {
    spec.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, "[" + section + "] " + e.what());
  }
  return spec;
}

std::string strip_hash_comments(const std::string& text) {
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first != std::string::npos && line[first] == '#') continue;
    out << line << '\n';
  }
  return out.str();
}

RunConfig parse_impl(const std::string& text, bool full);

}  // namespace

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::string token;
  std::istringstream in(text);
  while (std::getline(in, token, ',')) {
    const auto b = token.find_first_not_of(" \t");
    const auto e = token.find_last_not_of(" \t");
    if (b == std::string::npos) throw Error(ErrorKind::Config, "empty entry in lambda grid '" + text + "'");
    const double v = to_real("grid", token.substr(b, e - b + 1));
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorKind::Config, "lambda grid values must be >= 0");
    grid.push_back(v);
  }
  if (grid.empty()) throw Error(ErrorKind::Config, "lambda grid is empty");
  return grid;
}

RunConfig parse_config(const std::string& text) { return parse_impl(text, true); }

std::vector<ClassifierSpec> load_methods(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  auto methods = parse_impl(text.str(), false).protocol.methods;
  if (methods.empty()) throw Error(ErrorKind::Config, path.string() + " defines no [method.*] section");
  return methods;
}

namespace {

RunConfig parse_impl(const std::string& text, bool full) {
  pt::ptree root;
  try {
    std::istringstream in(strip_hash_comments(text));
    pt::ini_parser::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorKind::Config, e.what());
  }

  RunConfig config;
  ProtocolSpec& p = config.protocol;
  bool have_protocol = false;
  bool have_data = false;
  for (const auto& [section, tree] : root) {
    if (tree.empty() && !tree.data().empty()) {
      throw Error(ErrorKind::Config, "key '" + section + "' appears outside any section");
    }
    if (section == "protocol") {
      have_protocol = true;
      check_keys(section, tree,
                 {"name", "seed", "repeats", "per_class_train", "pca_dim", "subsample_test", "chunk_size", "threads"});
      if (auto v = tree.get_optional<std::string>("name")) p.name = *v;
      if (auto v = tree.get_optional<std::string>("seed")) p.seed = to_unsigned("protocol.seed", *v);
      if (auto v = tree.get_optional<std::string>("repeats")) p.repeats = static_cast<int>(to_integer("protocol.repeats", *v));
      if (auto v = tree.get_optional<std::string>("per_class_train")) {
        p.per_class_train = to_integer("protocol.per_class_train", *v);
      }
      if (auto v = tree.get_optional<std::string>("pca_dim")) {
        const auto k = to_integer("protocol.pca_dim", *v);
        if (k > 0) p.pca_dim = k;
      }
      if (auto v = tree.get_optional<std::string>("subsample_test")) {
        const auto m = to_integer("protocol.subsample_test", *v);
        if (m > 0) p.subsample_test = m;
      }
      if (auto v = tree.get_optional<std::string>("chunk_size")) p.chunk_size = to_integer("protocol.chunk_size", *v);
      if (auto v = tree.get_optional<std::string>("threads")) p.threads = static_cast<int>(to_integer("protocol.threads", *v));
    } else if (section == "data") {
      have_data = true;
      check_keys(section, tree, {"train", "train_labels", "test", "test_labels"});
      p.train.path = tree.get<std::string>("train", "");
      p.train.labels = tree.get<std::string>("train_labels", "");
      p.test.path = tree.get<std::string>("test", "");
      p.test.labels = tree.get<std::string>("test_labels", "");
    } else if (section.rfind("method.", 0) == 0 && section.size() > 7) {
      p.methods.push_back(parse_method_section(section.substr(7), tree));
    } else if (section == "sweep") {
      check_keys(section, tree, {"grid", "method"});
      if (auto v = tree.get_optional<std::string>("grid")) config.sweep_grid = parse_grid(*v);
      if (auto v = tree.get_optional<std::string>("method")) config.sweep_method = *v;
    } else {
      throw Error(ErrorKind::Config, "unknown section [" + section + "]");
    }
  }
  if (!full) return config;
  if (!have_protocol) throw Error(ErrorKind::Config, "missing [protocol] section");
  if (!have_data) throw Error(ErrorKind::Config, "missing [data] section");
  p.validate();
  return config;
}

}  // namespace

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

RunConfig load_config_or_manifest(const std::filesystem::path& path) {
  if (path.extension() != ".json") return load_config(path);
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cannot read manifest " + path.string());
  try {
    const auto manifest = nlohmann::json::parse(in);
    return parse_config(manifest.at("config").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, path.string() + ": not a run manifest (" + e.what() + ")");
  }
}

std::string render_config(const RunConfig& config) {
  const ProtocolSpec& p = config.protocol;
  std::ostringstream out;
  out << "[protocol]\n";
  out << "name = " << p.name << '\n';
  out << "seed = " << p.seed << '\n';
  out << "repeats = " << p.repeats << '\n';
  out << "per_class_train = " << p.per_class_train << '\n';
  if (p.pca_dim) out << "pca_dim = " << *p.pca_dim << '\n';
  if (p.subsample_test) out << "subsample_test = " << *p.subsample_test << '\n';
  out << "chunk_size = " << p.chunk_size << '\n';
  out << "\n[data]\n";
  out << "train = " << p.train.path << '\n';
  if (!p.train.labels.empty()) out << "train_labels = " << p.train.labels << '\n';
  out << "test = " << p.test.path << '\n';
  if (!p.test.labels.empty()) out << "test_labels = " << p.test.labels << '\n';
  for (const auto& m : p.methods) {
    out << "\n[method." << m.display_name() << "]\n";
    out << "type = " << to_string(m.method) << '\n';
    switch (m.method) {
      case Method::NSC:
        out << "ridge = " << format_real(m.ridge) << '\n';
        break;
      case Method::CRC:
        out << "lambda = " << format_real(m.lambda) << '\n';
        break;
      case Method::SRC:
      case Method::CRNRC:
        out << "lambda = " << format_real(m.lambda) << '\n';
        [[fallthrough]];
      case Method::NRC:
        out << "mu = " << format_real(m.admm.mu) << '\n';
        out << "tol = " << format_real(m.admm.tol) << '\n';
        out << "max_iter = " << m.admm.max_iter << '\n';
        break;
    }
  }
  if (!config.sweep_grid.empty() || !config.sweep_method.empty()) {
    out << "\n[sweep]\n";
    if (!config.sweep_grid.empty()) {
      out << "grid = ";
      for (std::size_t i = 0; i < config.sweep_grid.size(); ++i) {
        out << (i ? "," : "") << format_real(config.sweep_grid[i]);
      }
      out << '\n';
    }
    if (!config.sweep_method.empty()) out << "method = " << config.sweep_method << '\n';
  }
  return out.str();
}

}  // namespace repclass
