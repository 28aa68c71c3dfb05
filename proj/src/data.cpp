#include "repclass/data.hpp"

#include "repclass/error.hpp"
#include "repclass/rng.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace repclass {

// ---------------------------------------------------------------------------
// Dataset

Dataset Dataset::from_raw_labels(Matrix features, const std::vector<std::int64_t>& raw_labels,
                                 const std::vector<std::int64_t>* label_order) {
  if (features.cols() != static_cast<Eigen::Index>(raw_labels.size())) {
    throw Error(ErrorKind::CountMismatch, std::to_string(raw_labels.size()) + " labels for " +
                                              std::to_string(features.cols()) + " samples");
  }
  if (features.rows() < 1 || features.cols() < 1) {
    throw Error(ErrorKind::EmptyFile, "dataset has no samples or no features");
  }
  require_finite(features, "features");

  Dataset ds;
  std::unordered_map<std::int64_t, int> dense;
  if (label_order != nullptr) {
    for (std::int64_t raw : *label_order) {
      dense.emplace(raw, static_cast<int>(ds.original_labels_.size()));
      ds.original_labels_.push_back(raw);
    }
  }
  ds.labels_.reserve(raw_labels.size());
  for (std::int64_t raw : raw_labels) {
    auto it = dense.find(raw);
    if (it == dense.end()) {
      if (label_order != nullptr) {
        throw Error(ErrorKind::UnknownLabel, "label " + std::to_string(raw) + " is not a known class");
      }
      it = dense.emplace(raw, static_cast<int>(ds.original_labels_.size())).first;
      ds.original_labels_.push_back(raw);
    }
    ds.labels_.push_back(it->second);
  }
  ds.features_ = std::move(features);
  ds.rebuild_index(static_cast<int>(ds.original_labels_.size()));
  return ds;
}

Dataset Dataset::from_dense_labels(Matrix features, std::vector<int> labels, int class_count,
                                   std::vector<std::int64_t> original_labels) {
  if (features.cols() != static_cast<Eigen::Index>(labels.size())) {
    throw Error(ErrorKind::CountMismatch,
                std::to_string(labels.size()) + " labels for " + std::to_string(features.cols()) + " samples");
  }
  if (features.rows() < 1 || features.cols() < 1) {
    throw Error(ErrorKind::DimensionMismatch, "dataset needs at least one feature and one sample");
  }
  if (class_count < 1) throw Error(ErrorKind::InvalidArgument, "class count must be positive");
  for (int l : labels) {
    if (l < 0 || l >= class_count) {
      throw Error(ErrorKind::LabelOutOfRange, "label " + std::to_string(l) + " outside 0.." +
                                                  std::to_string(class_count - 1));
    }
  }
  if (original_labels.empty()) {
    original_labels.resize(class_count);
    std::iota(original_labels.begin(), original_labels.end(), 0);
  } else if (static_cast<int>(original_labels.size()) != class_count) {
    throw Error(ErrorKind::CountMismatch, "original label list does not match class count");
  }
  require_finite(features, "features");

  Dataset ds;
  ds.features_ = std::move(features);
  ds.labels_ = std::move(labels);
  ds.original_labels_ = std::move(original_labels);
  ds.rebuild_index(class_count);
  for (int c = 0; c < class_count; ++c) {
    if (ds.class_index_[c].empty()) {
      throw Error(ErrorKind::InvalidArgument, "class " + std::to_string(c) + " has no samples");
    }
  }
  return ds;
}

void Dataset::rebuild_index(int class_count) {
  class_index_.assign(class_count, {});
  for (std::size_t j = 0; j < labels_.size(); ++j) {
    class_index_[labels_[j]].push_back(static_cast<Eigen::Index>(j));
  }
}

Matrix Dataset::class_features(int c) const {
  const auto& idx = class_index_.at(c);
  Matrix out(features_.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = features_.col(idx[j]);
  return out;
}

Dataset Dataset::with_features(Matrix features) const {
  if (features.cols() != features_.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "replacement features have a different sample count");
  }
  require_finite(features, "features");
  Dataset ds = *this;
  ds.features_ = std::move(features);
  return ds;
}

Dataset Dataset::select(const std::vector<Eigen::Index>& columns) const {
  if (columns.empty()) throw Error(ErrorKind::InvalidArgument, "cannot select zero samples");
  Dataset ds;
  ds.features_.resize(features_.rows(), static_cast<Eigen::Index>(columns.size()));
  ds.labels_.reserve(columns.size());
  for (std::size_t j = 0; j < columns.size(); ++j) {
    const Eigen::Index src = columns[j];
    if (src < 0 || src >= size()) throw Error(ErrorKind::InvalidArgument, "column index out of range");
    ds.features_.col(static_cast<Eigen::Index>(j)) = features_.col(src);
    ds.labels_.push_back(labels_[src]);
  }
  ds.original_labels_ = original_labels_;
  ds.rebuild_index(class_count());
  return ds;
}

Dataset Dataset::aligned_to(const Dataset& reference) const {
  std::vector<std::int64_t> raw(labels_.size());
  for (std::size_t j = 0; j < labels_.size(); ++j) raw[j] = original_labels_[labels_[j]];
  Dataset ds = from_raw_labels(features_, raw, &reference.original_labels());
  return ds;
}

// ---------------------------------------------------------------------------
// IDX

namespace {

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t offset, const std::filesystem::path& p) {
  if (offset + 4 > b.size()) throw Error(ErrorKind::TruncatedFile, p.string() + " ends inside its header");
  return (std::uint32_t{b[offset]} << 24) | (std::uint32_t{b[offset + 1]} << 16) |
         (std::uint32_t{b[offset + 2]} << 8) | std::uint32_t{b[offset + 3]};
}

std::uint32_t read_le32(const unsigned char* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

void write_le32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

void write_le_f64(std::ostream& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof bits);
  std::array<char, 8> b;
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(b.data(), 8);
}

double read_le_f64(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t{p[i]} << (8 * i);
  double d;
  std::memcpy(&d, &bits, sizeof d);
  return d;
}

constexpr std::uint32_t kIdxImages = 0x00000803;
constexpr std::uint32_t kIdxLabels = 0x00000801;
constexpr std::array<char, 4> kBinaryMagic{'R', 'B', 'C', 'F'};

}  // namespace

Dataset load_idx(const std::filesystem::path& image_path, const std::filesystem::path& label_path) {
  const auto images = read_all(image_path);
  const auto labels = read_all(label_path);

  const std::uint32_t image_magic = read_be32(images, 0, image_path);
  if (image_magic != kIdxImages) {
    std::ostringstream msg;
    msg << image_path.string() << ": expected magic 0x00000803, found 0x" << std::hex << std::setw(8)
        << std::setfill('0') << image_magic;
    throw Error(ErrorKind::BadMagic, msg.str());
  }
  const std::uint32_t label_magic = read_be32(labels, 0, label_path);
  if (label_magic != kIdxLabels) {
    std::ostringstream msg;
    msg << label_path.string() << ": expected magic 0x00000801, found 0x" << std::hex << std::setw(8)
        << std::setfill('0') << label_magic;
    throw Error(ErrorKind::BadMagic, msg.str());
  }

  const std::uint64_t n_images = read_be32(images, 4, image_path);
  const std::uint64_t rows = read_be32(images, 8, image_path);
  const std::uint64_t cols = read_be32(images, 12, image_path);
  const std::uint64_t n_labels = read_be32(labels, 4, label_path);
  if (n_images != n_labels) {
    throw Error(ErrorKind::CountMismatch, image_path.string() + " holds " + std::to_string(n_images) +
                                              " images but " + label_path.string() + " holds " +
                                              std::to_string(n_labels) + " labels");
  }
  const std::uint64_t d = rows * cols;
  if (n_images == 0 || d == 0) throw Error(ErrorKind::EmptyFile, image_path.string() + " holds no pixels");
  if (images.size() < 16 + n_images * d) {
    throw Error(ErrorKind::TruncatedFile, image_path.string() + " is shorter than its header declares");
  }
  if (labels.size() < 8 + n_labels) {
    throw Error(ErrorKind::TruncatedFile, label_path.string() + " is shorter than its header declares");
  }

  Matrix features(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n_images));
  const unsigned char* pixels = images.data() + 16;
  for (std::uint64_t j = 0; j < n_images; ++j) {
    for (std::uint64_t i = 0; i < d; ++i) {
      features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = pixels[j * d + i] / 255.0;
    }
  }
  std::vector<std::int64_t> raw(n_labels);
  for (std::uint64_t j = 0; j < n_labels; ++j) raw[j] = labels[8 + j];
  return Dataset::from_raw_labels(std::move(features), raw);
}

// ---------------------------------------------------------------------------
// Text table

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ',' || std::isspace(static_cast<unsigned char>(line[i])))) {
      ++i;
    }
    const std::size_t start = i;
    while (i < line.size() && line[i] != ',' && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

double parse_real(std::string_view field, std::size_t line_no, const std::filesystem::path& path) {
  // strtod accepts inf/nan spellings, which we want to detect explicitly.
  const std::string copy(field);
  char* end = nullptr;
  const double v = std::strtod(copy.c_str(), &end);
  if (end != copy.c_str() + copy.size()) {
    throw Error(ErrorKind::InvalidArgument,
                path.string() + ":" + std::to_string(line_no) + ": cannot parse '" + copy + "' as a number");
  }
  if (!std::isfinite(v)) {
    throw Error(ErrorKind::NonFiniteValue,
                path.string() + ":" + std::to_string(line_no) + ": non-finite value '" + copy + "'");
  }
  return v;
}

std::int64_t parse_label(std::string_view field, std::size_t line_no, const std::filesystem::path& path) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec == std::errc() && ptr == field.data() + field.size()) return v;
  // Accept integral reals such as "3.0" written by numeric tools.
  const double r = parse_real(field, line_no, path);
  if (r != std::floor(r) || std::abs(r) > 9.0e15) {
    throw Error(ErrorKind::InvalidArgument, path.string() + ":" + std::to_string(line_no) + ": label '" +
                                                std::string(field) + "' is not an integer");
  }
  return static_cast<std::int64_t>(r);
}

bool has_binary_magic(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::array<char, 4> head{};
  in.read(head.data(), 4);
  return in.gcount() == 4 && head == kBinaryMagic;
}

}  // namespace

Dataset load_feature_table(const std::filesystem::path& path) {
  if (has_binary_magic(path)) return load_binary(path);

  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());

  std::vector<std::int64_t> raw;
  std::vector<double> values;
  std::size_t d = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    const auto first = view.find_first_not_of(" \t\r");
    if (first == std::string_view::npos || view[first] == '#') continue;
    const auto fields = split_fields(view);
    if (fields.size() < 2) {
      throw Error(ErrorKind::RaggedRows,
                  path.string() + ":" + std::to_string(line_no) + ": row has a label but no features");
    }
    if (raw.empty()) {
      d = fields.size() - 1;
    } else if (fields.size() - 1 != d) {
      throw Error(ErrorKind::RaggedRows, path.string() + ":" + std::to_string(line_no) + ": expected " +
                                             std::to_string(d) + " features, found " +
                                             std::to_string(fields.size() - 1));
    }
    raw.push_back(parse_label(fields[0], line_no, path));
    for (std::size_t i = 1; i < fields.size(); ++i) values.push_back(parse_real(fields[i], line_no, path));
  }
  if (raw.empty()) throw Error(ErrorKind::EmptyFile, path.string() + " contains no samples");

  Matrix features = Eigen::Map<const Matrix>(values.data(), static_cast<Eigen::Index>(d),
                                             static_cast<Eigen::Index>(raw.size()));
  return Dataset::from_raw_labels(std::move(features), raw);
}

void save_feature_table(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << "# label followed by " << data.dimension() << " features\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  const Matrix& x = data.features();
  for (Eigen::Index j = 0; j < data.size(); ++j) {
    out << data.original_labels()[data.labels()[j]];
    for (Eigen::Index i = 0; i < x.rows(); ++i) out << ',' << x(i, j);
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Binary container

void save_binary(const Dataset& data, const std::filesystem::path& path) {
  for (std::int64_t l : data.original_labels()) {
    if (l < 0 || l > std::numeric_limits<std::uint32_t>::max()) {
      throw Error(ErrorKind::InvalidArgument, "label " + std::to_string(l) + " does not fit in u32");
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(kBinaryMagic.data(), 4);
  write_le32(out, kBinaryVersion);
  write_le32(out, static_cast<std::uint32_t>(data.dimension()));
  write_le32(out, static_cast<std::uint32_t>(data.size()));
  for (int l : data.labels()) write_le32(out, static_cast<std::uint32_t>(data.original_labels()[l]));
  const Matrix& x = data.features();
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i) write_le_f64(out, x(i, j));
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

Dataset load_binary(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  if (bytes.size() < 16) throw Error(ErrorKind::TruncatedFile, path.string() + " is shorter than its header");
  if (!std::equal(kBinaryMagic.begin(), kBinaryMagic.end(), bytes.begin())) {
    throw Error(ErrorKind::BadMagic, path.string() + " does not start with RBCF");
  }
  const std::uint32_t version = read_le32(bytes.data() + 4);
  if (version != kBinaryVersion) {
    throw Error(ErrorKind::BadMagic, path.string() + ": unsupported container version " + std::to_string(version));
  }
  const std::uint64_t d = read_le32(bytes.data() + 8);
  const std::uint64_t n = read_le32(bytes.data() + 12);
  if (d == 0 || n == 0) throw Error(ErrorKind::EmptyFile, path.string() + " declares no samples");
  if (bytes.size() < 16 + 4 * n + 8 * d * n) {
    throw Error(ErrorKind::TruncatedFile, path.string() + " is shorter than its header declares");
  }
  std::vector<std::int64_t> raw(n);
  for (std::uint64_t j = 0; j < n; ++j) raw[j] = read_le32(bytes.data() + 16 + 4 * j);
  Matrix features(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
  const unsigned char* p = bytes.data() + 16 + 4 * n;
  for (std::uint64_t j = 0; j < n; ++j)
    for (std::uint64_t i = 0; i < d; ++i, p += 8)
      features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = read_le_f64(p);
  return Dataset::from_raw_labels(std::move(features), raw);
}

// ---------------------------------------------------------------------------
// Sampling and normalization

Dataset stratified_sample(const Dataset& data, const SplitSpec& spec, int repeat_index) {
  if (spec.repeat_count < 1) throw Error(ErrorKind::InvalidArgument, "repeat count must be at least 1");
  if (repeat_index < 0 || repeat_index >= spec.repeat_count) {
    throw Error(ErrorKind::InvalidArgument, "repeat index " + std::to_string(repeat_index) + " outside [0, " +
                                                std::to_string(spec.repeat_count) + ")");
  }
  if (spec.per_class_train < 1) throw Error(ErrorKind::InvalidArgument, "per-class sample count must be positive");
  for (int c = 0; c < data.class_count(); ++c) {
    if (data.class_size(c) < spec.per_class_train) {
      throw Error(ErrorKind::InsufficientSamples,
                  "class " + std::to_string(data.original_labels()[c]) + " has " +
                      std::to_string(data.class_size(c)) + " samples, " +
                      std::to_string(spec.per_class_train) + " requested");
    }
  }

  PortableRng rng(stream_seed(spec.seed, static_cast<std::uint64_t>(repeat_index)));
  std::vector<Eigen::Index> picked;
  picked.reserve(static_cast<std::size_t>(spec.per_class_train * data.class_count()));
  const auto count = static_cast<std::size_t>(spec.per_class_train);
  for (int c = 0; c < data.class_count(); ++c) {
    std::vector<Eigen::Index> pool = data.class_index()[c];
    rng.partial_shuffle(std::span<Eigen::Index>(pool), count);
    std::sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(count));
    picked.insert(picked.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(count));
  }
  return data.select(picked);
}

Dataset subsample(const Dataset& data, Eigen::Index count, std::uint64_t seed) {
  if (count < 1 || count > data.size()) {
    throw Error(ErrorKind::InsufficientSamples, "cannot draw " + std::to_string(count) + " of " +
                                                    std::to_string(data.size()) + " samples");
  }
  std::vector<Eigen::Index> pool(static_cast<std::size_t>(data.size()));
  std::iota(pool.begin(), pool.end(), Eigen::Index{0});
  PortableRng rng(stream_seed(seed, 0x5ab5'a3b1'e000'0001ULL));
  rng.partial_shuffle(std::span<Eigen::Index>(pool), static_cast<std::size_t>(count));
  pool.resize(static_cast<std::size_t>(count));
  std::sort(pool.begin(), pool.end());
  return data.select(pool);
}

Matrix normalize_unit_columns(const Eigen::Ref<const Matrix>& columns) {
  Matrix out = columns;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const double norm = out.col(j).norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw Error(ErrorKind::ZeroColumn, "sample " + std::to_string(j) + " has zero (or non-finite) norm");
    }
    out.col(j) /= norm;
  }
  return out;
}

Dataset normalize_unit_columns(const Dataset& data) {
  return data.with_features(normalize_unit_columns(data.features()));
}

}  // namespace repclass
