#include "oracles.hpp"
#include "support.hpp"

#include "repclass/data.hpp"

#include <fstream>
#include <map>
#include <cstring>

using namespace repclass;
namespace fs = std::filesystem;

namespace {

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::vector<unsigned char> be32(std::uint32_t v) {
  return {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 8),
          static_cast<unsigned char>(v)};
}

std::vector<unsigned char> cat(std::initializer_list<std::vector<unsigned char>> parts) {
  std::vector<unsigned char> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

// Two 2x2 images and their labels.
void write_idx_pair(const fs::path& images, const fs::path& labels, std::uint32_t label_count = 2) {
  write_bytes(images, cat({be32(0x803), be32(2), be32(2), be32(2), {0, 51, 102, 255, 255, 0, 0, 204}}));
  std::vector<unsigned char> l = cat({be32(0x801), be32(label_count)});
  for (std::uint32_t i = 0; i < label_count; ++i) l.push_back(static_cast<unsigned char>(7 - i));
  write_bytes(labels, l);
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("dataset invariants: class index partitions the columns") {
  Matrix x = Matrix::Ones(2, 5);
  const Dataset ds = Dataset::from_raw_labels(x, {9, 4, 9, 2, 4});
  CHECK(ds.class_count() == 3);
  CHECK(ds.original_labels() == std::vector<std::int64_t>{9, 4, 2});
  CHECK(ds.labels() == std::vector<int>{0, 1, 0, 2, 1});
  std::vector<int> seen(5, 0);
  Eigen::Index total = 0;
  for (int c = 0; c < ds.class_count(); ++c) {
    CHECK(ds.class_size(c) >= 1);
    total += ds.class_size(c);
    for (auto j : ds.class_index()[static_cast<std::size_t>(c)]) {
      ++seen[static_cast<std::size_t>(j)];
      CHECK(ds.labels()[static_cast<std::size_t>(j)] == c);
    }
  }
  CHECK(total == ds.size());
  for (int s : seen) CHECK(s == 1);
}

TEST_CASE("dense labels must cover every class") {
  CHECK(kind_of([] { Dataset::from_dense_labels(Matrix::Ones(2, 2), {0, 0}, 2); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([] { Dataset::from_dense_labels(Matrix::Ones(2, 2), {0, 2}, 2); }) == ErrorKind::LabelOutOfRange);
  CHECK(kind_of([] { Dataset::from_dense_labels(Matrix::Ones(2, 2), {0}, 1); }) == ErrorKind::CountMismatch);
}

TEST_CASE("test labels align to the training label map") {
  const Dataset train = Dataset::from_raw_labels(Matrix::Ones(2, 3), {5, 3, 1});
  const Dataset test = Dataset::from_raw_labels(Matrix::Ones(2, 2), {1, 5}).aligned_to(train);
  CHECK(test.labels() == std::vector<int>{2, 0});
  CHECK(test.original_labels() == train.original_labels());
  const Dataset stray = Dataset::from_raw_labels(Matrix::Ones(2, 1), {8});
  CHECK(kind_of([&] { stray.aligned_to(train); }) == ErrorKind::UnknownLabel);
}

TEST_CASE("idx pair built byte by byte loads as expected") {
  const auto dir = oracle::scratch_dir("idx");
  write_idx_pair(dir / "img", dir / "lbl");
  const Dataset ds = load_idx(dir / "img", dir / "lbl");
  CHECK(ds.dimension() == 4);
  CHECK(ds.size() == 2);
  // row-major pixels become one column each
  CHECK(ds.features()(0, 0) == 0.0);
  CHECK(ds.features()(1, 0) == doctest::Approx(0.2));
  CHECK(ds.features()(2, 0) == doctest::Approx(0.4));
  CHECK(ds.features()(3, 0) == 1.0);
  CHECK(ds.features()(0, 1) == 1.0);
  CHECK(ds.features()(3, 1) == doctest::Approx(0.8));
  CHECK(ds.original_labels() == std::vector<std::int64_t>{7, 6});
}

TEST_CASE("idx loader errors") {
  const auto dir = oracle::scratch_dir("idx-errors");
  write_idx_pair(dir / "img", dir / "lbl3", 3);
  CHECK(kind_of([&] { load_idx(dir / "img", dir / "lbl3"); }) == ErrorKind::CountMismatch);

  write_idx_pair(dir / "img", dir / "lbl");
  CHECK(kind_of([&] { load_idx(dir / "lbl", dir / "lbl"); }) == ErrorKind::BadMagic);
  CHECK(kind_of([&] { load_idx(dir / "img", dir / "img"); }) == ErrorKind::BadMagic);

  write_bytes(dir / "short", cat({be32(0x803), be32(2), be32(2), be32(2), {1, 2, 3}}));
  CHECK(kind_of([&] { load_idx(dir / "short", dir / "lbl"); }) == ErrorKind::TruncatedFile);
  write_bytes(dir / "stub", {0, 0});
  CHECK(kind_of([&] { load_idx(dir / "stub", dir / "lbl"); }) == ErrorKind::TruncatedFile);
}

TEST_CASE("feature table: two labelled rows give an identity matrix") {
  const auto dir = oracle::scratch_dir("table");
  write_text(dir / "t.csv", "# comment line\n0, 1.0, 0.0\n1, 0.0, 1.0\n");
  const Dataset ds = load_feature_table(dir / "t.csv");
  CHECK(ds.class_count() == 2);
  CHECK(ds.features() == Matrix::Identity(2, 2));

  write_text(dir / "ws.txt", "3 0.5 0.25\n\n3.0\t1e-3  2\n");
  const Dataset ws = load_feature_table(dir / "ws.txt");
  CHECK(ws.size() == 2);
  CHECK(ws.class_count() == 1);
  CHECK(ws.features()(0, 1) == 1e-3);
}

TEST_CASE("feature table errors") {
  const auto dir = oracle::scratch_dir("table-errors");
  write_text(dir / "inf.txt", "0 1.0 inf\n");
  CHECK(kind_of([&] { load_feature_table(dir / "inf.txt"); }) == ErrorKind::NonFiniteValue);
  write_text(dir / "nan.txt", "0 nan 1\n");
  CHECK(kind_of([&] { load_feature_table(dir / "nan.txt"); }) == ErrorKind::NonFiniteValue);
  write_text(dir / "ragged.txt", "0 1 2\n1 3\n");
  CHECK(kind_of([&] { load_feature_table(dir / "ragged.txt"); }) == ErrorKind::RaggedRows);
  write_text(dir / "empty.txt", "# nothing here\n\n");
  CHECK(kind_of([&] { load_feature_table(dir / "empty.txt"); }) == ErrorKind::EmptyFile);
  CHECK(kind_of([&] { load_feature_table(dir / "missing.txt"); }) == ErrorKind::Io);
}

TEST_CASE("feature table round trip keeps labels and features") {
  const auto dir = oracle::scratch_dir("roundtrip");
  PortableRng rng(21);
  Matrix x(7, 30);
  std::vector<std::int64_t> labels;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, j) = rng.normal() * 1e3;
    labels.push_back(static_cast<std::int64_t>(rng.below(4)) * 10 + 5);
  }
  const Dataset ds = Dataset::from_raw_labels(x, labels);

  save_feature_table(ds, dir / "t.txt");
  const Dataset text = load_feature_table(dir / "t.txt");
  CHECK(text.labels() == ds.labels());
  CHECK(text.original_labels() == ds.original_labels());
  CHECK((text.features() - ds.features()).cwiseAbs().maxCoeff() == 0.0);

  save_binary(ds, dir / "t.rbcf");
  const Dataset bin = load_feature_table(dir / "t.rbcf");
  CHECK(bin.labels() == ds.labels());
  CHECK(bin.original_labels() == ds.original_labels());
  CHECK(bin.features() == ds.features());
}

TEST_CASE("binary container layout") {
  const auto dir = oracle::scratch_dir("container");
  const Dataset ds = Dataset::from_raw_labels(Matrix{{1.0, 3.0}, {2.0, 4.0}}, {4, 9});
  save_binary(ds, dir / "c.rbcf");
  std::ifstream in(dir / "c.rbcf", std::ios::binary);
  std::vector<unsigned char> b((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  REQUIRE(b.size() == 16 + 2 * 4 + 4 * 8);
  CHECK(std::string(b.begin(), b.begin() + 4) == "RBCF");
  CHECK(b[4] == kBinaryVersion);
  CHECK(b[8] == 2);   // d
  CHECK(b[12] == 2);  // n
  CHECK(b[16] == 4);
  CHECK(b[20] == 9);
  double second = 0.0;
  std::memcpy(&second, b.data() + 24 + 8, 8);
  CHECK(second == 2.0);  // column-major

  b[0] = 'X';
  write_bytes(dir / "bad.rbcf", b);
  CHECK(kind_of([&] { load_binary(dir / "bad.rbcf"); }) == ErrorKind::BadMagic);
  b[0] = 'R';
  b.resize(30);
  write_bytes(dir / "short.rbcf", b);
  CHECK(kind_of([&] { load_binary(dir / "short.rbcf"); }) == ErrorKind::TruncatedFile);
}

TEST_CASE("idx converted to the binary container loads identically") {
  const auto dir = oracle::scratch_dir("idx-binary");
  write_idx_pair(dir / "img", dir / "lbl");
  const Dataset a = load_idx(dir / "img", dir / "lbl");
  save_binary(a, dir / "a.rbcf");
  const Dataset b = load_binary(dir / "a.rbcf");
  CHECK(a.features() == b.features());
  CHECK(a.labels() == b.labels());
  CHECK(a.original_labels() == b.original_labels());
}

TEST_CASE("stratified sampling takes everything when N equals the class size") {
  PortableRng rng(1);
  const Dataset ds = oracle::random_dataset(rng, 3, {4, 4, 4});
  // interleave classes so grouping is observable
  const Dataset mixed = ds.select({0, 4, 8, 1, 5, 9, 2, 6, 10, 3, 7, 11});
  const Dataset s = stratified_sample(mixed, SplitSpec{4, 99, 1}, 0);
  CHECK(s.size() == 12);
  for (Eigen::Index j = 0; j < 12; ++j) CHECK(s.labels()[static_cast<std::size_t>(j)] == j / 4);
  // same multiset of columns
  double sum_a = mixed.features().sum(), sum_b = s.features().sum();
  CHECK(sum_a == doctest::Approx(sum_b));
}

TEST_CASE("stratified sampling is deterministic and varies by repeat") {
  PortableRng rng(2);
  const Dataset ds = oracle::random_dataset(rng, 3, {10, 12, 9});
  const SplitSpec spec{5, 1234, 3};
  const Dataset a = stratified_sample(ds, spec, 1);
  const Dataset b = stratified_sample(ds, spec, 1);
  const Dataset c = stratified_sample(ds, spec, 2);
  CHECK(a.features() == b.features());
  CHECK(a.features() != c.features());
  for (int k = 0; k < 3; ++k) CHECK(a.class_size(k) == 5);
  CHECK(a.original_labels() == ds.original_labels());
}

TEST_CASE("stratified sampling errors") {
  PortableRng rng(3);
  const Dataset ds = oracle::random_dataset(rng, 3, {3, 5});
  CHECK(kind_of([&] { stratified_sample(ds, SplitSpec{4, 0, 1}, 0); }) == ErrorKind::InsufficientSamples);
  CHECK(kind_of([&] { stratified_sample(ds, SplitSpec{2, 0, 1}, 1); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([&] { stratified_sample(ds, SplitSpec{2, 0, 0}, 0); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("stratified sampling selects each sample at a binomial rate") {
  // 1000 draws of 5 from a 10-sample class: each sample expected 500 times, sd ~15.8.
  Matrix x(1, 10);
  for (int j = 0; j < 10; ++j) x(0, j) = j + 1;
  const Dataset ds = Dataset::from_dense_labels(x, std::vector<int>(10, 0), 1);
  std::map<double, int> hits;
  const SplitSpec spec{5, 77, 1000};
  for (int r = 0; r < 1000; ++r) {
    const Dataset s = stratified_sample(ds, spec, r);
    for (Eigen::Index j = 0; j < s.size(); ++j) ++hits[s.features()(0, j)];
  }
  const double sigma = std::sqrt(1000 * 0.5 * 0.5);
  CHECK(hits.size() == 10);
  for (const auto& [value, count] : hits) {
    INFO("sample " << value);
    CHECK(std::abs(count - 500) <= 5 * sigma);
  }
}

TEST_CASE("subsample is deterministic and order preserving") {
  PortableRng rng(4);
  const Dataset ds = oracle::random_dataset(rng, 2, {20, 20});
  const Dataset a = subsample(ds, 15, 8);
  const Dataset b = subsample(ds, 15, 8);
  CHECK(a.features() == b.features());
  CHECK(a.size() == 15);
  CHECK(a.class_count() == 2);
  CHECK(kind_of([&] { subsample(ds, 41, 8); }) == ErrorKind::InsufficientSamples);
}

TEST_CASE("unit normalization") {
  const Matrix n = normalize_unit_columns(Matrix{{3.0}, {4.0}});
  CHECK(n(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(n(1, 0) == doctest::Approx(0.8).epsilon(1e-15));

  PortableRng rng(5);
  const Dataset ds = oracle::random_dataset(rng, 6, {5, 5});
  const Dataset once = normalize_unit_columns(ds);
  const Dataset twice = normalize_unit_columns(once);
  for (Eigen::Index j = 0; j < ds.size(); ++j) CHECK(std::abs(once.features().col(j).norm() - 1.0) <= 1e-12);
  CHECK((once.features() - twice.features()).cwiseAbs().maxCoeff() <= 1e-15);

  Matrix zero = Matrix::Ones(2, 3);
  zero.col(1).setZero();
  try {
    normalize_unit_columns(zero);
    FAIL("expected ZeroColumn");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ZeroColumn);
    CHECK(std::string(e.what()).find("sample 1") != std::string::npos);
  }
}

}  // TEST_SUITE
