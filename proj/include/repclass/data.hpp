#pragma once

#include "repclass/linalg.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace repclass {

/// Labelled samples, one per column, with a per-class column index.
///
/// Labels are dense ids 0..K-1 assigned in order of first appearance; the
/// original label of dense id i is `original_labels[i]`.
class Dataset {
 public:
  Dataset() = default;

  /// Builds a dataset from raw (original) labels, remapping them to dense ids in
  /// order of first appearance. When `label_order` is given the dense ids follow
  /// it instead, and any label not listed there throws UnknownLabel.
  static Dataset from_raw_labels(Matrix features, const std::vector<std::int64_t>& raw_labels,
                                 const std::vector<std::int64_t>* label_order = nullptr);

  /// Builds a dataset from dense labels in 0..K-1 (original label = dense id
  /// unless `original_labels` is supplied). Every class must be present.
  static Dataset from_dense_labels(Matrix features, std::vector<int> labels, int class_count,
                                   std::vector<std::int64_t> original_labels = {});

  const Matrix& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<std::int64_t>& original_labels() const { return original_labels_; }
  const std::vector<std::vector<Eigen::Index>>& class_index() const { return class_index_; }

  int class_count() const { return static_cast<int>(class_index_.size()); }
  Eigen::Index dimension() const { return features_.rows(); }
  Eigen::Index size() const { return features_.cols(); }
  Eigen::Index class_size(int c) const { return static_cast<Eigen::Index>(class_index_[c].size()); }

  /// Columns of class c, in class_index order.
  Matrix class_features(int c) const;

  /// Same labels and class map with new feature rows (e.g. after PCA).
  Dataset with_features(Matrix features) const;

  /// Subset of columns in the given order; keeps the label map (K unchanged).
  Dataset select(const std::vector<Eigen::Index>& columns) const;

  /// Re-expresses this dataset's labels in `reference`'s dense id space.
  /// Throws UnknownLabel for labels the reference does not know.
  Dataset aligned_to(const Dataset& reference) const;

 private:
  void rebuild_index(int class_count);

  Matrix features_;
  std::vector<int> labels_;
  std::vector<std::int64_t> original_labels_;
  std::vector<std::vector<Eigen::Index>> class_index_;
};

struct SplitSpec {
  Eigen::Index per_class_train = 0;
  std::uint64_t seed = 0;
  int repeat_count = 1;
};

/// MNIST-style IDX pair (big-endian, magic 0x00000803 images / 0x00000801 labels).
/// Pixels are scaled to [0, 1].
Dataset load_idx(const std::filesystem::path& image_path, const std::filesystem::path& label_path);

/// Text table (label first, then d features; comma or whitespace delimited, `#`
/// comments) or the binary container, detected by the "RBCF" magic.
Dataset load_feature_table(const std::filesystem::path& path);

/// Writes the text table with round-trip precision.
void save_feature_table(const Dataset& data, const std::filesystem::path& path);

/// Binary container: "RBCF", version u32, d u32, n u32, n labels u32,
/// then d*n f64 column-major; all little-endian. Labels are the original labels.
void save_binary(const Dataset& data, const std::filesystem::path& path);
Dataset load_binary(const std::filesystem::path& path);

inline constexpr std::uint32_t kBinaryVersion = 1;

/// Exactly N columns per class drawn without replacement, grouped by class in
/// class order. Deterministic in (spec.seed, repeat_index).
Dataset stratified_sample(const Dataset& data, const SplitSpec& spec, int repeat_index);

/// Uniform subset of `count` columns (kept in original order), deterministic in `seed`.
Dataset subsample(const Dataset& data, Eigen::Index count, std::uint64_t seed);

/// Scales every column to unit l2 norm. Throws ZeroColumn naming the sample.
Dataset normalize_unit_columns(const Dataset& data);
Matrix normalize_unit_columns(const Eigen::Ref<const Matrix>& columns);

}  // namespace repclass
