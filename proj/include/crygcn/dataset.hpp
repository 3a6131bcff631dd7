#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "crygcn/linalg.hpp"

namespace crygcn {

/// n x d node embeddings. Every entry is finite and n, d >= 1.
class FeatureMatrix {
 public:
  explicit FeatureMatrix(Matrix values);

  std::size_t rows() const noexcept { return static_cast<std::size_t>(values_.rows()); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(values_.cols()); }
  const Matrix& values() const noexcept { return values_; }

  /// Rows listed in `indices`, in that order.
  FeatureMatrix subset(std::span<const std::size_t> indices) const;

 private:
  Matrix values_;
};

/// Class identifiers in [0, C) with C >= 2 and no empty class.
class LabelVector {
 public:
  LabelVector(std::vector<int> labels, std::vector<std::string> class_names);

  std::size_t size() const noexcept { return labels_.size(); }
  int class_count() const noexcept { return static_cast<int>(class_names_.size()); }
  int operator[](std::size_t i) const { return labels_[i]; }
  const std::vector<int>& labels() const noexcept { return labels_; }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }
  std::vector<std::size_t> class_counts() const;

  /// Labels of the listed nodes. Classes missing from the subset are allowed
  /// here; the class table is kept so identifiers stay comparable.
  LabelVector subset(std::span<const std::size_t> indices) const;

 private:
  struct Unchecked {};
  LabelVector(Unchecked, std::vector<int> labels, std::vector<std::string> class_names)
      : labels_(std::move(labels)), class_names_(std::move(class_names)) {}

  std::vector<int> labels_;
  std::vector<std::string> class_names_;
};

struct LabelMask {
  std::vector<bool> mask;
  std::size_t labeled_count = 0;
  std::uint64_t seed = 0;
  double fraction = 0.0;

  static LabelMask from_bools(std::vector<bool> mask);
  std::vector<std::size_t> labeled_indices() const;
  std::vector<std::size_t> unlabeled_indices() const;
};

struct SplitPlan {
  int fold_count = 0;
  std::vector<int> assignments;
  std::uint64_t seed = 0;

  std::vector<std::size_t> fold_members(int fold) const;
  std::vector<std::size_t> complement(int fold) const;
};

struct Dataset {
  FeatureMatrix features;
  LabelVector labels;
};

struct BlobSpec {
  int classes = 3;
  int per_class = 100;
  int dims = 16;
  double center_distance = 10.0;
  double noise_std = 1.0;
  std::uint64_t seed = 0;
};

FeatureMatrix load_features(const std::filesystem::path& path);
FeatureMatrix parse_features(const std::string& text);
void save_features(const FeatureMatrix& features, const std::filesystem::path& path);
std::string format_features(const FeatureMatrix& features);

LabelVector load_labels(const std::filesystem::path& path);
LabelVector parse_labels(const std::string& text);
void save_labels(const LabelVector& labels, const std::filesystem::path& path);
std::string format_labels(const LabelVector& labels);

SplitPlan make_folds(const LabelVector& labels, int fold_count, std::uint64_t seed);
LabelMask make_label_mask(const LabelVector& labels, double labeled_fraction, std::uint64_t seed);

Dataset synth_blobs(const BlobSpec& spec);

/// Column-wise z-score. Constant columns are centered but not scaled.
FeatureMatrix standardize(const FeatureMatrix& features);

}  // namespace crygcn
