#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "badam/matrix.hpp"
#include "badam/seed.hpp"

namespace badam {

enum class Split { train, test };

/// Feature matrix plus either class labels or real-valued targets.
struct LabeledDataset {
  Matrix features;
  std::vector<std::size_t> labels;
  Matrix targets;
  Split split = Split::train;
  std::size_t num_classes = 0;
  /// Column names, when the source had them (CSV).
  std::vector<std::string> feature_names;

  std::size_t size() const { return features.rows(); }
  bool is_classification() const { return !labels.empty(); }
  /// Rows at `indices`, in that order.
  LabeledDataset subset(std::span<const std::size_t> indices) const;
  /// Throws ShapeError if row counts or class labels are inconsistent.
  void validate() const;
};

/// Synthetic 1-d regression problem:
///   y = x + 0.3 sin(2 pi (x + e)) + 0.3 sin(4 pi (x + e)) + e,  e ~ N(0, noise_std^2)
/// A single draw of e per point is used in all three places.
struct RegressionTask {
  std::size_t n_train = 10000;
  std::size_t n_test = 10000;
  double train_lo = 0.0;
  double train_hi = 0.5;
  double test_lo = -0.5;
  double test_hi = 1.2;
  double noise_std = 0.02;

  void validate() const;
};

double regression_curve(double x, double noise);

struct RegressionData {
  LabeledDataset train;
  /// Equally spaced inputs over the test range; targets are the noiseless curve.
  LabeledDataset test_grid;
};

RegressionData gen_regression(const RegressionTask& task, Rng& rng);

/// Raw contents of an IDX file (unsigned-byte element type only).
struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;
};

/// Reads an IDX file; gzip-compressed files are detected and inflated.
IdxArray read_idx(const std::filesystem::path& path);
/// Writes an IDX file; a ".gz" suffix selects gzip compression.
void write_idx(const std::filesystem::path& path, const IdxArray& array);

/// MNIST-style loader: images (magic 0x00000803) scaled by 1/255 and
/// flattened row-major; labels (magic 0x00000801). Counts must agree.
LabeledDataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

struct CsvSchema {
  /// Columns to one-hot encode (levels in lexicographic order).
  std::vector<std::string> categorical;
  /// true: label column holds class ids (categorical or non-negative
  /// integers). false: real-valued regression target.
  bool label_is_class = true;
  /// Keep a seeded random subset of this many rows (0 keeps all).
  std::size_t subsample = 0;
  std::uint64_t subsample_seed = 0;
};

/// Comma-separated file with a header row. Feature columns keep file order;
/// a categorical column with k levels expands in place into k columns named
/// "column=level".
LabeledDataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                        const CsvSchema& schema = {});

}  // namespace badam
