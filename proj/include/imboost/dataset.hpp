#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace imboost {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-feature min/max taken from training rows.
struct NormStats {
  Eigen::VectorXd min;
  Eigen::VectorXd max;

  static NormStats from_rows(const Eigen::MatrixXd& rows);
  /// (x - min) / (max - min); constant features map to 0.
  Eigen::MatrixXd transform(const Eigen::MatrixXd& rows) const;
};

struct Dataset {
  Eigen::MatrixXd features;  // n x p; normalized once split_and_normalize ran
  Eigen::MatrixXd raw_features;
  std::optional<std::vector<int>> labels;  // 1 = outlier
  std::vector<std::string> feature_names;
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  std::optional<NormStats> norm;
  std::string name;

  std::size_t rows() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(features.cols()); }
  bool has_labels() const { return labels.has_value(); }

  Eigen::MatrixXd gather(const std::vector<std::size_t>& idx) const;
  std::vector<int> gather_labels(const std::vector<std::size_t>& idx) const;
  Eigen::MatrixXd train_features() const { return gather(train_idx); }
  Eigen::MatrixXd test_features() const { return gather(test_idx); }
};

/// Header row required. With `label_column`, that column must hold 0/1 and is
/// removed from the features. Errors name the 1-based data row and column.
Dataset load_csv(const std::string& path, const std::optional<std::string>& label_column = {});
Dataset parse_csv(const std::string& text, const std::optional<std::string>& label_column = {});
void write_csv(const Dataset& data, const std::string& path, const std::string& label_column = "label");

/// Seeded shuffle, first ceil((1 - test_fraction) n) rows train, min-max scaling
/// from train rows; test values clamped to [-0.5, 1.5].
Dataset split_and_normalize(Dataset data, double test_fraction, std::uint64_t seed);

struct SyntheticSpec {
  std::size_t n = 2000;
  double outlier_fraction = 0.05;  // p_o
  std::string inlier_kind = "gmm2";      // gmm2 | gaussian
  std::string outlier_kind = "uniform";  // uniform | cluster
  /// 0 keeps outliers >= 3 sigma from every inlier centre; 1 allows full overlap.
  double overlap = 0.5;
  std::uint64_t seed = 0;

  /// "default", "ambiguous", or comma-separated key=value overrides.
  static SyntheticSpec parse(const std::string& text);
};

/// Labeled 2-D benchmark. Exactly ceil(p_o n) rows are outliers.
Dataset make_synthetic(const SyntheticSpec& spec);

}  // namespace imboost
