#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gpert/metrics.hpp"

namespace gpert {

// Dense row-major matrix; rows are observations.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct ProjectionModel {
  std::vector<double> mean;
  // D orthonormal rows of length d, by decreasing explained variance. The
  // first coordinate with |x| > 1e-12 of each component is positive.
  std::vector<std::vector<double>> components;
  std::vector<double> explained_variance;
  double total_variance = 0.0;

  std::size_t input_dim() const { return mean.size(); }
  std::size_t output_dim() const { return components.size(); }
};

// Top-D eigenvectors of the (n-1) sample covariance. Requires n >= 2 and
// 1 <= D <= min(n-1, d); throws on zero total variance.
ProjectionModel pca_fit(const Matrix& rows, std::size_t D = 3);

// (row - mean) . components^T
Matrix pca_project(const ProjectionModel& model, const Matrix& rows);

// mean + projected . components
Matrix pca_reconstruct(const ProjectionModel& model, const Matrix& projected);

struct ClusterLabeling {
  std::vector<int> labels;  // -1 is noise
  int k = 0;

  std::size_t noise_count() const;
  double noise_fraction() const;
  std::vector<std::size_t> cluster_sizes() const;
};

enum class ZeroNormPolicy { Error, Noise };

struct HdbscanOptions {
  std::size_t min_cluster_size = 5;
  // Neighbour count for core distances, the point itself included. Defaults
  // to min_cluster_size.
  std::optional<std::size_t> min_samples;
  ZeroNormPolicy zero_norm = ZeroNormPolicy::Error;
  double zero_norm_tolerance = 1e-12;
};

// Density clustering under cosine distance: core distances, mutual
// reachability, minimum spanning tree, single-linkage hierarchy, condensed tree
// and excess-of-mass selection. Cluster ids are assigned in order of each
// cluster's lowest point index.
ClusterLabeling hdbscan_cluster(const Matrix& points, const HdbscanOptions& options = {});

struct ClusterTableOptions {
  std::string metric = std::string(metric::kBleu);
  std::string baseline_condition = "original";
  // Conditions that are neither baseline nor perturbation-trained.
  std::vector<std::string> excluded_conditions = {"no-training"};
  // Only score records of perturbed prompts (variant_index >= 0).
  bool perturbed_only = true;
  std::size_t max_examples = 3;
};

struct ClusterScoreRow {
  std::string modality;
  int cluster_id = -1;  // -1 is the noise row
  std::size_t size = 0;
  std::string theme;
  std::vector<std::string> example_ids;
  std::map<std::string, double> condition_means;
  std::optional<double> perturbation_mean;
  std::optional<double> baseline_mean;
  std::optional<double> ratio;
  bool flagged = false;  // ratio omitted for a missing or zero denominator
};

// One row per cluster plus a trailing noise row when noise points exist.
// Cluster rows are ordered by ratio descending (rows without a ratio last).
// perturbation_mean is the mean of the per-condition means over every
// perturbation-trained condition. Throws if a scored item has no label.
std::vector<ClusterScoreRow> cluster_score_table(const std::string& modality, std::span<const std::string> item_ids,
                                                 const ClusterLabeling& labeling,
                                                 std::span<const ScoreRecord> records,
                                                 const ClusterTableOptions& options = {},
                                                 const std::map<int, std::string>& themes = {});

}  // namespace gpert
