#pragma once

#include <cstdint>
#include <vector>

#include "ipad/data_model.hpp"

namespace ipad {

struct ForestConfig {
  int n_trees = 500;
  int mtry = 1;
  int min_leaf = 5;
  SeedSpec seed;
  int threads = 1;  // trees are seeded per index, so results do not depend on this
};

/// n_trees = 500, mtry = max(floor(m/3), 1), min_leaf = 5.
ForestConfig default_forest_config(Eigen::Index n_columns, const SeedSpec& seed);

/// One CART regression tree stored as a flat node array; node 0 is the root.
class RegressionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };

  explicit RegressionTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}

  double predict(const Matrix& a, Eigen::Index row) const;

  /// Prediction for `row` with feature `permuted_feature` read from `donor_row`.
  double predict_swapped(const Matrix& a, Eigen::Index row, int permuted_feature,
                         Eigen::Index donor_row) const;

  bool uses_feature(int feature) const;
  const std::vector<Node>& nodes() const noexcept { return nodes_; }

 private:
  std::vector<Node> nodes_;
};

/// Bagged regression trees with their out-of-bag row sets. Immutable once fitted.
class ForestModel {
 public:
  ForestModel(std::vector<RegressionTree> trees, std::vector<std::vector<Eigen::Index>> oob,
              Eigen::Index n_columns, ForestConfig config);

  double predict(const Matrix& a, Eigen::Index row) const;
  Vector predict(const Matrix& a) const;

  /// Mean over trees for which the row is out of bag; NaN for rows that never are.
  Vector oob_predictions(const Matrix& a) const;

  const std::vector<RegressionTree>& trees() const noexcept { return trees_; }
  const std::vector<std::vector<Eigen::Index>>& oob_rows() const noexcept { return oob_; }
  Eigen::Index n_columns() const noexcept { return n_columns_; }
  const ForestConfig& config() const noexcept { return config_; }

 private:
  std::vector<RegressionTree> trees_;
  std::vector<std::vector<Eigen::Index>> oob_;
  Eigen::Index n_columns_;
  ForestConfig config_;
};

/// Variance-reduction CART trees on bootstrap samples; tree t draws from child(config.seed, t).
ForestModel fit_forest(const Matrix& a, const Vector& y, const ForestConfig& config);

struct MdaReport {
  Vector importance;  // raw signed mean decrease in accuracy, one entry per column
  int n_permutations = 1;
};

/// Out-of-bag permutation importance: for every tree, the increase in OOB MSE
/// after permuting column j among that tree's OOB rows, averaged over trees.
/// Tree t permutes with child(seed, t).
MdaReport mda(const ForestModel& model, const Matrix& a, const Vector& y, const SeedSpec& seed);

}  // namespace ipad
