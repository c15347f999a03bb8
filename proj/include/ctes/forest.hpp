#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace ctes {

struct ForestConfig {
  int trees = 100;
  /// 0 means unlimited.
  int max_depth = 0;
  int min_samples_split = 2;
  /// Features tried per split; 0 means floor(sqrt(d)).
  int max_features = 0;
  /// Per-class stratified bootstrap; when false every tree sees all rows.
  bool bootstrap = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;
  int left = -1;     // rows with value <= threshold
  int right = -1;
  std::vector<int> counts;  // per class index, over the node's training rows

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
};

struct Forest {
  std::vector<Tree> trees;
  std::vector<int> labels;  // ascending; class index i means labels[i]
  int dim = 0;
};

/// 1 - sum (n_c / N)^2.
double gini(std::span<const int> counts);

Forest fit_forest(const Eigen::MatrixXd& x, std::span<const int> labels, const ForestConfig& cfg);

/// Class index reached by one tree: leaf majority, ties to the lower class.
int tree_vote(const Tree& tree, const double* row, Eigen::Index stride = 1);

/// Majority vote over trees, ties to the lower label. Returns labels.
Eigen::VectorXi predict_forest(const Forest& forest, const Eigen::MatrixXd& x);

/// Fraction of trees voting for each class: N x labels.size().
Eigen::MatrixXd vote_fractions(const Forest& forest, const Eigen::MatrixXd& x);

}  // namespace ctes
