#pragma once

#include <optional>
#include <vector>

#include "surro/cohort.hpp"
#include "surro/rng.hpp"

namespace surro {

struct TreeParams {
  int max_depth = -1;  // -1: unlimited
  int min_samples_leaf = 1;
  int min_samples_split = 2;
  double ccp_alpha = 0.0;
  // Features examined per split; 0 or >= width examines all of them.
  int max_features = 0;
  // Leaf shrinkage: value = sum(w*y) / (sum(w) + leaf_l2). Used by boosting.
  double leaf_l2 = 0.0;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
  double weight = 0.0;  // total training weight routed here
  int count = 0;        // training rows routed here (with multiplicity)
  double sse = 0.0;     // weighted squared error around the node mean

  bool is_leaf() const noexcept { return feature < 0; }
};

// Rows with x[feature] <= threshold go left.
struct TreeModel {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  int depth = 0;
  int n_features = 0;
  TreeParams params;

  double predict_row(const Matrix& features, Eigen::Index row) const;
  Vector predict(const Matrix& features) const;
  int leaf_of(const Matrix& features, Eigen::Index row) const;
  int n_leaves() const;
};

// Per-feature row orderings, computed once and shared across many fits on the
// same feature matrix (bootstrap replicates, boosting rounds).
class SortedIndex {
 public:
  explicit SortedIndex(const Matrix& features);
  const std::vector<int>& order(Eigen::Index feature) const { return orders_[static_cast<std::size_t>(feature)]; }
  Eigen::Index rows() const noexcept { return rows_; }

 private:
  Eigen::Index rows_;
  std::vector<std::vector<int>> orders_;
};

// Greedy weighted CART on squared error followed by cost-complexity pruning.
// `rng` is required only when params.max_features subsamples features.
TreeModel fit_tree(const Matrix& features, const Vector& targets,
                   const std::optional<Vector>& weights = std::nullopt, const TreeParams& params = {},
                   RandomSource* rng = nullptr);

namespace detail {
// multiplicity[i] copies of row i enter the fit (0 drops the row).
TreeModel fit_tree_presorted(const Matrix& features, const SortedIndex& index, const Vector& targets,
                             const Vector& weights, const std::vector<int>& multiplicity,
                             const TreeParams& params, RandomSource* rng);
void prune_tree(TreeModel& tree, double ccp_alpha);
}  // namespace detail

}  // namespace surro
