#include "surro/models/ensemble.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "surro/models/linear.hpp"

namespace surro {

namespace {

// Children are stored next to each other (right = left + 1) and leaves point
// to themselves with an infinite threshold, so every row takes exactly
// `depth` branch-free steps.
struct FlatNode {
  double threshold;
  int feature;
  int left;
};

struct FlatForest {
  std::vector<FlatNode> nodes;
  std::vector<double> values;
  std::vector<int> roots;
  std::vector<int> depths;
};

FlatForest flatten(const std::vector<TreeModel>& trees) {
  FlatForest f;
  for (const auto& tree : trees) {
    const int root = static_cast<int>(f.nodes.size());
    f.roots.push_back(root);
    // Breadth-first renumbering with sibling pairs allocated together.
    struct Item {
      int src, dst, depth;
    };
    std::vector<Item> queue{{0, root, 0}};
    int depth = 0;
    f.nodes.push_back({});
    f.values.push_back(0.0);
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const auto [src, dst, level] = queue[q];
      depth = std::max(depth, level);
      const TreeNode& nd = tree.nodes[static_cast<std::size_t>(src)];
      f.values[static_cast<std::size_t>(dst)] = nd.value;
      if (nd.is_leaf()) {
        f.nodes[static_cast<std::size_t>(dst)] = {std::numeric_limits<double>::infinity(), 0, dst};
        continue;
      }
      const int left = static_cast<int>(f.nodes.size());
      f.nodes.resize(f.nodes.size() + 2);
      f.values.resize(f.values.size() + 2);
      f.nodes[static_cast<std::size_t>(dst)] = {nd.threshold, nd.feature, left};
      queue.push_back({nd.left, left, level + 1});
      queue.push_back({nd.right, left + 1, level + 1});
    }
    f.depths.push_back(depth);
  }
  return f;
}

// Sum of tree predictions, evaluated in row blocks held in a small row-major
// buffer so that every tree reuses the cached block.
Vector sum_trees(const std::vector<TreeModel>& trees, const Matrix& features) {
  const FlatForest forest = flatten(trees);
  const FlatNode* nodes = forest.nodes.data();
  const Eigen::Index n = features.rows();
  const Eigen::Index p = features.cols();
  constexpr Eigen::Index kBlock = 256;
  constexpr int kLanes = 16;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> block(kBlock, p);
  Vector out = Vector::Zero(n);
  for (Eigen::Index start = 0; start < n; start += kBlock) {
    const Eigen::Index rows = std::min(kBlock, n - start);
    block.topRows(rows) = features.middleRows(start, rows);
    for (std::size_t t = 0; t < forest.roots.size(); ++t) {
      const int root = forest.roots[t];
      const int depth = forest.depths[t];
      for (Eigen::Index i0 = 0; i0 < rows; i0 += kLanes) {
        const int lanes = static_cast<int>(std::min<Eigen::Index>(kLanes, rows - i0));
        int at[kLanes];
        const double* row[kLanes];
        for (int l = 0; l < kLanes; ++l) {
          at[l] = root;
          row[l] = block.data() + (i0 + std::min(l, lanes - 1)) * p;
        }
        for (int d = 0; d < depth; ++d) {
          for (int l = 0; l < kLanes; ++l) {
            const FlatNode& nd = nodes[at[l]];
            at[l] = nd.left + (row[l][nd.feature] > nd.threshold);
          }
        }
        for (int l = 0; l < lanes; ++l) out(start + i0 + l) += forest.values[static_cast<std::size_t>(at[l])];
      }
    }
  }
  return out;
}

}  // namespace

Vector EnsembleModel::predict(const Matrix& features) const {
  if (features.cols() != n_features) {
    throw Error(Errc::WidthMismatch, "ensemble expects " + std::to_string(n_features) + " features, got " +
                                         std::to_string(features.cols()));
  }
  const Eigen::Index n = features.rows();
  if (kind == EnsembleKind::forest) {
    if (trees.empty()) return Vector::Zero(n);
    return sum_trees(trees, features) / static_cast<double>(trees.size());
  }
  Vector out = Vector::Constant(n, base_score);
  out += learning_rate * sum_trees(trees, features);
  return out;
}

EnsembleModel fit_forest(const Matrix& features, const Vector& targets, const ForestParams& params,
                         const RandomSource& rng, const std::optional<Vector>& weights, Vector* oob) {
  const Eigen::Index n = features.rows();
  if (n < 2) throw Error(Errc::TooFewSamples, "fit_forest needs at least two rows");
  if (targets.size() != n) throw Error(Errc::ShapeMismatch, "targets length does not match the number of rows");
  if (params.n_trees < 1) throw Error(Errc::ConfigError, "n_trees must be positive");
  detail::require_finite(features, "features");
  detail::require_finite(targets, "targets");
  detail::check_weights(weights, n);
  const Vector w = weights ? *weights : Vector::Ones(n);

  const auto p = static_cast<int>(features.cols());
  TreeParams tp;
  tp.max_depth = params.max_depth;
  tp.min_samples_leaf = params.min_samples_leaf;
  tp.min_samples_split = params.min_samples_split;
  tp.max_features = params.features_per_split > 0 ? params.features_per_split : std::max(1, p / 3);
  if (tp.max_features >= p) tp.max_features = 0;

  const SortedIndex index(features);
  EnsembleModel model;
  model.kind = EnsembleKind::forest;
  model.n_features = p;
  model.trees.reserve(static_cast<std::size_t>(params.n_trees));
  std::vector<int> multiplicity(static_cast<std::size_t>(n), 1);
  Vector oob_sum = Vector::Zero(n);
  std::vector<int> oob_count(static_cast<std::size_t>(n), 0);
  for (int t = 0; t < params.n_trees; ++t) {
    RandomSource tree_rng = rng.substream(static_cast<std::uint64_t>(t));
    if (params.bootstrap) {
      std::fill(multiplicity.begin(), multiplicity.end(), 0);
      for (Eigen::Index i = 0; i < n; ++i) ++multiplicity[tree_rng.uniform_index(static_cast<std::size_t>(n))];
    }
    model.trees.push_back(
        detail::fit_tree_presorted(features, index, targets, w, multiplicity, tp, &tree_rng));
    if (oob) {
      for (Eigen::Index i = 0; i < n; ++i) {
        if (multiplicity[static_cast<std::size_t>(i)] != 0) continue;
        oob_sum(i) += model.trees.back().predict_row(features, i);
        ++oob_count[static_cast<std::size_t>(i)];
      }
    }
  }
  if (oob) {
    *oob = Vector(n);
    Vector full;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = oob_count[static_cast<std::size_t>(i)];
      if (c > 0) {
        (*oob)(i) = oob_sum(i) / c;
      } else {
        if (full.size() == 0) full = model.predict(features);
        (*oob)(i) = full(i);
      }
    }
  }
  return model;
}

EnsembleModel fit_gbm(const Matrix& features, const Vector& targets, const GbmParams& params,
                      const RandomSource& rng) {
  const Eigen::Index n = features.rows();
  if (n < 20) throw Error(Errc::TooFewSamples, "fit_gbm needs at least 20 rows");
  if (targets.size() != n) throw Error(Errc::ShapeMismatch, "targets length does not match the number of rows");
  detail::require_finite(features, "features");
  detail::require_finite(targets, "targets");

  EnsembleModel model;
  model.kind = EnsembleKind::boosting;
  model.learning_rate = params.learning_rate;
  model.n_features = static_cast<int>(features.cols());

  // Train / validation partition.
  std::vector<int> multiplicity(static_cast<std::size_t>(n), 1);
  std::vector<Eigen::Index> validation;
  if (params.early_stopping) {
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    RandomSource split_rng = rng.substream(0);
    split_rng.shuffle(std::span<Eigen::Index>(perm));
    auto n_val = static_cast<Eigen::Index>(params.validation_fraction * static_cast<double>(n));
    n_val = std::clamp<Eigen::Index>(n_val, 1, n - 1);
    validation.assign(perm.begin(), perm.begin() + n_val);
    std::sort(validation.begin(), validation.end());
    for (Eigen::Index i : validation) multiplicity[static_cast<std::size_t>(i)] = 0;
  }
  const auto n_train = static_cast<double>(std::count(multiplicity.begin(), multiplicity.end(), 1));

  double base = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) base += multiplicity[static_cast<std::size_t>(i)] * targets(i);
  base /= n_train;
  model.base_score = base;

  Vector raw = Vector::Constant(n, base);  // base + lr * sum of trees, on every row
  auto train_loss = [&]() {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (multiplicity[static_cast<std::size_t>(i)]) s += 0.5 * (targets(i) - raw(i)) * (targets(i) - raw(i));
    }
    return s / n_train;
  };
  auto validation_loss = [&]() {
    double s = 0.0;
    for (Eigen::Index i : validation) s += 0.5 * (targets(i) - raw(i)) * (targets(i) - raw(i));
    return s / static_cast<double>(validation.size());
  };
  model.train_loss.push_back(train_loss());

  bool constant = true;
  for (Eigen::Index i = 0; i < n && constant; ++i) {
    if (multiplicity[static_cast<std::size_t>(i)] && targets(i) != targets(0)) constant = false;
  }
  if (constant) return model;

  TreeParams tp;
  tp.max_depth = params.max_depth;
  tp.min_samples_leaf = params.min_samples_leaf;
  tp.min_samples_split = 2;
  tp.leaf_l2 = params.l2;

  const SortedIndex index(features);
  const Vector ones = Vector::Ones(n);
  double best_validation = params.early_stopping ? validation_loss() : 0.0;
  int since_best = 0;
  Vector residual(n);
  for (int iter = 0; iter < params.max_iter; ++iter) {
    residual = targets - raw;
    TreeModel tree = detail::fit_tree_presorted(features, index, residual, ones, multiplicity, tp, nullptr);
    if (tree.nodes.size() == 1 && tree.nodes[0].value == 0.0) break;
    for (Eigen::Index i = 0; i < n; ++i) raw(i) += params.learning_rate * tree.predict_row(features, i);
    model.trees.push_back(std::move(tree));
    model.train_loss.push_back(train_loss());
    if (params.early_stopping) {
      const double v = validation_loss();
      if (v < best_validation - params.tol) {
        best_validation = v;
        since_best = 0;
      } else if (++since_best >= params.n_iter_no_change) {
        break;
      }
    }
  }
  return model;
}

}  // namespace surro
