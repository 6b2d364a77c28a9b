#include "surro/models/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "surro/models/linear.hpp"

namespace surro {

double TreeModel::predict_row(const Matrix& features, Eigen::Index row) const {
  return nodes[static_cast<std::size_t>(leaf_of(features, row))].value;
}

int TreeModel::leaf_of(const Matrix& features, Eigen::Index row) const {
  int at = 0;
  while (!nodes[static_cast<std::size_t>(at)].is_leaf()) {
    const TreeNode& node = nodes[static_cast<std::size_t>(at)];
    at = features(row, node.feature) <= node.threshold ? node.left : node.right;
  }
  return at;
}

Vector TreeModel::predict(const Matrix& features) const {
  if (features.cols() != n_features) {
    throw Error(Errc::WidthMismatch, "tree expects " + std::to_string(n_features) + " features, got " +
                                         std::to_string(features.cols()));
  }
  Vector out(features.rows());
  for (Eigen::Index i = 0; i < features.rows(); ++i) out(i) = predict_row(features, i);
  return out;
}

int TreeModel::n_leaves() const {
  return static_cast<int>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

SortedIndex::SortedIndex(const Matrix& features) : rows_(features.rows()) {
  orders_.resize(static_cast<std::size_t>(features.cols()));
  for (Eigen::Index f = 0; f < features.cols(); ++f) {
    auto& order = orders_[static_cast<std::size_t>(f)];
    order.resize(static_cast<std::size_t>(rows_));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return features(a, f) < features(b, f); });
  }
}

namespace {

class Builder {
 public:
  Builder(const Matrix& x, const SortedIndex& index, const Vector& y, const Vector& w,
          const std::vector<int>& mult, const TreeParams& params, RandomSource* rng)
      : x_(x), y_(y), mult_(mult), params_(params), rng_(rng) {
    const auto n = static_cast<std::size_t>(x.rows());
    wm_.resize(n);
    for (std::size_t i = 0; i < n; ++i) wm_[i] = w(static_cast<Eigen::Index>(i)) * mult[i];
    ord_.resize(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index f = 0; f < x.cols(); ++f) {
      auto& dst = ord_[static_cast<std::size_t>(f)];
      dst.reserve(n);
      for (int r : index.order(f)) {
        if (mult[static_cast<std::size_t>(r)] > 0) dst.push_back(r);
      }
    }
    goes_left_.assign(n, 0);
    features_.resize(static_cast<std::size_t>(x.cols()));
    std::iota(features_.begin(), features_.end(), 0);
  }

  TreeModel run() {
    TreeModel tree;
    tree.n_features = static_cast<int>(x_.cols());
    tree.params = params_;
    const auto slots = static_cast<Eigen::Index>(ord_.empty() ? active_rows() : ord_[0].size());
    build(tree, 0, slots, 0);
    return tree;
  }

 private:
  // Only reached when there are no features at all.
  std::size_t active_rows() {
    all_rows_.clear();
    for (std::size_t i = 0; i < mult_.size(); ++i) {
      if (mult_[i] > 0) all_rows_.push_back(static_cast<int>(i));
    }
    return all_rows_.size();
  }

  const std::vector<int>& rows_of_any_feature() const { return ord_.empty() ? all_rows_ : ord_[0]; }

  int build(TreeModel& tree, Eigen::Index begin, Eigen::Index end, int depth) {
    const auto& rows = rows_of_any_feature();
    double wsum = 0.0, wysum = 0.0;
    int count = 0;
    double ymin = std::numeric_limits<double>::infinity();
    double ymax = -ymin;
    for (Eigen::Index i = begin; i < end; ++i) {
      const int r = rows[static_cast<std::size_t>(i)];
      wsum += wm_[static_cast<std::size_t>(r)];
      wysum += wm_[static_cast<std::size_t>(r)] * y_(r);
      count += mult_[static_cast<std::size_t>(r)];
      ymin = std::min(ymin, y_(r));
      ymax = std::max(ymax, y_(r));
    }
    const double mean = wsum > 0.0 ? wysum / wsum : 0.0;
    double sse = 0.0;
    for (Eigen::Index i = begin; i < end; ++i) {
      const int r = rows[static_cast<std::size_t>(i)];
      const double dev = y_(r) - mean;
      sse += wm_[static_cast<std::size_t>(r)] * dev * dev;
    }

    TreeNode node;
    node.weight = wsum;
    node.count = count;
    node.sse = sse;
    node.value = params_.leaf_l2 > 0.0 ? wysum / (wsum + params_.leaf_l2) : mean;
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(node);
    tree.depth = std::max(tree.depth, depth);

    const bool depth_exhausted = params_.max_depth >= 0 && depth >= params_.max_depth;
    if (depth_exhausted || count < params_.min_samples_split || count < 2 * params_.min_samples_leaf ||
        ymin == ymax || !(wsum > 0.0)) {
      return id;
    }

    const Split split = find_split(begin, end, wsum, wysum, count);
    if (split.feature < 0) return id;

    // Partition every feature's ordering stably around the chosen split.
    Eigen::Index n_left = 0;
    for (Eigen::Index i = begin; i < end; ++i) {
      const int r = rows[static_cast<std::size_t>(i)];
      const bool left = x_(r, split.feature) <= split.threshold;
      goes_left_[static_cast<std::size_t>(r)] = left ? 1 : 0;
      n_left += left ? 1 : 0;
    }
    if (n_left == 0 || n_left == end - begin) return id;
    for (auto& order : ord_) {
      buffer_.clear();
      auto first = order.begin() + begin;
      auto last = order.begin() + end;
      auto out = first;
      for (auto it = first; it != last; ++it) {
        if (goes_left_[static_cast<std::size_t>(*it)]) {
          *out++ = *it;
        } else {
          buffer_.push_back(*it);
        }
      }
      std::copy(buffer_.begin(), buffer_.end(), out);
    }

    const int left = build(tree, begin, begin + n_left, depth + 1);
    const int right = build(tree, begin + n_left, end, depth + 1);
    TreeNode& self = tree.nodes[static_cast<std::size_t>(id)];
    self.feature = split.feature;
    self.threshold = split.threshold;
    self.left = left;
    self.right = right;
    return id;
  }

  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  void select_features() {
    const auto p = static_cast<int>(x_.cols());
    std::iota(features_.begin(), features_.end(), 0);
    n_selected_ = p;
    if (params_.max_features > 0 && params_.max_features < p) {
      if (rng_ == nullptr) throw Error(Errc::ConfigError, "feature subsampling needs a random source");
      for (int i = 0; i < params_.max_features; ++i) {
        const auto j = static_cast<int>(i + rng_->uniform_index(static_cast<std::size_t>(p - i)));
        std::swap(features_[static_cast<std::size_t>(i)], features_[static_cast<std::size_t>(j)]);
      }
      n_selected_ = params_.max_features;
      std::sort(features_.begin(), features_.begin() + n_selected_);
    }
  }

  Split find_split(Eigen::Index begin, Eigen::Index end, double wsum, double wysum, int count) {
    select_features();
    const double lambda = params_.leaf_l2;
    const double parent = wysum * wysum / (wsum + lambda);
    const int msl = std::max(params_.min_samples_leaf, 1);
    Split best;
    for (int k = 0; k < n_selected_; ++k) {
      const int f = features_[static_cast<std::size_t>(k)];
      const auto& order = ord_[static_cast<std::size_t>(f)];
      double wl = 0.0, sl = 0.0;
      int cl = 0;
      for (Eigen::Index i = begin; i + 1 < end; ++i) {
        const int r = order[static_cast<std::size_t>(i)];
        wl += wm_[static_cast<std::size_t>(r)];
        sl += wm_[static_cast<std::size_t>(r)] * y_(r);
        cl += mult_[static_cast<std::size_t>(r)];
        if (count - cl < msl) break;
        const double a = x_(r, f);
        const double b = x_(order[static_cast<std::size_t>(i + 1)], f);
        if (!(a < b) || cl < msl) continue;
        const double wr = wsum - wl;
        if (!(wl > 0.0) || !(wr > 0.0)) continue;
        const double sr = wysum - sl;
        const double gain = sl * sl / (wl + lambda) + sr * sr / (wr + lambda) - parent;
        if (gain > 0.0 && gain > best.gain * (1.0 + 1e-10)) {
          double mid = a + 0.5 * (b - a);
          if (!(mid < b)) mid = a;
          best = Split{f, mid, gain};
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  const Vector& y_;
  const std::vector<int>& mult_;
  TreeParams params_;
  RandomSource* rng_;
  std::vector<double> wm_;
  std::vector<std::vector<int>> ord_;
  std::vector<int> all_rows_;
  std::vector<char> goes_left_;
  std::vector<int> buffer_;
  std::vector<int> features_;
  int n_selected_ = 0;
};

struct SubtreeStats {
  double leaf_sse = 0.0;
  int leaves = 0;
};

SubtreeStats collect(const TreeModel& tree, int id, std::vector<SubtreeStats>& stats) {
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
  SubtreeStats s;
  if (node.is_leaf()) {
    s.leaf_sse = node.sse;
    s.leaves = 1;
  } else {
    const SubtreeStats l = collect(tree, node.left, stats);
    const SubtreeStats r = collect(tree, node.right, stats);
    s.leaf_sse = l.leaf_sse + r.leaf_sse;
    s.leaves = l.leaves + r.leaves;
  }
  stats[static_cast<std::size_t>(id)] = s;
  return s;
}

int compact(const TreeModel& src, int id, int depth, TreeModel& dst) {
  const int at = static_cast<int>(dst.nodes.size());
  dst.nodes.push_back(src.nodes[static_cast<std::size_t>(id)]);
  dst.depth = std::max(dst.depth, depth);
  const TreeNode node = src.nodes[static_cast<std::size_t>(id)];
  if (!node.is_leaf()) {
    const int l = compact(src, node.left, depth + 1, dst);
    const int r = compact(src, node.right, depth + 1, dst);
    dst.nodes[static_cast<std::size_t>(at)].left = l;
    dst.nodes[static_cast<std::size_t>(at)].right = r;
  }
  return at;
}

}  // namespace

namespace detail {

void prune_tree(TreeModel& tree, double ccp_alpha) {
  if (!(ccp_alpha > 0.0) || tree.nodes.empty()) return;
  const double root_weight = tree.nodes[0].weight;
  std::vector<SubtreeStats> stats(tree.nodes.size());
  while (!tree.nodes[0].is_leaf()) {
    collect(tree, 0, stats);
    int weakest = -1;
    double weakest_alpha = std::numeric_limits<double>::infinity();
    // Walk only reachable internal nodes.
    std::vector<int> stack{0};
    while (!stack.empty()) {
      const int id = stack.back();
      stack.pop_back();
      const TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
      if (node.is_leaf()) continue;
      const SubtreeStats& s = stats[static_cast<std::size_t>(id)];
      const double alpha = (node.sse - s.leaf_sse) / root_weight / (s.leaves - 1);
      if (alpha < weakest_alpha || (alpha == weakest_alpha && id < weakest)) {
        weakest_alpha = alpha;
        weakest = id;
      }
      stack.push_back(node.right);
      stack.push_back(node.left);
    }
    if (weakest < 0 || weakest_alpha > ccp_alpha) break;
    TreeNode& node = tree.nodes[static_cast<std::size_t>(weakest)];
    node.feature = -1;
    node.left = node.right = -1;
  }
  TreeModel out;
  out.n_features = tree.n_features;
  out.params = tree.params;
  compact(tree, 0, 0, out);
  tree = std::move(out);
}

TreeModel fit_tree_presorted(const Matrix& features, const SortedIndex& index, const Vector& targets,
                             const Vector& weights, const std::vector<int>& multiplicity,
                             const TreeParams& params, RandomSource* rng) {
  Builder builder(features, index, targets, weights, multiplicity, params, rng);
  TreeModel tree = builder.run();
  prune_tree(tree, params.ccp_alpha);
  return tree;
}

}  // namespace detail

TreeModel fit_tree(const Matrix& features, const Vector& targets, const std::optional<Vector>& weights,
                   const TreeParams& params, RandomSource* rng) {
  const Eigen::Index n = features.rows();
  if (n < 1) throw Error(Errc::TooFewSamples, "fit_tree needs at least one row");
  if (targets.size() != n) throw Error(Errc::ShapeMismatch, "targets length does not match the number of rows");
  detail::require_finite(features, "features");
  detail::require_finite(targets, "targets");
  detail::check_weights(weights, n);
  const Vector w = weights ? *weights : Vector::Ones(n);
  const SortedIndex index(features);
  const std::vector<int> multiplicity(static_cast<std::size_t>(n), 1);
  return detail::fit_tree_presorted(features, index, targets, w, multiplicity, params, rng);
}

}  // namespace surro
