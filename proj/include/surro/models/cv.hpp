#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "surro/models/tree.hpp"

namespace surro {

template <typename Params>
struct CvResult {
  Params best;
  std::size_t best_index = 0;
  std::vector<double> mean_mse;  // per grid point, in grid order
};

// Shuffled fold assignment: fold sizes differ by at most one.
std::vector<std::vector<Eigen::Index>> kfold_indices(Eigen::Index n, int folds, const RandomSource& rng);

Matrix take_rows(const Matrix& m, const std::vector<Eigen::Index>& rows);
Vector take_rows(const Vector& v, const std::vector<Eigen::Index>& rows);

// The grid of tree hyperparameters searched for tree-based learners:
// max_depth {3, 4, none} x min_samples_leaf {50, 100, 200} x
// min_samples_split {100, 200, 400} x ccp_alpha {0, 1e-3}.
std::vector<TreeParams> default_tree_grid();

// `fit(features, targets, weights, params)` must return a model with
// predict(Matrix). Picks the grid point with the smallest mean out-of-fold
// (weighted) MSE; the earliest grid point wins ties.
template <typename Params, typename Fit>
CvResult<Params> cross_validate_grid(const Matrix& features, const Vector& targets, const std::vector<Params>& grid,
                                     Fit&& fit, const RandomSource& rng, int folds = 5,
                                     const std::optional<Vector>& weights = std::nullopt) {
  const Eigen::Index n = features.rows();
  if (grid.empty()) throw Error(Errc::ConfigError, "empty parameter grid");
  if (folds < 2) throw Error(Errc::ConfigError, "cross-validation needs at least two folds");
  if (n < folds) throw Error(Errc::TooFewSamples, "fewer rows than folds");
  if (targets.size() != n) throw Error(Errc::ShapeMismatch, "targets length does not match the number of rows");

  CvResult<Params> result;
  result.mean_mse.assign(grid.size(), 0.0);
  const auto fold_rows = kfold_indices(n, folds, rng);
  for (int f = 0; f < folds; ++f) {
    std::vector<Eigen::Index> train;
    for (int g = 0; g < folds; ++g) {
      if (g != f) train.insert(train.end(), fold_rows[g].begin(), fold_rows[g].end());
    }
    std::sort(train.begin(), train.end());
    const auto& test = fold_rows[static_cast<std::size_t>(f)];
    const Matrix x_train = take_rows(features, train);
    const Vector y_train = take_rows(targets, train);
    const Matrix x_test = take_rows(features, test);
    const Vector y_test = take_rows(targets, test);
    std::optional<Vector> w_train;
    Vector w_test = Vector::Ones(static_cast<Eigen::Index>(test.size()));
    if (weights) {
      w_train = take_rows(*weights, train);
      w_test = take_rows(*weights, test);
    }
    const double w_total = w_test.sum();
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const auto model = fit(x_train, y_train, w_train, grid[g]);
      const Vector err = model.predict(x_test) - y_test;
      const double mse = w_total > 0.0 ? w_test.dot(err.cwiseAbs2()) / w_total : 0.0;
      result.mean_mse[g] += mse / folds;
    }
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (result.mean_mse[g] < best) {
      best = result.mean_mse[g];
      result.best_index = g;
    }
  }
  result.best = grid[result.best_index];
  return result;
}

}  // namespace surro
