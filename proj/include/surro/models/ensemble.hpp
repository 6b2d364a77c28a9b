#pragma once

#include <optional>
#include <vector>

#include "surro/models/tree.hpp"

namespace surro {

enum class EnsembleKind { forest, boosting };

struct EnsembleModel {
  EnsembleKind kind = EnsembleKind::forest;
  std::vector<TreeModel> trees;
  double learning_rate = 1.0;  // boosting only
  double base_score = 0.0;     // boosting only
  int n_features = 0;
  // Boosting: training loss (half mean squared error) after 0, 1, ... rounds.
  std::vector<double> train_loss;

  Vector predict(const Matrix& features) const;
};

struct ForestParams {
  int n_trees = 100;
  int max_depth = -1;
  int min_samples_leaf = 1;
  int min_samples_split = 2;
  // Features drawn per split; 0 means max(1, width / 3), >= width means all.
  int features_per_split = 0;
  bool bootstrap = true;
};

// Tree i uses rng.substream(i), so the forest does not depend on fitting order.
// When `oob` is given it receives each row's out-of-bag prediction (the full
// forest prediction for rows that every tree saw).
EnsembleModel fit_forest(const Matrix& features, const Vector& targets, const ForestParams& params,
                         const RandomSource& rng, const std::optional<Vector>& weights = std::nullopt,
                         Vector* oob = nullptr);

struct GbmParams {
  int max_depth = 6;
  int min_samples_leaf = 50;
  double learning_rate = 0.05;
  int max_iter = 400;
  double l2 = 0.0;
  bool early_stopping = true;
  double validation_fraction = 0.1;
  int n_iter_no_change = 20;
  double tol = 1e-7;
};

// Least-squares gradient boosting with exact splits. The validation slice for
// early stopping is drawn from `rng`.
EnsembleModel fit_gbm(const Matrix& features, const Vector& targets, const GbmParams& params,
                      const RandomSource& rng);

}  // namespace surro
