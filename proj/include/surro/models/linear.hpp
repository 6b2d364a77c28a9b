#pragma once

#include <optional>

#include "surro/cohort.hpp"

namespace surro {

struct LinearModel {
  Vector coefficients;
  double intercept = 0.0;

  Vector predict(const Matrix& features) const;
};

struct LinearFitOptions {
  // 0 selects weighted least squares; > 0 selects the Lasso
  //   (1/2n) sum_i w_i (y_i - b - beta'z_i)^2 + l1_strength * |beta|_1
  double l1_strength = 0.0;
  bool fit_intercept = true;
  int max_sweeps = 10000;
  // Largest coefficient change (original scale) that ends coordinate descent.
  double tolerance = 1e-8;
};

// Weighted least squares or weighted Lasso. The intercept is never penalized.
// Lasso coordinates are standardized internally with a per-coordinate penalty
// that keeps the objective identical to the one above on the original scale.
LinearModel fit_linear(const Matrix& features, const Vector& targets,
                       const std::optional<Vector>& weights = std::nullopt,
                       const LinearFitOptions& options = {});

inline LinearModel fit_linear(const Matrix& features, const Vector& targets,
                              const std::optional<Vector>& weights, double l1_strength) {
  LinearFitOptions options;
  options.l1_strength = l1_strength;
  return fit_linear(features, targets, weights, options);
}

namespace detail {
void require_finite(const Matrix& m, const char* what);
void require_finite(const Vector& v, const char* what);
// Throws AllZeroWeights / NonFiniteInput / ShapeMismatch as appropriate.
void check_weights(const std::optional<Vector>& weights, Eigen::Index n);
}  // namespace detail

}  // namespace surro
