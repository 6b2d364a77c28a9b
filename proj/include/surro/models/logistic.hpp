#pragma once

#include "surro/cohort.hpp"

namespace surro {

struct LogisticModel {
  Vector coefficients;
  double intercept = 0.0;

  // P(label = 1 | z).
  Vector predict(const Matrix& features) const;
  Vector linear_predictor(const Matrix& features) const;
};

struct LogisticFitOptions {
  double l2_strength = 1.0;
  int max_iterations = 100;
  double gradient_tolerance = 1e-8;
};

// Minimizes sum_i NLL_i + (l2/2) |beta|^2 by Newton steps with backtracking.
// The intercept is not penalized. Throws Separation when the labels contain a
// single class, or when an unpenalized fit runs off to infinity.
LogisticModel fit_logistic(const Matrix& features, const IntVector& labels,
                           const LogisticFitOptions& options = {});

inline LogisticModel fit_logistic(const Matrix& features, const IntVector& labels, double l2_strength) {
  LogisticFitOptions options;
  options.l2_strength = l2_strength;
  return fit_logistic(features, labels, options);
}

// Penalized objective and its gradient (intercept first, then coefficients).
double logistic_objective(const Matrix& features, const IntVector& labels, double l2_strength,
                          double intercept, const Vector& coefficients);
Vector logistic_gradient(const Matrix& features, const IntVector& labels, double l2_strength,
                         double intercept, const Vector& coefficients);

double sigmoid(double v) noexcept;
double logit(double p) noexcept;

}  // namespace surro
