#include "surro/models/logistic.hpp"

#include <cmath>

#include "surro/models/linear.hpp"

namespace surro {

double sigmoid(double v) noexcept {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

double logit(double p) noexcept { return std::log(p) - std::log1p(-p); }

namespace {

// log(1 + exp(v)) without overflow.
double softplus(double v) noexcept {
  if (v > 0.0) return v + std::log1p(std::exp(-v));
  return std::log1p(std::exp(v));
}

void check_width(const Matrix& features, const Vector& coefficients) {
  if (features.cols() != coefficients.size()) {
    throw Error(Errc::WidthMismatch, "logistic model expects " + std::to_string(coefficients.size()) +
                                         " features, got " + std::to_string(features.cols()));
  }
}

}  // namespace

Vector LogisticModel::linear_predictor(const Matrix& features) const {
  check_width(features, coefficients);
  Vector eta = features * coefficients;
  eta.array() += intercept;
  return eta;
}

Vector LogisticModel::predict(const Matrix& features) const {
  Vector eta = linear_predictor(features);
  for (Eigen::Index i = 0; i < eta.size(); ++i) eta(i) = sigmoid(eta(i));
  return eta;
}

double logistic_objective(const Matrix& features, const IntVector& labels, double l2_strength,
                          double intercept, const Vector& coefficients) {
  Vector eta = features * coefficients;
  double total = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double v = eta(i) + intercept;
    total += softplus(v) - labels(i) * v;
  }
  return total + 0.5 * l2_strength * coefficients.squaredNorm();
}

Vector logistic_gradient(const Matrix& features, const IntVector& labels, double l2_strength,
                         double intercept, const Vector& coefficients) {
  const Eigen::Index p = features.cols();
  Vector eta = features * coefficients;
  Vector resid(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) resid(i) = sigmoid(eta(i) + intercept) - labels(i);
  Vector grad(p + 1);
  grad(0) = resid.sum();
  grad.tail(p) = features.transpose() * resid + l2_strength * coefficients;
  return grad;
}

LogisticModel fit_logistic(const Matrix& features, const IntVector& labels, const LogisticFitOptions& options) {
  const Eigen::Index n = features.rows();
  const Eigen::Index p = features.cols();
  if (labels.size() != n) throw Error(Errc::ShapeMismatch, "labels length does not match the number of rows");
  if (n < 1) throw Error(Errc::TooFewSamples, "fit_logistic needs at least one row");
  if (!(options.l2_strength >= 0.0) || !std::isfinite(options.l2_strength)) {
    throw Error(Errc::NonFiniteInput, "l2_strength must be a nonnegative number");
  }
  detail::require_finite(features, "features");
  Eigen::Index positives = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (labels(i) != 0 && labels(i) != 1) throw Error(Errc::NonBinaryTreatment, "labels must be 0 or 1");
    positives += labels(i);
  }
  // The unpenalized intercept diverges whenever one class is missing.
  if (positives == 0 || positives == n) throw Error(Errc::Separation, "labels contain a single class");

  // Design with a leading column of ones; theta = (intercept, beta).
  Matrix design(n, p + 1);
  design.col(0).setOnes();
  design.rightCols(p) = features;
  Vector theta = Vector::Zero(p + 1);
  theta(0) = logit(static_cast<double>(positives) / static_cast<double>(n));
  Vector penalty = Vector::Constant(p + 1, options.l2_strength);
  penalty(0) = 0.0;

  auto objective = [&](const Vector& th) {
    return logistic_objective(features, labels, options.l2_strength, th(0), th.tail(p));
  };

  double current = objective(theta);
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    const Vector eta = design * theta;
    Vector mu(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      mu(i) = sigmoid(eta(i));
      w(i) = mu(i) * (1.0 - mu(i));
    }
    Vector grad = design.transpose() * (mu - labels.cast<double>());
    grad += penalty.cwiseProduct(theta);
    if (grad.norm() < options.gradient_tolerance) break;

    Matrix hessian = design.transpose() * (design.array().colwise() * w.array()).matrix();
    hessian.diagonal() += penalty;
    const double jitter = 1e-12 * std::max(hessian.diagonal().maxCoeff(), 1.0);
    hessian.diagonal().array() += jitter;
    const Vector step = hessian.ldlt().solve(grad);

    double t = 1.0;
    Vector candidate = theta - step;
    double value = objective(candidate);
    while (!(value <= current - 1e-4 * t * grad.dot(step)) && t > 1e-12) {
      t *= 0.5;
      candidate = theta - t * step;
      value = objective(candidate);
    }
    if (!(value <= current)) break;  // no further descent at double precision
    theta = candidate;
    current = value;
  }

  if (options.l2_strength == 0.0) {
    const Vector eta = design * theta;
    if (eta.cwiseAbs().maxCoeff() > 30.0) {
      throw Error(Errc::Separation, "unpenalized logistic fit diverges (classes are separable)");
    }
  }
  LogisticModel model;
  model.intercept = theta(0);
  model.coefficients = theta.tail(p);
  return model;
}

}  // namespace surro
