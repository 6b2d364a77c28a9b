#include "surro/models/linear.hpp"

#include <cmath>
#include <vector>

namespace surro {

namespace detail {

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw Error(Errc::NonFiniteInput, std::string(what) + " contains NaN or infinity");
}

void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw Error(Errc::NonFiniteInput, std::string(what) + " contains NaN or infinity");
}

void check_weights(const std::optional<Vector>& weights, Eigen::Index n) {
  if (!weights) return;
  if (weights->size() != n) throw Error(Errc::ShapeMismatch, "weights length does not match the number of rows");
  require_finite(*weights, "weights");
  if ((weights->array() < 0.0).any()) throw Error(Errc::NonFiniteInput, "weights must be nonnegative");
  if (!(weights->array() > 0.0).any()) throw Error(Errc::AllZeroWeights, "no strictly positive weight");
}

}  // namespace detail

Vector LinearModel::predict(const Matrix& features) const {
  if (features.cols() != coefficients.size()) {
    throw Error(Errc::WidthMismatch, "linear model expects " + std::to_string(coefficients.size()) + " features, got " +
                                         std::to_string(features.cols()));
  }
  Vector out = features * coefficients;
  out.array() += intercept;
  return out;
}

namespace {

double soft_threshold(double value, double threshold) {
  if (value > threshold) return value - threshold;
  if (value < -threshold) return value + threshold;
  return 0.0;
}

Vector solve_normal_equations(const Matrix& gram, const Vector& rhs) {
  Eigen::LDLT<Matrix> ldlt(gram);
  bool singular = ldlt.info() != Eigen::Success || !ldlt.isPositive();
  if (!singular) {
    const Vector d = ldlt.vectorD();
    const double max_d = d.cwiseAbs().maxCoeff();
    singular = d.minCoeff() <= 1e-12 * max_d;
  }
  if (!singular) return ldlt.solve(rhs);
  const double scale = std::max(gram.diagonal().cwiseAbs().mean(), 1.0);
  Matrix jittered = gram;
  jittered.diagonal().array() += 1e-10 * scale;
  return jittered.ldlt().solve(rhs);
}

}  // namespace

LinearModel fit_linear(const Matrix& features, const Vector& targets, const std::optional<Vector>& weights,
                       const LinearFitOptions& options) {
  const Eigen::Index n = features.rows();
  const Eigen::Index p = features.cols();
  if (n < 1) throw Error(Errc::TooFewSamples, "fit_linear needs at least one row");
  if (targets.size() != n) throw Error(Errc::ShapeMismatch, "targets length does not match the number of rows");
  if (!(options.l1_strength >= 0.0)) throw Error(Errc::NonFiniteInput, "l1_strength must be nonnegative");
  detail::require_finite(features, "features");
  detail::require_finite(targets, "targets");
  detail::check_weights(weights, n);

  const Vector w = weights ? *weights : Vector::Ones(n);
  const double wsum = w.sum();

  Vector zbar = Vector::Zero(p);
  double ybar = 0.0;
  if (options.fit_intercept) {
    zbar = features.transpose() * w / wsum;
    ybar = w.dot(targets) / wsum;
  }
  Matrix zc = features;
  if (options.fit_intercept) zc.rowwise() -= zbar.transpose();
  const Vector yc = targets.array() - ybar;

  LinearModel model;
  model.coefficients = Vector::Zero(p);

  // Columns with no weighted spread carry no information and keep coefficient 0.
  const Vector spread = (zc.array().square().colwise() * w.array()).colwise().sum().transpose() / static_cast<double>(n);
  std::vector<Eigen::Index> active;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (spread(j) > 0.0) active.push_back(j);
  }

  if (!active.empty() && options.l1_strength == 0.0) {
    const auto m = static_cast<Eigen::Index>(active.size());
    Matrix za(n, m);
    for (Eigen::Index j = 0; j < m; ++j) za.col(j) = zc.col(active[j]);
    const Matrix wz = za.array().colwise() * w.array();
    const Matrix gram = za.transpose() * wz;
    const Vector rhs = wz.transpose() * yc;
    const Vector beta = solve_normal_equations(gram, rhs);
    for (Eigen::Index j = 0; j < m; ++j) model.coefficients(active[j]) = beta(j);
  } else if (!active.empty()) {
    const double inv_n = 1.0 / static_cast<double>(n);
    const auto m = static_cast<Eigen::Index>(active.size());
    Matrix zs(n, m);
    Vector scale(m);
    for (Eigen::Index j = 0; j < m; ++j) {
      scale(j) = std::sqrt(spread(active[j]));
      zs.col(j) = zc.col(active[j]) / scale(j);
    }
    Vector beta_std = Vector::Zero(m);
    Vector residual = yc;
    for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
      double max_change = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) {
        const double old = beta_std(j);
        const double rho = inv_n * (zs.col(j).array() * w.array() * residual.array()).sum() + old;
        const double updated = soft_threshold(rho, options.l1_strength / scale(j));
        if (updated != old) {
          residual -= zs.col(j) * (updated - old);
          beta_std(j) = updated;
          max_change = std::max(max_change, std::abs(updated - old) / scale(j));
        }
      }
      if (max_change < options.tolerance) break;
    }
    for (Eigen::Index j = 0; j < m; ++j) model.coefficients(active[j]) = beta_std(j) / scale(j);
  }

  model.intercept = options.fit_intercept ? ybar - zbar.dot(model.coefficients) : 0.0;
  return model;
}

}  // namespace surro
