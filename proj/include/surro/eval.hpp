#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "surro/cohort.hpp"
#include "surro/rng.hpp"
#include "surro/scm.hpp"
#include "surro/surrogates.hpp"

namespace surro {

enum class Estimator { diff_in_means, t_learner, potential_outcomes };
std::string to_string(Estimator e);

struct EffectEstimate {
  double ate = 0.0;
  std::optional<Vector> cate;
  std::string method_id;
  Estimator estimator = Estimator::diff_in_means;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.95;
};

struct MetricReport {
  double mae_ate = 0.0;
  std::optional<double> r2_cate;
  std::optional<double> pehe;
  std::optional<Interval> ci;
};

// mean(values | t = 1) - mean(values | t = 0).
double ate_diff_in_means(const Vector& values, const IntVector& t);

// One OLS fit per arm; returns g_1(eval_x) - g_0(eval_x).
Vector cate_t_learner(const Matrix& x, const IntVector& t, const Vector& values, const Matrix& eval_x);

// f(s1_i) - f(s0_i).
Vector cate_potential_outcomes(const SurrogateModel& f, const Matrix& s1, const Matrix& s0);

// 1 - SS_res / SS_tot against truth; absent when truth has (numerically) no
// variance.
std::optional<double> r_squared(const Vector& estimate, const Vector& truth);
// Mean squared CATE error.
double pehe(const Vector& estimate, const Vector& truth);

// ATE error against truth.ate; CATE metrics when the estimate carries a CATE.
MetricReport score(const EffectEstimate& estimate, const ScenarioTruth& truth);
MetricReport score(const EffectEstimate& estimate, double reference_ate);

struct BootstrapResult {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double se = 0.0;
  double level = 0.95;
};

// The statistic maps a resample (row indices into the data, with repeats) to
// a scalar. Replicate b draws from rng.substream(b).
using ResampleStatistic = std::function<double(const std::vector<Eigen::Index>& rows)>;
BootstrapResult bootstrap_ci(const ResampleStatistic& statistic, Eigen::Index n, int replicates = 2000,
                             double level = 0.95, const RandomSource& rng = make_rng(0, 0));

// Empirical quantile with linear interpolation between order statistics.
double quantile(std::vector<double> values, double q);

}  // namespace surro
