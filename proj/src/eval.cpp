#include "surro/eval.hpp"

#include <algorithm>
#include <cmath>

#include "surro/models/linear.hpp"

namespace surro {

std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::diff_in_means: return "diff_in_means";
    case Estimator::t_learner: return "t_learner";
    case Estimator::potential_outcomes: return "potential_outcomes";
  }
  return "unknown";
}

double ate_diff_in_means(const Vector& values, const IntVector& t) {
  if (values.size() != t.size()) throw Error(Errc::ShapeMismatch, "values and treatment lengths differ");
  double sum[2] = {0.0, 0.0};
  Eigen::Index count[2] = {0, 0};
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (t(i) != 0 && t(i) != 1) throw Error(Errc::NonBinaryTreatment, "treatment must be 0 or 1");
    sum[t(i)] += values(i);
    ++count[t(i)];
  }
  if (count[0] == 0 || count[1] == 0) throw Error(Errc::SingleArmData, "both arms must be nonempty");
  return sum[1] / static_cast<double>(count[1]) - sum[0] / static_cast<double>(count[0]);
}

Vector cate_t_learner(const Matrix& x, const IntVector& t, const Vector& values, const Matrix& eval_x) {
  if (x.rows() != t.size() || values.size() != t.size()) throw Error(Errc::ShapeMismatch, "input lengths differ");
  if (eval_x.cols() != x.cols()) throw Error(Errc::WidthMismatch, "evaluation covariates width");
  LinearModel arm[2];
  for (int a = 0; a < 2; ++a) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      if (t(i) == a) rows.push_back(i);
    }
    if (static_cast<Eigen::Index>(rows.size()) < x.cols() + 1) {
      throw Error(Errc::SingleArmData, "arm " + std::to_string(a) + " has fewer than k + 1 units");
    }
    arm[a] = fit_linear(take_rows(x, rows), take_rows(values, rows));
  }
  return arm[1].predict(eval_x) - arm[0].predict(eval_x);
}

Vector cate_potential_outcomes(const SurrogateModel& f, const Matrix& s1, const Matrix& s0) {
  if (s1.rows() != s0.rows() || s1.cols() != s0.cols()) throw Error(Errc::ShapeMismatch, "s1 and s0 shapes differ");
  return f.predict(s1) - f.predict(s0);
}

std::optional<double> r_squared(const Vector& estimate, const Vector& truth) {
  if (estimate.size() != truth.size()) throw Error(Errc::ShapeMismatch, "CATE lengths differ");
  if (truth.size() == 0) return std::nullopt;
  const double mean = truth.mean();
  const double ss_tot = (truth.array() - mean).square().sum();
  if (!(ss_tot > 1e-12 * static_cast<double>(truth.size()) * std::max(1.0, mean * mean))) return std::nullopt;
  return 1.0 - (truth - estimate).squaredNorm() / ss_tot;
}

double pehe(const Vector& estimate, const Vector& truth) {
  if (estimate.size() != truth.size()) throw Error(Errc::ShapeMismatch, "CATE lengths differ");
  if (truth.size() == 0) return 0.0;
  return (truth - estimate).squaredNorm() / static_cast<double>(truth.size());
}

MetricReport score(const EffectEstimate& estimate, const ScenarioTruth& truth) {
  MetricReport r = score(estimate, truth.ate);
  if (estimate.cate && truth.cate.size() > 0) {
    r.pehe = pehe(*estimate.cate, truth.cate);
    r.r2_cate = r_squared(*estimate.cate, truth.cate);
  }
  return r;
}

MetricReport score(const EffectEstimate& estimate, double reference_ate) {
  MetricReport r;
  r.mae_ate = std::abs(estimate.ate - reference_ate);
  return r;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(Errc::EmptyCohort, "quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

BootstrapResult bootstrap_ci(const ResampleStatistic& statistic, Eigen::Index n, int replicates, double level,
                             const RandomSource& rng) {
  if (replicates < 2) throw Error(Errc::ConfigError, "at least two bootstrap replicates are required");
  if (n < 1) throw Error(Errc::EmptyCohort, "bootstrap of an empty sample");
  if (!(level > 0.0 && level < 1.0)) throw Error(Errc::ConfigError, "level must lie in (0, 1)");
  std::vector<double> stats(static_cast<std::size_t>(replicates));
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
  for (int b = 0; b < replicates; ++b) {
    RandomSource r = rng.substream(static_cast<std::uint64_t>(b));
    for (auto& row : rows) row = static_cast<Eigen::Index>(r.uniform_index(static_cast<std::size_t>(n)));
    stats[static_cast<std::size_t>(b)] = statistic(rows);
  }
  BootstrapResult out;
  out.level = level;
  double sum = 0.0;
  for (double s : stats) sum += s;
  out.mean = sum / replicates;
  if (std::all_of(stats.begin(), stats.end(), [&](double s) { return s == stats.front(); })) out.mean = stats.front();
  double ss = 0.0;
  for (double s : stats) ss += (s - out.mean) * (s - out.mean);
  out.se = std::sqrt(ss / (replicates - 1));
  const double tail = 0.5 * (1.0 - level);
  out.lo = quantile(stats, tail);
  out.hi = quantile(stats, 1.0 - tail);
  return out;
}

}  // namespace surro
