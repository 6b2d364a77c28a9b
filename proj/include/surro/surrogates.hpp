#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "surro/cohort.hpp"
#include "surro/models/cv.hpp"
#include "surro/models/ensemble.hpp"
#include "surro/models/linear.hpp"
#include "surro/models/logistic.hpp"
#include "surro/models/model_io.hpp"
#include "surro/oracle.hpp"
#include "surro/rng.hpp"

namespace surro {

// A plug-in surrogate f(s). Evaluation reads the surrogate columns only.
struct SurrogateModel {
  enum class Form { linear, tree };
  Form form = Form::linear;
  LinearModel linear;
  TreeModel tree;
  Eigen::Index input_dim = 0;
  // Columns of s the inner model consumes; empty means all of them in order.
  std::vector<Eigen::Index> input_columns;
  double scale = 1.0;
  double offset = 0.0;

  Vector predict(const Matrix& s) const;
  // Prediction before the affine calibration.
  Vector raw_predict(const Matrix& s) const;
  // Coefficients over all d inputs (linear form only), zeros for unused columns.
  Vector embedded_coefficients() const;
};

nlohmann::json to_json(const SurrogateModel& f);
SurrogateModel surrogate_from_json(const nlohmann::json& doc);

enum class IndexFamily { linear, tree, gbm };
std::string to_string(IndexFamily f);
IndexFamily parse_index_family(const std::string& s);

struct IndexFitOptions {
  std::vector<TreeParams> grid;  // empty: default_tree_grid()
  int folds = 5;
  GbmParams gbm;
};

// h(x, s) = E[Y | x, s] fitted on [x, s].
struct SurrogateIndex {
  AnyModel model;
  Eigen::Index k = 0;
  Eigen::Index d = 0;
  // In-sample residual variance, the noise level of Y given (x, s).
  double residual_variance = 0.0;

  Vector predict(const Matrix& x, const Matrix& s) const;
};

SurrogateIndex fit_surrogate_index(const Cohort& outcome_data, IndexFamily family, const RandomSource& rng,
                                   const IndexFitOptions& options = {});

enum class PlugInFamily { linear, tree };

// Regression of y on s alone.
SurrogateModel fit_outcome_regression(const Cohort& outcome_data, PlugInFamily family, const RandomSource& rng,
                                      const IndexFitOptions& options = {});

// Stage 1: OLS of y on standardized s; keep the column with the largest
// absolute coefficient (lowest index on ties). Stage 2: fit on that column.
SurrogateModel fit_reg_sel_reg(const Cohort& outcome_data, PlugInFamily family, const RandomSource& rng,
                               const IndexFitOptions& options = {});
Eigen::Index reg_sel_reg_column(const Cohort& outcome_data);

// Draws counterfactual surrogates as m_t(x) plus a whole residual row taken
// uniformly from the arm-t pool.
struct ConditionalSampler {
  std::array<std::vector<EnsembleModel>, 2> mean_models;  // [arm][surrogate dim]
  std::array<Matrix, 2> residual_pools;
  int samples_per_arm = 50;
  Eigen::Index k = 0;
  Eigen::Index d = 0;

  Matrix mean(int arm, const Matrix& x) const;
  // samples_per_arm draws per unit; unit i occupies rows [i*L, (i+1)*L) and
  // draws from rng.substream(i).
  Matrix draw(int arm, const Matrix& x, const RandomSource& rng) const;
};

struct SamplerOptions {
  ForestParams forest{100, -1, 5, 10, 1 << 20, true};  // every feature at each split
  int samples_per_arm = 50;
};

ConditionalSampler fit_conditional_sampler(const Cohort& treatment_data, const RandomSource& rng,
                                           const SamplerOptions& options = {});

struct NuisanceOptions {
  IndexFamily index_family = IndexFamily::gbm;
  IndexFitOptions index;
  double propensity_l2 = 1.0;
  SamplerOptions sampler;
  bool fit_sampler = true;
};

struct NuisanceBundle {
  std::optional<SurrogateIndex> h_hat;
  std::optional<LogisticModel> e_hat;
  // Set for experimental cohorts: e(x) is the empirical P(T = 1).
  std::optional<double> e_constant;
  std::optional<LogisticModel> rho_hat;
  std::optional<ConditionalSampler> sampler;

  Vector propensity(const Matrix& x) const;
  Vector surrogate_score(const Matrix& x, const Matrix& s) const;
  const SurrogateIndex& index() const;
};

// outcome_data feeds h; treatment_data feeds e, rho and the sampler. The
// streams used are rng.substream(0..2).
NuisanceBundle fit_nuisances(const Cohort& outcome_data, const Cohort& treatment_data, const RandomSource& rng,
                             const NuisanceOptions& options = {});

using Clip = std::pair<double, double>;
inline constexpr Clip kDefaultClip{0.3, 0.7};

// w2, wplus or w1 from clipped e_hat(x) and rho_hat(x, s), times the density
// ratio when one is given.
Vector compute_bound_weights(const Cohort& treatment_data, const NuisanceBundle& bundle, WeightKind scheme,
                             std::optional<Clip> clip = kDefaultClip, const DensityRatio* ratio = nullptr);
// Same formulas from given propensities and surrogate scores.
Vector bound_weights_from_scores(const Vector& e, const Vector& rho, WeightKind scheme,
                                 std::optional<Clip> clip = kDefaultClip);

enum class BoundFamily { linear_ols, linear_lasso, tree, bintree };
std::string to_string(BoundFamily f);

struct BoundOptions {
  WeightKind scheme = WeightKind::w2;
  BoundFamily family = BoundFamily::linear_ols;
  double lambda = 0.01;
  std::optional<Clip> clip = kDefaultClip;
  std::vector<TreeParams> grid;  // tree families; empty: default_tree_grid()
  int folds = 5;
  int bins = 10;  // bintree quantile bins per surrogate
  std::optional<DensityRatio> ratio;
};

// Weighted regression of h_hat(x_i, s_i) on s_i. Throws AllZeroWeights when the
// mean weight is below 1e-8.
SurrogateModel fit_bound_regression(const Cohort& treatment_data, const NuisanceBundle& bundle,
                                    const BoundOptions& options, const RandomSource& rng);

// Thresholds q_jl (interior quantiles) per surrogate column.
std::vector<std::vector<double>> quantile_thresholds(const Matrix& s, int bins);

// Per-unit averages over the sampled counterfactuals:
//   c_j = mean_l h(x_j, s1_jl) - mean_l h(x_j, s0_jl)
//   d_j = mean_l s1_jl - mean_l s0_jl
struct SamplingContrasts {
  Matrix d;        // n x dim(s)
  Vector c;        // n
  Vector weights;  // per-unit density ratio, ones by default
  // Draws and their h values; unit j owns rows [j*L, (j+1)*L).
  Matrix s1_draws, s0_draws;
  Vector h1_draws, h0_draws;
  int samples_per_arm = 0;
};

SamplingContrasts sampling_contrasts(const Cohort& treatment_data, const NuisanceBundle& bundle,
                                     const RandomSource& rng, const DensityRatio* ratio = nullptr);

struct SamplingOptions {
  double lambda = 0.01;
  enum class Solver { closed_form, gradient };
  Solver solver = Solver::closed_form;
  int max_iterations = 200000;
  double tolerance = 1e-12;
  bool calibrate = true;
  std::optional<DensityRatio> ratio;
};

// Minimizes (1/2n) sum_j w_j (c_j - beta' d_j)^2 + lambda |beta|_1 (no
// intercept). The closed form is a weighted Lasso/OLS of c on d; the gradient
// solver runs accelerated proximal gradient on the per-draw objective.
// Throws DegenerateContrasts when every d_j vanishes.
Vector solve_sampling_objective(const SamplingContrasts& contrasts, const SamplingOptions& options);

// Full learner: contrasts, solve, then level calibration against h_hat on the
// outcome cohort when options.calibrate.
SurrogateModel fit_surrogate_sampling(const Cohort& treatment_data, const Cohort& outcome_data,
                                      const NuisanceBundle& bundle, const SamplingOptions& options,
                                      const RandomSource& rng);

// Weighted mean over units of (c_j - [mean_l f(s1_jl) - mean_l f(s0_jl)])^2.
double estimate_sampling_risk(const SurrogateModel& f, const SamplingContrasts& contrasts);

// Shifts the offset so that mean f(s) over the cohort equals the mean of h_hat
// (or of y when no index is given). variance_match also sets
// scale = sd(target) / sd(f).
SurrogateModel calibrate_surrogate(const SurrogateModel& f, const Cohort& outcome_data,
                                   const SurrogateIndex* h_hat = nullptr, bool variance_match = false);

}  // namespace surro
