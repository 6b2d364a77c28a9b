#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "surro/cohort.hpp"
#include "surro/rng.hpp"
#include "surro/scm.hpp"

namespace surro {

// Finite-support model of (X, T, S, Y) for exact enumeration. Row i of every
// x-indexed table belongs to x_support.row(i); column j of every s-indexed
// table belongs to s_support.row(j).
struct DiscreteSCM {
  Matrix x_support;  // nx x k
  Vector p_x;        // nx
  Vector p_t1;       // nx, p(T=1 | x)
  Matrix s_support;  // ns x d
  Matrix p_s0;       // nx x ns, p(s | x, T=0)
  Matrix p_s1;       // nx x ns, p(s | x, T=1)
  Matrix h;          // nx x ns, E[Y | x, s]; ignored when h_t is set
  // E[Y | x, s, T=t] for models with a direct effect of T on Y.
  std::optional<std::array<Matrix, 2>> h_t;
  // Present when h(x, s) = gamma'x + g(s).
  std::optional<Vector> gamma;
  // p_e(x) / p_o(x); 1 when absent.
  std::optional<Vector> density_ratio;

  Eigen::Index nx() const noexcept { return x_support.rows(); }
  Eigen::Index ns() const noexcept { return s_support.rows(); }

  Matrix p_s() const;        // p(s | x)
  Matrix pi() const;         // p(s | x, 1) - p(s | x, 0)
  Matrix rho() const;        // p(T=1 | x, s); 0.5 where p(s | x) = 0
  Matrix h_observed() const; // E[Y | x, s]
  Vector ratio() const;
};

// Throws ShapeMismatch, DomainMismatch (rows not summing to 1 within 1e-12 or
// negative entries) or PositivityViolation.
void validate_discrete_scm(const DiscreteSCM& m);

struct ExactEffects {
  double tau_y = 0.0;
  Vector tau_y_of_x;  // nx
  Matrix tau_s_of_x;  // nx x d
};

ExactEffects exact_effects(const DiscreteSCM& m);

enum class WeightKind { w2, wplus, w1, wminus, px_over_pxs, uniform };
std::string to_string(WeightKind k);

struct WeightScheme {
  WeightKind kind = WeightKind::w2;
  // Applied to e(x) and rho(x, s) before forming the weight.
  std::optional<std::pair<double, double>> clip;
};

// nx x ns table of w(x, s).
Matrix weight_table(const DiscreteSCM& m, const WeightScheme& scheme);

// f*(s) = sum_x w h p(x|s) / sum_x w p(x|s). Entries for s with p(s) = 0 are 0.
// Throws ZeroDenominator when the weights cancel at some s with p(s) > 0.
Vector exact_weighted_minimizer(const DiscreteSCM& m, const WeightScheme& scheme);

// Minimizer of the regression with the t-dependent weight pi(x,s)/p(s|x) used
// for direct-effect models: f*(s) = sum_x p(x) (h_1 p(s|x,1) - h_0 p(s|x,0)) /
// sum_x p(x) pi(x, s).
Vector exact_t_weighted_minimizer(const DiscreteSCM& m);

// E[Y | S = s] in the observational population.
Vector outcome_regression_table(const DiscreteSCM& m);

// sum_x p(x) sum_s pi(x, s) f(s).
double surrogate_ate(const DiscreteSCM& m, const Vector& f);

// sum_x r(x) p(x) (tau_Y(x) - tau_f(x))^2 with r the density ratio.
double exact_risk(const DiscreteSCM& m, const Vector& f);
// sum_x r(x) p(x) |tau_Y(x) - tau_f(x)|.
double exact_l1_risk(const DiscreteSCM& m, const Vector& f);

// w2: E[r w2 (h - f)^2]; wplus: E[r w+ (h - f)^2] (half the risk is below it);
// w1: E[r |eta| |h - f|] (bounds the L1 risk).
double risk_bound(const DiscreteSCM& m, const Vector& f, WeightKind scheme);

// Evaluates f on every support point; `f.predict(Matrix)` must accept ns x d.
template <typename F>
Vector tabulate(const DiscreteSCM& m, const F& f) {
  return f.predict(m.s_support);
}

struct CaseClaim {
  std::string claim;
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
  // Informational rows report a quantity without asserting it.
  bool informational = false;
};

struct CaseReport {
  CaseId case_id = CaseId::a;
  std::vector<CaseClaim> claims;
  bool all_pass() const;
};

// Verifies the per-case identities; throws CaseMismatch if the model's
// structure contradicts the case.
CaseReport check_case_properties(CaseId case_id, const DiscreteSCM& m, double tolerance = 1e-9);

// (1/n) sum_i w_i ((beta_h - beta_f)' tau_s_i)^2.
double linear_risk(const Vector& beta_h, const Vector& beta_f, const Matrix& tau_s_samples, const Vector& weights);

struct AteMatching {
  Eigen::Index column = 0;
  double alpha = 0.0;
};

AteMatching ate_matching_surrogate(double tau_y, const Vector& deltas, double threshold = 1e-6);
// delta_j = E[w1(X) S_j | T=1] - E[w0(X) S_j | T=0], w_t(x) = p(T=t) / p(T=t | x).
Vector ate_matching_contrasts(const DiscreteSCM& m);

struct OutcomeRegressionBias {
  double true_ate = 0.0;
  double plugin_ate = 0.0;
  double bias = 0.0;  // gamma' (E[X | S(1)] - E[X | S(0)])
};

// Exact decomposition; needs m.gamma.
OutcomeRegressionBias outcome_regression_bias(const DiscreteSCM& m);
// Monte-Carlo version on the Appendix-style example with a linear E[Y|S] fit.
OutcomeRegressionBias outcome_regression_bias_mc(Eigen::Index n, const RandomSource& rng, double x_to_y = 5.0);

struct RandomModelOptions {
  int nx = 3;
  int ns = 4;
  int k = 1;
  int d = 1;
  double positivity_margin = 0.02;
  // Linear in s: h(x, s) = h_x(x) + beta_h' s.
  bool linear = false;
  // Additive X term: h(x, s) = gamma' x + g(s).
  bool additive = false;
  // p(T=1 | x) = 0.5 everywhere.
  bool randomized = false;
  // Draw a non-identity density ratio (mean 1 under p(x)).
  bool shifted = false;
};

struct RandomModel {
  DiscreteSCM model;
  std::optional<Vector> beta_h;  // set when options.linear
};

// Rejection-samples a model consistent with the case (positivity with margin,
// and sum_x p(x) pi(x, s) bounded away from 0 for cases d and e).
RandomModel random_discrete_scm(CaseId case_id, RandomSource& rng, const RandomModelOptions& options = {});

nlohmann::json to_json(const DiscreteSCM& m);
DiscreteSCM discrete_scm_from_json(const nlohmann::json& doc);

// Randomized self-check of the exact identities: bound dominance, translation
// invariance, case b and d unbiasedness and the linear-risk identity.
struct OracleCheckItem {
  std::string name;
  int checked = 0;
  int failed = 0;
  double worst = 0.0;  // largest violation seen
};

struct OracleCheckSummary {
  std::vector<OracleCheckItem> items;
  bool all_pass() const;
};

OracleCheckSummary run_oracle_checks(std::uint64_t seed, int instances);

}  // namespace surro
