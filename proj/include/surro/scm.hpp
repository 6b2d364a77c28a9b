#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "surro/cohort.hpp"
#include "surro/rng.hpp"

namespace surro {

// Per-unit potential outcomes of a simulated cohort.
struct ScenarioTruth {
  Matrix s0, s1;
  Vector y0, y1;
  Vector cate;  // tau_Y(x_i), analytic
  double ate = 0.0;  // mean of (y1 - y0) over the units
  // E[Y(1) - Y(0)] over the covariate distribution, analytic.
  double population_ate = 0.0;
};

enum class CaseId { a, b, c, d, e, f };
enum class Nonlinearity { linear, square };
enum class Regime { observational, trial };

std::string to_string(CaseId c);
CaseId parse_case(const std::string& s);
std::string to_string(Nonlinearity n);
Nonlinearity parse_nonlinearity(const std::string& s);

struct ScaleOverrides {
  double med = 1.0;
  double leaf = 1.0;
  double proxy = 1.0;
  bool operator==(const ScaleOverrides&) const = default;
};

struct ScenarioSpec {
  CaseId case_id = CaseId::d;
  int x_dim = 2;
  int d_med = 3;
  int d_leaf = 2;
  int d_proxy = 2;
  Nonlinearity nonlinearity = Nonlinearity::linear;
  bool unobserved_confounder = false;
  ScaleOverrides scale;
  std::uint64_t seed = 0;

  int d() const noexcept { return d_med + d_leaf + d_proxy; }
  // e.g. "d-linear-k2-U-med2" (seed not included).
  std::string label() const;
  bool operator==(const ScenarioSpec&) const = default;
};

struct ScenarioParams {
  ScenarioSpec spec;
  Vector w_xt;    // k
  double b_t = -0.1;
  Matrix w_xs0;   // k x d_med   (mediators)
  Matrix w_xs1;   // k x d_leaf  (treatment-only)
  Matrix w_xs2;   // k x d_proxy (outcome-only)
  Vector b_s0, b_s1, b_s2;
  double b_y = 0.0;
  Vector w_xy;    // k
  double direct_effect = 0.0;  // case e
  Matrix w_xm;    // case f latent mediator, k x d_med
  Vector b_m;
  double confounder_coef = 0.0;  // coefficient of U everywhere (0 when absent)
};

// Radii of the hypersphere columns of w_xs0, w_xs1, w_xs2 before overrides.
inline constexpr double kRadiusMed = 0.7;
inline constexpr double kRadiusLeaf = 0.5;
inline constexpr double kRadiusProxy = 0.6;

ScenarioParams sample_scenario_params(const ScenarioSpec& spec, RandomSource rng);
// Convenience: parameters drawn from make_rng(spec.seed, 0).
ScenarioParams sample_scenario_params(const ScenarioSpec& spec);

// Unit i draws from rng.substream(i) in a fixed order regardless of regime, so
// two calls with the same rng share x and every structural noise.
std::pair<Cohort, ScenarioTruth> generate_cohort(const ScenarioParams& params, Eigen::Index n, Regime regime,
                                                 const RandomSource& rng);

// X ~ N(0,1), T ~ Bernoulli(0.5), S = X*T + T + e_S, Y = gamma*X + S + e_Y.
std::pair<Cohort, ScenarioTruth> appendix_e1_scenario(Eigen::Index n, const RandomSource& rng,
                                                      double x_to_y = 5.0);

// 10 sub-scenarios per case: {linear, square} x {base, U, med x2, proxy x2,
// med and proxy x0.5}. family=linear keeps the linear half. Crossed with seeds
// (an empty seed list yields one spec per lattice point with seed 0).
enum class SuiteFamily { composite, linear };
std::vector<ScenarioSpec> scenario_suite(SuiteFamily family, const std::vector<std::uint64_t>& seeds,
                                         const std::vector<CaseId>& cases = {CaseId::a, CaseId::b, CaseId::c,
                                                                              CaseId::d, CaseId::e, CaseId::f});

// Randomized cohort shaped like the IHDP trial (role-prefixed column names of
// the real study) with a planted average effect on the 36-month outcome.
struct IhdpShapeOptions {
  Eigen::Index n = 985;
  double treated_fraction = 0.38;
  double planted_ate = 6.47;
};
std::pair<Cohort, ScenarioTruth> ihdp_shaped_cohort(const IhdpShapeOptions& options, const RandomSource& rng);

// s0_*, s1_*, y0, y1, cate columns.
void write_truth_csv(std::ostream& out, const ScenarioTruth& truth, const std::vector<std::string>& s_names);

}  // namespace surro
