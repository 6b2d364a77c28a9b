#include <gtest/gtest.h>

#include <cmath>

#include "surro/oracle.hpp"

using namespace surro;

namespace {

int categorical(const Eigen::Ref<const Vector>& p, RandomSource& rng) {
  double u = rng.uniform(), acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    acc += p(i);
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(p.size() - 1);
}

RandomModel model(CaseId c, std::uint64_t seed, RandomModelOptions o = {}) {
  auto rng = make_rng(seed, 77);
  return random_discrete_scm(c, rng, o);
}

Vector random_f(Eigen::Index ns, RandomSource& rng) {
  Vector f(ns);
  for (Eigen::Index j = 0; j < ns; ++j) f(j) = rng.normal(0.0, 2.0);
  return f;
}

// Transposed rows as column vectors for categorical draws.
Vector row(const Matrix& m, Eigen::Index i) { return m.row(i).transpose(); }

}  // namespace

TEST(Oracle, ExactEffectsMatchMonteCarlo) {
  RandomModelOptions o;
  o.nx = 3;
  o.ns = 4;
  o.d = 2;
  const auto rm = model(CaseId::d, 1, o).model;
  const auto fx = exact_effects(rm);
  auto rng = make_rng(1, 5);
  const int n = 2000000;
  double sum = 0, sum2 = 0;
  const Matrix h = rm.h_observed();
  for (int i = 0; i < n; ++i) {
    const int x = categorical(rm.p_x, rng);
    const int s1 = categorical(row(rm.p_s1, x), rng);
    const int s0 = categorical(row(rm.p_s0, x), rng);
    const double v = h(x, s1) - h(x, s0);
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / n, se = std::sqrt((sum2 / n - mean * mean) / n);
  EXPECT_LT(std::abs(mean - fx.tau_y), 4 * se);
  EXPECT_NEAR(rm.p_x.dot(fx.tau_y_of_x), fx.tau_y, 1e-12);
}

TEST(Oracle, MinimizerMatchesGridSearch) {
  const auto rm = model(CaseId::d, 2).model;
  const Matrix h = rm.h_observed();
  const Matrix ps = rm.p_s();
  for (auto kind : {WeightKind::w2, WeightKind::wplus, WeightKind::w1, WeightKind::px_over_pxs, WeightKind::uniform}) {
    const WeightScheme scheme{kind, std::nullopt};
    const Vector f = exact_weighted_minimizer(rm, scheme);
    const Matrix w = weight_table(rm, scheme);
    for (Eigen::Index s = 0; s < rm.ns(); ++s) {
      auto objective = [&](double v) {
        double total = 0;
        for (Eigen::Index x = 0; x < rm.nx(); ++x) total += rm.p_x(x) * ps(x, s) * w(x, s) * std::pow(h(x, s) - v, 2);
        return total;
      };
      const double lo = h.col(s).minCoeff() - 1, hi = h.col(s).maxCoeff() + 1, step = (hi - lo) / 200000;
      double best = lo, best_val = objective(lo);
      for (int g = 1; g <= 200000; ++g) {
        const double v = lo + g * step;
        if (const double val = objective(v); val < best_val) {
          best_val = val;
          best = v;
        }
      }
      EXPECT_NEAR(f(s), best, step);
    }
  }
}

TEST(Oracle, RiskMatchesMonteCarlo) {
  const auto rm = model(CaseId::d, 3).model;
  auto rng = make_rng(3, 9);
  const Vector f = random_f(rm.ns(), rng);
  const auto fx = exact_effects(rm);
  const Vector tau_f = rm.pi() * f;
  const int n = 1000000;
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    const int x = categorical(rm.p_x, rng);
    const double v = std::pow(fx.tau_y_of_x(x) - tau_f(x), 2);
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / n, se = std::sqrt((sum2 / n - mean * mean) / n);
  EXPECT_LT(std::abs(mean - exact_risk(rm, f)), 4 * se + 1e-12);
}

TEST(Oracle, BoundsDominateRisk) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    RandomModelOptions o;
    o.shifted = seed % 2 == 0;
    const auto rm = model(CaseId::d, 100 + seed, o).model;
    auto rng = make_rng(seed, 1);
    const Vector f = random_f(rm.ns(), rng);
    const double r = exact_risk(rm, f);
    EXPECT_LE(r, risk_bound(rm, f, WeightKind::w2) * (1 + 1e-12) + 1e-14);
    EXPECT_LE(r, 2 * risk_bound(rm, f, WeightKind::wplus) * (1 + 1e-12) + 1e-14);
    EXPECT_LE(exact_l1_risk(rm, f), risk_bound(rm, f, WeightKind::w1) * (1 + 1e-12) + 1e-14);
  }
}

TEST(Oracle, RiskBoundRejectsOtherSchemes) {
  const auto rm = model(CaseId::d, 4).model;
  try {
    risk_bound(rm, Vector::Zero(rm.ns()), WeightKind::wminus);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ConfigError);
  }
}

TEST(Oracle, TranslationInvariance) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto rm = model(CaseId::d, 200 + seed).model;
    auto rng = make_rng(seed, 2);
    const Vector f = random_f(rm.ns(), rng);
    const Vector g = f.array() + rng.normal(0, 10);
    EXPECT_NEAR(exact_risk(rm, f), exact_risk(rm, g), 1e-12);
    EXPECT_NEAR(surrogate_ate(rm, f), surrogate_ate(rm, g), 1e-12);
  }
}

TEST(Oracle, EveryCaseHoldsOnItsModels) {
  for (CaseId c : {CaseId::a, CaseId::b, CaseId::c, CaseId::d, CaseId::e}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto rm = model(c, 300 + seed).model;
      const auto report = check_case_properties(c, rm);
      EXPECT_TRUE(report.all_pass()) << to_string(c) << " seed " << seed;
    }
  }
}

TEST(Oracle, CaseFAndWrongStructureAreMismatches) {
  const auto rm = model(CaseId::d, 5).model;
  for (CaseId c : {CaseId::f, CaseId::b}) {
    try {
      check_case_properties(c, rm);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::CaseMismatch);
    }
  }
}

TEST(Oracle, LinearRiskIdentity) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RandomModelOptions o;
    o.linear = true;
    o.d = 2;
    o.ns = 5;
    const auto rm = model(CaseId::d, 400 + seed, o);
    auto rng = make_rng(seed, 3);
    Vector beta_f(2);
    beta_f << rng.normal(), rng.normal();
    const Vector f = rm.model.s_support * beta_f;
    const auto fx = exact_effects(rm.model);
    const Vector weights = rm.model.nx() * rm.model.p_x.cwiseProduct(rm.model.ratio());
    EXPECT_NEAR(linear_risk(*rm.beta_h, beta_f, fx.tau_s_of_x, weights), exact_risk(rm.model, f), 1e-9);
  }
}

TEST(Oracle, LinearRiskShapes) {
  try {
    linear_risk(Vector::Zero(2), Vector::Zero(3), Matrix::Zero(4, 2), Vector::Ones(4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DimensionMismatch);
  }
}

TEST(Oracle, AteMatchingReproducesAteButNotCate) {
  int positive = 0, tried = 0;
  for (std::uint64_t seed = 0; tried < 30; ++seed) {
    RandomModelOptions o;
    o.d = 2;
    o.ns = 5;
    const auto rm = model(CaseId::d, 500 + seed, o).model;
    const Vector delta = ate_matching_contrasts(rm);
    if (delta.cwiseAbs().maxCoeff() <= 0.05) continue;
    ++tried;
    const double tau = exact_effects(rm).tau_y;
    const auto m = ate_matching_surrogate(tau, delta);
    const Vector f = m.alpha * rm.s_support.col(m.column);
    EXPECT_NEAR(surrogate_ate(rm, f), tau, 1e-12);
    positive += exact_risk(rm, f) > 0;
  }
  EXPECT_GE(positive, 28);
}

TEST(Oracle, AteMatchingTieAndThreshold) {
  Vector delta(3);
  delta << 0.5, -0.5, 0.1;
  const auto m = ate_matching_surrogate(2.0, delta);
  EXPECT_EQ(m.column, 0);
  EXPECT_EQ(m.alpha, 4.0);
  try {
    ate_matching_surrogate(1.0, Vector::Zero(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NoAffectedSurrogate);
  }
}

TEST(Oracle, OutcomeRegressionBiasIdentity) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RandomModelOptions o;
    o.additive = true;
    const auto rm = model(CaseId::b, 600 + seed, o).model;
    const auto b = outcome_regression_bias(rm);
    const double plugin = surrogate_ate(rm, outcome_regression_table(rm));
    EXPECT_NEAR(b.plugin_ate, plugin, 1e-9);
    EXPECT_NEAR(b.plugin_ate - b.true_ate, b.bias, 1e-9);
  }
}

TEST(Oracle, MonteCarloBiasWithoutConfounding) {
  const auto b = outcome_regression_bias_mc(200000, make_rng(1, 0), 0.0);
  EXPECT_EQ(b.true_ate, 1.0);
  EXPECT_NEAR(b.plugin_ate, 1.0, 0.05);
}

TEST(Oracle, ValidationErrors) {
  auto rm = model(CaseId::d, 6).model;
  auto bad = rm;
  bad.p_s0(0, 0) += 0.01;
  try {
    validate_discrete_scm(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DomainMismatch);
  }
  bad = rm;
  bad.p_t1(0) = 1.0;
  try {
    validate_discrete_scm(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::PositivityViolation);
  }
  bad = rm;
  bad.h.conservativeResize(rm.nx(), rm.ns() - 1);
  try {
    validate_discrete_scm(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ShapeMismatch);
  }
}

TEST(Oracle, JsonRoundTrip) {
  RandomModelOptions o;
  o.shifted = true;
  o.additive = true;
  const auto rm = model(CaseId::e, 7, o).model;
  const auto back = discrete_scm_from_json(nlohmann::json::parse(to_json(rm).dump()));
  EXPECT_EQ(exact_effects(back).tau_y, exact_effects(rm).tau_y);
  EXPECT_TRUE(back.h_t.has_value());
  EXPECT_TRUE(back.ratio() == rm.ratio());
}

TEST(Oracle, SelfCheckPasses) {
  const auto summary = run_oracle_checks(0, 200);
  EXPECT_TRUE(summary.all_pass());
  for (const auto& item : summary.items) EXPECT_EQ(item.checked, 200) << item.name;
}
