#include <gtest/gtest.h>

#include <cmath>

#include "surro/eval.hpp"
#include "surro/scm.hpp"
#include "surro/surrogates.hpp"

using namespace surro;

namespace {

Cohort make_cohort(const Matrix& x, const Matrix& s, const IntVector& t, const Vector& y) {
  Cohort c;
  c.n = static_cast<std::size_t>(x.rows());
  c.x = x;
  c.s = s;
  c.t = t;
  c.y = y;
  return c;
}

template <typename F>
void expect_error(Errc code, F&& f) {
  try {
    f();
    FAIL() << "no error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

// Samples units from a discrete model with numeric supports; y = h + N(0, sd).
Cohort embed(const DiscreteSCM& m, Eigen::Index n, RandomSource rng, double noise_sd = 0.2) {
  auto pick = [&](const Vector& p) {
    double u = rng.uniform(), acc = 0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      acc += p(i);
      if (u < acc) return i;
    }
    return p.size() - 1;
  };
  Matrix x(n, m.x_support.cols()), s(n, m.s_support.cols());
  IntVector t(n);
  Vector y(n);
  const Matrix h = m.h_observed();
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto xi = pick(m.p_x);
    t(i) = rng.bernoulli(m.p_t1(xi));
    const auto si = pick((t(i) ? m.p_s1 : m.p_s0).row(xi).transpose());
    x.row(i) = m.x_support.row(xi);
    s.row(i) = m.s_support.row(si);
    y(i) = h(xi, si) + noise_sd * rng.normal();
  }
  return make_cohort(x, s, t, y);
}

IndexFitOptions exact_tree_options() {
  IndexFitOptions o;
  TreeParams p;
  p.min_samples_leaf = 50;
  p.min_samples_split = 100;
  o.grid = {p};
  return o;
}

}  // namespace

TEST(SurrogateIndex, ExactLinearRecovery) {
  auto rng = make_rng(1, 0);
  Matrix x(50, 1), s(50, 1);
  Vector y(50);
  for (int i = 0; i < 50; ++i) {
    x(i, 0) = rng.normal();
    s(i, 0) = rng.normal();
    y(i) = 2 * x(i, 0) + 3 * s(i, 0);
  }
  const auto h = fit_surrogate_index(make_cohort(x, s, IntVector::Zero(50), y), IndexFamily::linear, rng);
  const auto& lin = std::get<LinearModel>(h.model);
  EXPECT_NEAR(lin.coefficients(0), 2.0, 1e-8);
  EXPECT_NEAR(lin.coefficients(1), 3.0, 1e-8);
  EXPECT_NEAR(h.residual_variance, 0.0, 1e-12);
}

TEST(SurrogateIndex, ConstantOutcome) {
  auto rng = make_rng(2, 0);
  Matrix x(200, 2), s(200, 2);
  for (int i = 0; i < 200; ++i)
    for (int j = 0; j < 2; ++j) x(i, j) = rng.normal(), s(i, j) = rng.normal();
  const auto c = make_cohort(x, s, IntVector::Zero(200), Vector::Constant(200, 4.0));
  for (auto fam : {IndexFamily::linear, IndexFamily::tree, IndexFamily::gbm}) {
    const auto h = fit_surrogate_index(c, fam, rng);
    EXPECT_LT((h.predict(x, s).array() - 4.0).abs().maxCoeff(), 1e-12);
  }
}

TEST(SurrogateIndex, MissingOutcome) {
  Cohort c = make_cohort(Matrix::Zero(5, 1), Matrix::Zero(5, 1), IntVector::Zero(5), Vector::Zero(5));
  c.y.reset();
  expect_error(Errc::MissingOutcome, [&] { fit_surrogate_index(c, IndexFamily::linear, make_rng(0, 0)); });
  expect_error(Errc::MissingOutcome, [&] { fit_outcome_regression(c, PlugInFamily::linear, make_rng(0, 0)); });
}

TEST(OutcomeRegression, NoiselessSlope) {
  auto rng = make_rng(3, 0);
  Matrix s(40, 2);
  for (int i = 0; i < 40; ++i) s(i, 0) = rng.normal(), s(i, 1) = rng.normal();
  const auto f = fit_outcome_regression(make_cohort(Matrix::Zero(40, 1), s, IntVector::Zero(40), 4 * s.col(0)),
                                        PlugInFamily::linear, rng);
  EXPECT_NEAR(f.linear.coefficients(0), 4.0, 1e-10);
  EXPECT_NEAR(f.linear.coefficients(1), 0.0, 1e-10);
  EXPECT_NEAR(f.linear.intercept + f.offset, 0.0, 1e-10);
}

TEST(RegSelReg, DominantAndTiedColumns) {
  auto rng = make_rng(4, 0);
  Matrix s(60, 2);
  for (int i = 0; i < 60; ++i) s(i, 0) = rng.normal(), s(i, 1) = rng.normal();
  const Vector y = 5 * s.col(1) + 0.1 * s.col(0);
  const auto c = make_cohort(Matrix::Zero(60, 1), s, IntVector::Zero(60), y);
  EXPECT_EQ(reg_sel_reg_column(c), 1);
  const auto f = fit_reg_sel_reg(c, PlugInFamily::linear, rng);
  EXPECT_EQ(f.embedded_coefficients()(0), 0.0);
  EXPECT_NEAR(f.embedded_coefficients()(1), 5.0, 0.1);

  Matrix st(4, 2);
  st << 1, 1, -1, 1, 1, -1, -1, -1;
  const Vector yt = st.col(0) + st.col(1);
  EXPECT_EQ(reg_sel_reg_column(make_cohort(Matrix::Zero(4, 1), st, IntVector::Zero(4), yt)), 0);
}

TEST(BoundWeights, ClosedForms) {
  auto rng = make_rng(5, 0);
  Vector e(100), rho(100);
  for (int i = 0; i < 100; ++i) e(i) = 0.05 + 0.9 * rng.uniform(), rho(i) = 0.05 + 0.9 * rng.uniform();
  const Vector w2 = bound_weights_from_scores(e, rho, WeightKind::w2, std::nullopt);
  const Vector wp = bound_weights_from_scores(e, rho, WeightKind::wplus, std::nullopt);
  const Vector w1 = bound_weights_from_scores(e, rho, WeightKind::w1, std::nullopt);
  const Vector wc = bound_weights_from_scores(e, rho, WeightKind::w2, kDefaultClip);
  for (int i = 0; i < 100; ++i) {
    const double eta = rho(i) / e(i) - (1 - rho(i)) / (1 - e(i));
    EXPECT_NEAR(w2(i), eta * eta, 1e-12);
    EXPECT_NEAR(wp(i), rho(i) / e(i) + (1 - rho(i)) / (1 - e(i)), 1e-12);
    EXPECT_NEAR(w1(i), std::abs(eta), 1e-12);
    const double ec = std::clamp(e(i), 0.3, 0.7), rc = std::clamp(rho(i), 0.3, 0.7);
    EXPECT_NEAR(wc(i), std::pow(rc / ec - (1 - rc) / (1 - ec), 2), 1e-12);
  }
  const Vector zero = bound_weights_from_scores(e, e, WeightKind::w2, std::nullopt);
  EXPECT_EQ(zero.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(bound_weights_from_scores(e, e, WeightKind::w1, std::nullopt).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LT((bound_weights_from_scores(e, e, WeightKind::wplus, std::nullopt).array() - 2).abs().maxCoeff(), 1e-12);
  const Vector half = Vector::Constant(100, 0.5);
  EXPECT_LT((bound_weights_from_scores(half, rho, WeightKind::wplus, std::nullopt).array() - 2).abs().maxCoeff(), 1e-12);
  EXPECT_NEAR(bound_weights_from_scores(Vector::Constant(1, 0.5), Vector::Constant(1, 0.7), WeightKind::w2)(0), 0.64,
              1e-12);
}

TEST(BoundRegression, UninformativeScoresGiveAllZeroWeights) {
  auto rng = make_rng(6, 0);
  Matrix x(100, 1), s(100, 1);
  IntVector t(100);
  for (int i = 0; i < 100; ++i) x(i, 0) = rng.normal(), s(i, 0) = rng.normal(), t(i) = i % 2;
  const auto c = make_cohort(x, s, t, s.col(0));
  NuisanceBundle b;
  b.h_hat = fit_surrogate_index(c, IndexFamily::linear, rng);
  b.e_constant = 0.5;
  LogisticModel flat;
  flat.coefficients = Vector::Zero(2);
  b.rho_hat = flat;
  expect_error(Errc::AllZeroWeights, [&] { fit_bound_regression(c, b, BoundOptions{}, rng); });
  NuisanceBundle empty;
  expect_error(Errc::UnfittedNuisance, [&] { compute_bound_weights(c, empty, WeightKind::w2); });
}

TEST(BoundRegression, CaseAEmbeddingRecoversConditionalMean) {
  auto mrng = make_rng(7, 0);
  RandomModelOptions mo;
  mo.nx = 3;
  mo.ns = 4;
  const auto rm = random_discrete_scm(CaseId::a, mrng, mo).model;
  const Cohort c = embed(rm, 100000, make_rng(7, 1));
  NuisanceOptions no;
  no.index_family = IndexFamily::tree;
  no.index = exact_tree_options();
  no.fit_sampler = false;
  const auto bundle = fit_nuisances(c, c, make_rng(7, 2), no);
  const Vector target = outcome_regression_table(rm);

  // h_hat does not depend on x.
  for (Eigen::Index xi = 0; xi < rm.nx(); ++xi) {
    const Matrix xr = rm.x_support.row(xi).replicate(rm.ns(), 1);
    EXPECT_LT((bundle.index().predict(xr, rm.s_support) - target).cwiseAbs().maxCoeff(), 0.05);
  }
  for (auto scheme : {WeightKind::w2, WeightKind::wplus, WeightKind::w1}) {
    BoundOptions bo;
    bo.scheme = scheme;
    bo.family = BoundFamily::tree;
    bo.grid = exact_tree_options().grid;
    const auto f = fit_bound_regression(c, bundle, bo, make_rng(7, 3));
    EXPECT_LT((f.predict(rm.s_support) - target).cwiseAbs().maxCoeff(), 0.02) << to_string(scheme);
  }
  IndexFitOptions io = exact_tree_options();
  const auto f_or = fit_outcome_regression(c, PlugInFamily::tree, make_rng(7, 4), io);
  EXPECT_LT(exact_risk(rm, f_or.predict(rm.s_support)), 0.05);
}

TEST(BoundRegression, BinarizedTreeSplitsOnRawScale) {
  Matrix s(10, 1);
  for (int i = 0; i < 10; ++i) s(i, 0) = i;
  const auto q = quantile_thresholds(s, 4);
  ASSERT_EQ(q.size(), 1u);
  ASSERT_EQ(q[0].size(), 3u);
  EXPECT_NEAR(q[0][0], 2.25, 1e-12);
  EXPECT_NEAR(q[0][1], 4.5, 1e-12);
}

TEST(Sampler, NoiselessSurrogatesAreReproduced) {
  Matrix x(400, 1), s(400, 2);
  IntVector t(400);
  for (int i = 0; i < 400; ++i) {
    x(i, 0) = i % 4;
    t(i) = (i / 4) % 2;
    s(i, 0) = 2 * x(i, 0) + t(i);
    s(i, 1) = -x(i, 0);
  }
  const auto c = make_cohort(x, s, t, Vector::Zero(400));
  SamplerOptions so;
  so.samples_per_arm = 5;
  const auto sampler = fit_conditional_sampler(c, make_rng(8, 0), so);
  const Matrix xq = Matrix::Constant(1, 1, 1.0);
  for (int arm : {0, 1}) {
    const Matrix draws = sampler.draw(arm, xq, make_rng(8, 1));
    ASSERT_EQ(draws.rows(), 5);
    for (int l = 0; l < 5; ++l) {
      EXPECT_NEAR(draws(l, 0), 2.0 + arm, 1e-12);
      EXPECT_NEAR(draws(l, 1), -1.0, 1e-12);
    }
  }
}

TEST(Sampler, ContrastMatchesTruthAndIsDeterministic) {
  ScenarioSpec spec;
  const auto params = sample_scenario_params(spec);
  const auto [obs, truth] = generate_cohort(params, 5000, Regime::observational, make_rng(0, 1));
  const auto sampler = fit_conditional_sampler(obs, make_rng(9, 0));
  // Held-out units; the per-unit error mixes draw noise and forest variance,
  // so the check is on the average over units.
  const Eigen::Index m = 200;
  const auto [fresh, fresh_truth] = generate_cohort(params, m, Regime::trial, make_rng(0, 7));
  const Matrix d1 = sampler.draw(1, fresh.x, make_rng(9, 1));
  const Matrix d0 = sampler.draw(0, fresh.x, make_rng(9, 2));
  const int L = sampler.samples_per_arm;
  ASSERT_EQ(L, 50);
  Matrix err(m, obs.d());
  for (Eigen::Index i = 0; i < m; ++i) {
    const Vector mean1 = d1.middleRows(i * L, L).colwise().mean().transpose();
    const Vector mean0 = d0.middleRows(i * L, L).colwise().mean().transpose();
    err.row(i) = (mean1 - mean0 - (fresh_truth.s1.row(i) - fresh_truth.s0.row(i)).transpose()).transpose();
  }
  for (Eigen::Index j = 0; j < obs.d(); ++j) {
    const Vector e = err.col(j);
    const double se = std::sqrt((e.array() - e.mean()).square().sum() / (m - 1) / m);
    EXPECT_LT(std::abs(e.mean()), 3 * se) << "dim " << j;
  }
  EXPECT_TRUE(sampler.draw(1, obs.x.topRows(10), make_rng(1, 1)) == sampler.draw(1, obs.x.topRows(10), make_rng(1, 1)));
}

TEST(Sampler, SingleArm) {
  const auto c = make_cohort(Matrix::Zero(6, 1), Matrix::Zero(6, 1), IntVector::Zero(6), Vector::Zero(6));
  expect_error(Errc::SingleArmData, [&] { fit_conditional_sampler(c, make_rng(0, 0)); });
}

namespace {

struct SamplingFixture {
  Cohort cohort;
  NuisanceBundle bundle;
  Vector beta_h;
};

// h(x, s) = beta_h' s exactly; any sampler then yields c_j = beta_h' d_j.
SamplingFixture linear_fixture(std::uint64_t seed) {
  auto rng = make_rng(seed, 0);
  const Eigen::Index n = 300;
  Matrix x(n, 2), s(n, 3);
  IntVector t(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = static_cast<double>(rng.uniform_index(3));
    x(i, 1) = static_cast<double>(rng.uniform_index(3));
    t(i) = rng.bernoulli(0.5);
    s(i, 0) = x(i, 0) + t(i) * (1 + x(i, 0)) + 0.3 * rng.normal();
    s(i, 1) = x(i, 1) + t(i) * (1 + x(i, 1)) + 0.3 * rng.normal();
    s(i, 2) = -x(i, 0) + t(i) * (0.5 + x(i, 0) * x(i, 1)) + 0.3 * rng.normal();
  }
  SamplingFixture f;
  f.beta_h = Vector(3);
  f.beta_h << rng.normal(), rng.normal(), rng.normal();
  f.cohort = make_cohort(x, s, t, s * f.beta_h);
  LinearModel h;
  h.coefficients = Vector::Zero(5);
  h.coefficients.tail(3) = f.beta_h;
  h.intercept = 0.25;
  f.bundle.h_hat = SurrogateIndex{h, 2, 3, 0.0};
  SamplerOptions so;
  so.forest.n_trees = 20;
  so.samples_per_arm = 10;
  f.bundle.sampler = fit_conditional_sampler(f.cohort, make_rng(seed, 1), so);
  return f;
}

}  // namespace

TEST(Sampling, LinearIndexIsRecovered) {
  const auto fx = linear_fixture(10);
  const auto contrasts = sampling_contrasts(fx.cohort, fx.bundle, make_rng(10, 2));
  SamplingOptions o;
  o.lambda = 0.0;
  const Vector beta = solve_sampling_objective(contrasts, o);
  EXPECT_LT((beta - fx.beta_h).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT(linear_risk(fx.beta_h, beta, contrasts.d, contrasts.weights), 1e-12);
}

TEST(Sampling, ClosedFormMatchesGradient) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto fx = linear_fixture(20 + seed);
    // Make h nonlinear in s so the fit is not exact.
    GbmParams gp;
    gp.max_iter = 40;
    Matrix xs(fx.cohort.n, 5);
    xs << fx.cohort.x, fx.cohort.s;
    Vector y = *fx.cohort.y;
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += std::sin(fx.cohort.s(i, 0));
    fx.bundle.h_hat = SurrogateIndex{fit_gbm(xs, y, gp, make_rng(seed, 3)), 2, 3, 0.0};
    const auto contrasts = sampling_contrasts(fx.cohort, fx.bundle, make_rng(seed, 4));
    for (double lambda : {0.0, 0.01}) {
      SamplingOptions a, b;
      a.lambda = b.lambda = lambda;
      b.solver = SamplingOptions::Solver::gradient;
      EXPECT_LT((solve_sampling_objective(contrasts, a) - solve_sampling_objective(contrasts, b)).cwiseAbs().maxCoeff(),
                1e-4);
    }
  }
}

TEST(Sampling, HugePenaltyGivesNullModel) {
  const auto fx = linear_fixture(11);
  SamplingOptions o;
  o.lambda = 1e6;
  const auto f = fit_surrogate_sampling(fx.cohort, fx.cohort, fx.bundle, o, make_rng(11, 2));
  EXPECT_EQ(f.embedded_coefficients().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(ate_diff_in_means(f.predict(fx.cohort.s), *fx.cohort.t), 0.0);
}

TEST(Sampling, RiskIsMinimizedAndTranslationInvariant) {
  const auto fx = linear_fixture(12);
  auto contrasts = sampling_contrasts(fx.cohort, fx.bundle, make_rng(12, 2));
  contrasts.c.array() += 0.1 * Eigen::ArrayXd::LinSpaced(contrasts.c.size(), -1, 1).sin();
  SamplingOptions o;
  o.lambda = 0.0;
  SurrogateModel f;
  f.input_dim = 3;
  f.linear.coefficients = solve_sampling_objective(contrasts, o);
  const double best = estimate_sampling_risk(f, contrasts);
  auto rng = make_rng(12, 3);
  for (int r = 0; r < 10; ++r) {
    SurrogateModel g = f;
    for (int j = 0; j < 3; ++j) g.linear.coefficients(j) += 0.01 * rng.normal();
    EXPECT_GE(estimate_sampling_risk(g, contrasts), best);
  }
  SurrogateModel shifted = f;
  shifted.offset += 3.0;
  EXPECT_NEAR(estimate_sampling_risk(shifted, contrasts), best, 1e-12);
}

TEST(Sampling, DegenerateContrasts) {
  SamplingContrasts c;
  c.d = Matrix::Zero(10, 2);
  c.c = Vector::Ones(10);
  c.weights = Vector::Ones(10);
  expect_error(Errc::DegenerateContrasts, [&] { solve_sampling_objective(c, SamplingOptions{}); });
}

TEST(Calibration, LevelOffset) {
  Matrix s(4, 1);
  s << 1, 2, 4, 5;  // mean 3
  const auto c = make_cohort(Matrix::Zero(4, 1), s, IntVector::Zero(4), Vector::Constant(4, 10.0));
  SurrogateModel f;
  f.input_dim = 1;
  f.linear.coefficients = Vector::Ones(1);
  const auto g = calibrate_surrogate(f, c);
  EXPECT_DOUBLE_EQ(g.offset, 7.0);
  EXPECT_DOUBLE_EQ(calibrate_surrogate(g, c).offset, 7.0);
  IntVector t(4);
  t << 0, 1, 0, 1;
  EXPECT_NEAR(ate_diff_in_means(f.predict(s), t), ate_diff_in_means(g.predict(s), t), 1e-12);
}

TEST(SurrogateModel, WidthAndJson) {
  SurrogateModel f;
  f.input_dim = 3;
  f.input_columns = {2};
  f.linear.coefficients = Vector::Constant(1, 1.5);
  f.offset = 0.1;
  Matrix s(2, 3);
  s << 1, 2, 3, 4, 5, 6;
  EXPECT_NEAR(f.predict(s)(1), 9.1, 1e-12);
  Vector embedded(3);
  embedded << 0, 0, 1.5;
  EXPECT_TRUE(f.embedded_coefficients() == embedded);
  expect_error(Errc::WidthMismatch, [&] { f.predict(Matrix::Zero(1, 2)); });
  const auto back = surrogate_from_json(nlohmann::json::parse(to_json(f).dump()));
  EXPECT_TRUE(back.predict(s) == f.predict(s));
}

TEST(Nuisances, WidthsAndExperimentalPropensity) {
  ScenarioSpec spec;
  const auto params = sample_scenario_params(spec);
  auto [obs, truth] = generate_cohort(params, 800, Regime::observational, make_rng(0, 1));
  NuisanceOptions o;
  o.index_family = IndexFamily::linear;
  o.sampler.forest.n_trees = 10;
  auto b = fit_nuisances(obs, obs, make_rng(0, 3), o);
  EXPECT_EQ(std::get<LinearModel>(b.h_hat->model).coefficients.size(), obs.k() + obs.d());
  EXPECT_EQ(b.e_hat->coefficients.size(), obs.k());
  EXPECT_EQ(b.rho_hat->coefficients.size(), obs.k() + obs.d());
  obs.population = PopulationTag::experimental;
  b = fit_nuisances(obs, obs, make_rng(0, 3), o);
  EXPECT_DOUBLE_EQ(*b.e_constant, obs.t->cast<double>().mean());
  EXPECT_TRUE((b.propensity(obs.x).array() == *b.e_constant).all());
}
