#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "surro/models/cv.hpp"
#include "surro/models/ensemble.hpp"
#include "surro/models/linear.hpp"
#include "surro/models/logistic.hpp"
#include "surro/models/model_io.hpp"
#include "surro/models/tree.hpp"

using namespace surro;

namespace {

Matrix normal_matrix(Eigen::Index n, Eigen::Index p, RandomSource rng) {
  Matrix z(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) z(i, j) = rng.normal();
  return z;
}

double r2(const Vector& pred, const Vector& y) {
  return 1.0 - (pred - y).squaredNorm() / (y.array() - y.mean()).square().sum();
}

}  // namespace

TEST(Linear, ExactLine) {
  Matrix z(3, 1);
  z << 1, 2, 3;
  Vector y(3);
  y << 2, 4, 6;
  const auto m = fit_linear(z, y);
  EXPECT_NEAR(m.coefficients(0), 2.0, 1e-12);
  EXPECT_NEAR(m.intercept, 0.0, 1e-12);
}

TEST(Linear, PredictIsAffine) {
  LinearModel m;
  m.coefficients = Vector(2);
  m.coefficients << 1, -1;
  m.intercept = 3;
  Matrix z(1, 2);
  z << 2, 1;
  EXPECT_EQ(m.predict(z)(0), 4.0);
}

TEST(Linear, WeightedNormalEquations) {
  auto rng = make_rng(3, 0);
  const Matrix z = normal_matrix(80, 3, make_rng(3, 1));
  Vector y(80), w(80);
  for (int i = 0; i < 80; ++i) {
    y(i) = z(i, 0) - 2 * z(i, 2) + rng.normal();
    w(i) = 0.1 + rng.uniform();
  }
  const auto m = fit_linear(z, y, w);
  const Vector r = y - m.predict(z);
  EXPECT_LT((z.transpose() * w.asDiagonal() * r).cwiseAbs().maxCoeff(), 1e-8 * y.norm());
  EXPECT_LT(std::abs(w.dot(r)), 1e-8 * y.norm());
}

TEST(Linear, LassoNullModel) {
  auto rng = make_rng(4, 0);
  const Matrix z = normal_matrix(50, 4, make_rng(4, 1));
  Vector y(50), w(50);
  for (int i = 0; i < 50; ++i) {
    y(i) = z(i, 1) + rng.normal();
    w(i) = 0.5 + rng.uniform();
  }
  const double ybar = w.dot(y) / w.sum();
  const Vector centered = y.array() - ybar;
  const double lambda_max = (z.transpose() * w.asDiagonal() * centered).cwiseAbs().maxCoeff() / 50.0;
  const auto m = fit_linear(z, y, w, lambda_max * 1.001);
  EXPECT_EQ(m.coefficients.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_NEAR(m.intercept, ybar, 1e-12);
}

TEST(Linear, LassoKkt) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto rng = make_rng(seed, 10);
    const Matrix z = normal_matrix(50, 4, make_rng(seed, 11));
    Vector y(50), w(50);
    for (int i = 0; i < 50; ++i) {
      y(i) = 0.8 * z(i, 0) - 0.05 * z(i, 1) + 0.3 * z(i, 3) + rng.normal();
      w(i) = 0.2 + rng.uniform();
    }
    LinearFitOptions o;
    o.l1_strength = 0.1;
    o.tolerance = 1e-13;
    o.max_sweeps = 100000;
    const auto m = fit_linear(z, y, w, o);
    const Vector r = y - m.predict(z);
    const Vector g = z.transpose() * w.asDiagonal() * r / 50.0;
    for (int j = 0; j < 4; ++j) {
      if (m.coefficients(j) != 0.0) {
        EXPECT_LT(std::abs(g(j) - 0.1 * (m.coefficients(j) > 0 ? 1 : -1)), 1e-6);
      } else {
        EXPECT_LE(std::abs(g(j)), 0.1 + 1e-6);
      }
    }
  }
}

TEST(Linear, RejectsBadWeights) {
  Matrix z = Matrix::Ones(3, 1);
  Vector y = Vector::Ones(3);
  try {
    fit_linear(z, y, Vector::Zero(3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::AllZeroWeights);
  }
}

TEST(Logistic, SymmetricNullModel) {
  Matrix z = Matrix::Zero(6, 2);
  IntVector t(6);
  t << 0, 1, 0, 1, 0, 1;
  const auto m = fit_logistic(z, t, 1.0);
  EXPECT_NEAR(m.intercept, 0.0, 1e-10);
  EXPECT_NEAR(m.coefficients.norm(), 0.0, 1e-10);
  EXPECT_NEAR(m.predict(z)(0), 0.5, 1e-10);
}

TEST(Logistic, MonotoneRelationship) {
  auto rng = make_rng(2, 0);
  Matrix z(200, 1);
  IntVector t(200);
  for (int i = 0; i < 200; ++i) {
    z(i, 0) = rng.normal();
    t(i) = z(i, 0) > 0;
  }
  EXPECT_GT(fit_logistic(z, t, 1.0).coefficients(0), 0.0);
}

TEST(Logistic, GradientAtSolutionAndFiniteDifferences) {
  auto rng = make_rng(8, 0);
  const Matrix z = normal_matrix(200, 3, make_rng(8, 1));
  IntVector t(200);
  for (int i = 0; i < 200; ++i) t(i) = rng.bernoulli(sigmoid(0.3 + z(i, 0) - 0.5 * z(i, 2)));
  const auto m = fit_logistic(z, t, 1.0);
  EXPECT_LT(logistic_gradient(z, t, 1.0, m.intercept, m.coefficients).norm(), 1e-6);

  // Away from the optimum the analytic gradient must match central differences.
  Vector beta(3);
  beta << 0.4, -0.2, 0.9;
  const double b = -0.3, h = 1e-5;
  const Vector g = logistic_gradient(z, t, 1.0, b, beta);
  Vector fd(4);
  fd(0) = (logistic_objective(z, t, 1.0, b + h, beta) - logistic_objective(z, t, 1.0, b - h, beta)) / (2 * h);
  for (int j = 0; j < 3; ++j) {
    Vector up = beta, dn = beta;
    up(j) += h;
    dn(j) -= h;
    fd(j + 1) = (logistic_objective(z, t, 1.0, b, up) - logistic_objective(z, t, 1.0, b, dn)) / (2 * h);
  }
  EXPECT_LT((g - fd).norm() / g.norm(), 1e-4);
}

TEST(Logistic, SingleClassIsSeparation) {
  Matrix z = Matrix::Ones(4, 1);
  IntVector t = IntVector::Ones(4);
  try {
    fit_logistic(z, t, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Separation);
  }
}

TEST(Tree, ConstantTargetsGiveOneLeaf) {
  const Matrix z = normal_matrix(30, 2, make_rng(1, 0));
  const auto tree = fit_tree(z, Vector::Constant(30, 7.0));
  EXPECT_EQ(tree.n_leaves(), 1);
  EXPECT_EQ(tree.predict(z)(5), 7.0);
}

TEST(Tree, StepFunctionSplit) {
  auto rng = make_rng(12, 0);
  Matrix z(500, 1);
  Vector y(500);
  for (int i = 0; i < 500; ++i) {
    z(i, 0) = rng.uniform();
    y(i) = z(i, 0) > 0.5;
  }
  TreeParams p;
  p.max_depth = 1;
  const auto tree = fit_tree(z, y, std::nullopt, p);
  // Brute force over midpoints between consecutive sorted values.
  std::vector<double> v(z.data(), z.data() + 500);
  std::sort(v.begin(), v.end());
  double gap = 0.0;
  for (int i = 1; i < 500; ++i) gap = std::max(gap, v[i] - v[i - 1]);
  EXPECT_NEAR(tree.nodes[0].threshold, 0.5, gap);
  EXPECT_NEAR(tree.predict_row(Matrix::Constant(1, 1, 0.1), 0), 0.0, 1e-12);
  EXPECT_NEAR(tree.predict_row(Matrix::Constant(1, 1, 0.9), 0), 1.0, 1e-12);
}

TEST(Tree, LeavesAreWeightedMeans) {
  auto rng = make_rng(13, 0);
  const Matrix z = normal_matrix(400, 3, make_rng(13, 1));
  Vector y(400), w(400);
  for (int i = 0; i < 400; ++i) {
    y(i) = std::sin(z(i, 0)) + z(i, 1) * z(i, 2) + 0.3 * rng.normal();
    w(i) = 0.1 + 2 * rng.uniform();
  }
  TreeParams p;
  p.max_depth = 5;
  p.min_samples_leaf = 10;
  p.ccp_alpha = 1e-3;
  const auto tree = fit_tree(z, y, w, p);
  EXPECT_LE(tree.depth, 5);
  std::map<int, std::pair<double, double>> acc;
  for (int i = 0; i < 400; ++i) {
    auto& a = acc[tree.leaf_of(z, i)];
    a.first += w(i) * y(i);
    a.second += w(i);
  }
  for (const auto& [leaf, a] : acc) EXPECT_NEAR(tree.nodes[leaf].value, a.first / a.second, 1e-12);
}

TEST(Tree, WeightScaleInvariance) {
  auto rng = make_rng(14, 0);
  const Matrix z = normal_matrix(200, 2, make_rng(14, 1));
  Vector y(200);
  for (int i = 0; i < 200; ++i) y(i) = z(i, 0) * z(i, 1) + rng.normal();
  TreeParams p;
  p.max_depth = 4;
  const auto a = fit_tree(z, y, Vector::Ones(200), p);
  const auto b = fit_tree(z, y, Vector::Constant(200, 2.0), p);
  ASSERT_EQ(a.nodes.size(), b.nodes.size());
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    EXPECT_EQ(a.nodes[i].feature, b.nodes[i].feature);
    EXPECT_EQ(a.nodes[i].threshold, b.nodes[i].threshold);
    EXPECT_NEAR(a.nodes[i].value, b.nodes[i].value, 1e-12);
  }
}

TEST(Forest, DegenerateForestIsATree) {
  auto rng = make_rng(15, 0);
  const Matrix z = normal_matrix(150, 3, make_rng(15, 1));
  Vector y(150);
  for (int i = 0; i < 150; ++i) y(i) = z(i, 0) + rng.normal();
  ForestParams fp;
  fp.n_trees = 1;
  fp.features_per_split = 3;
  fp.bootstrap = false;
  const auto forest = fit_forest(z, y, fp, make_rng(0, 0));
  const auto tree = fit_tree(z, y);
  EXPECT_TRUE(forest.predict(z).isApprox(tree.predict(z), 1e-12));
}

TEST(Forest, FitsLinearSignalAndIsDeterministic) {
  const Matrix z = normal_matrix(1000, 2, make_rng(16, 1));
  const Vector y = z.col(0) * 2.0 - z.col(1);
  ForestParams fp;
  const auto a = fit_forest(z, y, fp, make_rng(16, 2));
  const auto b = fit_forest(z, y, fp, make_rng(16, 2));
  const Vector pa = a.predict(z);
  EXPECT_GT(r2(pa, y), 0.9);
  EXPECT_TRUE(pa == b.predict(z));
  // Forest prediction is the mean of the member trees.
  Vector mean = Vector::Zero(1000);
  for (const auto& t : a.trees) mean += t.predict(z);
  mean /= static_cast<double>(a.trees.size());
  EXPECT_TRUE(pa.isApprox(mean, 1e-12));
}

TEST(Gbm, ConstantTargets) {
  const Matrix z = normal_matrix(200, 2, make_rng(17, 1));
  const auto m = fit_gbm(z, Vector::Constant(200, 3.5), GbmParams{}, make_rng(17, 2));
  EXPECT_DOUBLE_EQ(m.base_score, 3.5);
  EXPECT_TRUE(m.trees.empty());
}

TEST(Gbm, BeatsDepthSixTreeOnSquare) {
  auto rng = make_rng(18, 0);
  Matrix z(2000, 1), zt(2000, 1);
  Vector y(2000), yt(2000);
  for (int i = 0; i < 2000; ++i) {
    z(i, 0) = 2 * rng.uniform() - 1;
    y(i) = z(i, 0) * z(i, 0) + 0.1 * rng.normal();
    zt(i, 0) = 2 * rng.uniform() - 1;
    yt(i) = zt(i, 0) * zt(i, 0);
  }
  const auto gbm = fit_gbm(z, y, GbmParams{}, make_rng(18, 1));
  TreeParams p;
  p.max_depth = 6;
  const auto tree = fit_tree(z, y, std::nullopt, p);
  EXPECT_LT((gbm.predict(zt) - yt).squaredNorm(), (tree.predict(zt) - yt).squaredNorm());
  // Prediction is base score plus shrunken member sum.
  Vector sum = Vector::Constant(2000, gbm.base_score);
  for (const auto& t : gbm.trees) sum += gbm.learning_rate * t.predict(zt);
  EXPECT_TRUE(gbm.predict(zt).isApprox(sum, 1e-12));
}

TEST(Gbm, EarlyStopsOnNoise) {
  auto rng = make_rng(19, 0);
  const Matrix z = normal_matrix(2000, 3, make_rng(19, 1));
  Vector y(2000);
  for (int i = 0; i < 2000; ++i) y(i) = rng.normal();
  const auto m = fit_gbm(z, y, GbmParams{}, make_rng(19, 2));
  EXPECT_LT(m.trees.size(), 400u);
}

TEST(Cv, SinglePointGrid) {
  const Matrix z = normal_matrix(50, 1, make_rng(20, 0));
  const Vector y = z.col(0);
  TreeParams only;
  only.max_depth = 2;
  auto fit = [](const Matrix& f, const Vector& t, const std::optional<Vector>& w, const TreeParams& p) {
    return fit_tree(f, t, w, p);
  };
  const auto r = cross_validate_grid(z, y, std::vector<TreeParams>{only}, fit, make_rng(1, 1));
  EXPECT_EQ(r.best_index, 0u);
  EXPECT_EQ(r.best.max_depth, 2);
}

TEST(Cv, SelectsDepthTwoForDepthTwoRule) {
  auto rng = make_rng(21, 0);
  Matrix z(400, 2);
  Vector y(400);
  for (int i = 0; i < 400; ++i) {
    z(i, 0) = rng.uniform();
    z(i, 1) = rng.uniform();
    y(i) = (z(i, 0) > 0.5 ? 2.0 : 0.0) + (z(i, 1) > 0.5 ? 1.0 : 0.0) + 0.1 * rng.normal();
  }
  TreeParams d1, d2;
  d1.max_depth = 1;
  d2.max_depth = 2;
  const std::vector<TreeParams> grid{d1, d2};
  auto fit = [](const Matrix& f, const Vector& t, const std::optional<Vector>& w, const TreeParams& p) {
    return fit_tree(f, t, w, p);
  };
  const auto r = cross_validate_grid(z, y, grid, fit, make_rng(2, 2));
  EXPECT_EQ(r.best.max_depth, 2);

  // Fold-wise MSE recomputed directly.
  const auto folds = kfold_indices(400, 5, make_rng(2, 2));
  for (std::size_t g = 0; g < 2; ++g) {
    double total = 0;
    for (std::size_t f = 0; f < folds.size(); ++f) {
      std::vector<Eigen::Index> train;
      for (std::size_t h = 0; h < folds.size(); ++h)
        if (h != f) train.insert(train.end(), folds[h].begin(), folds[h].end());
      std::sort(train.begin(), train.end());
      const auto tree = fit_tree(take_rows(z, train), take_rows(y, train), std::nullopt, grid[g]);
      total += (tree.predict(take_rows(z, folds[f])) - take_rows(y, folds[f])).squaredNorm() / folds[f].size();
    }
    EXPECT_NEAR(r.mean_mse[g], total / 5, 1e-12);
  }
  const auto again = cross_validate_grid(z, y, grid, fit, make_rng(2, 2));
  EXPECT_EQ(again.mean_mse, r.mean_mse);
}

TEST(Cv, DefaultGridHasFiftyFourPoints) { EXPECT_EQ(default_tree_grid().size(), 54u); }

TEST(ModelIo, PredictDispatch) {
  LogisticModel lg;
  lg.coefficients = Vector::Zero(2);
  EXPECT_EQ(predict(AnyModel{lg}, Matrix::Ones(1, 2))(0), 0.5);
  TreeModel leaf;
  leaf.nodes.push_back(TreeNode{});
  leaf.nodes[0].value = 7.0;
  leaf.n_features = 1;
  EXPECT_EQ(predict(AnyModel{leaf}, Matrix::Constant(1, 1, -3.0))(0), 7.0);
}

TEST(ModelIo, JsonRoundTripIsBitExact) {
  auto rng = make_rng(22, 0);
  const Matrix z = normal_matrix(300, 2, make_rng(22, 1));
  Vector y(300);
  for (int i = 0; i < 300; ++i) y(i) = z(i, 0) * z(i, 1) + rng.normal();
  GbmParams gp;
  gp.max_iter = 30;
  const std::vector<AnyModel> models{fit_linear(z, y), fit_tree(z, y),
                                     fit_forest(z, y, ForestParams{10}, make_rng(1, 1)),
                                     fit_gbm(z, y, gp, make_rng(1, 2))};
  for (const auto& m : models) {
    const auto back = model_from_json(nlohmann::json::parse(model_to_json(m).dump()));
    EXPECT_TRUE(predict(back, z) == predict(m, z));
  }
}
