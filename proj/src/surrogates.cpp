#include "surro/surrogates.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <numeric>

namespace surro {

using nlohmann::json;

namespace {

Matrix select_columns(const Matrix& s, const std::vector<Eigen::Index>& cols) {
  Matrix out(s.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = s.col(cols[j]);
  return out;
}

const Vector& require_y(const Cohort& c) {
  if (!c.y) throw Error(Errc::MissingOutcome, "outcome column y is required");
  return *c.y;
}

const IntVector& require_t(const Cohort& c) {
  if (!c.t) throw Error(Errc::ShapeMismatch, "treatment column t is required");
  return *c.t;
}

Matrix hstack(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

TreeModel fit_tree_cv(const Matrix& features, const Vector& targets, const std::optional<Vector>& weights,
                      std::vector<TreeParams> grid, int folds, const RandomSource& rng) {
  if (grid.empty()) grid = default_tree_grid();
  auto fit = [](const Matrix& x, const Vector& y, const std::optional<Vector>& w, const TreeParams& p) {
    return fit_tree(x, y, w, p);
  };
  TreeParams best = grid.front();
  if (grid.size() > 1) best = cross_validate_grid(features, targets, grid, fit, rng, folds, weights).best;
  return fit_tree(features, targets, weights, best);
}

double mean_of(const Vector& v) { return v.size() ? v.mean() : 0.0; }

}  // namespace

// -- SurrogateModel ---------------------------------------------------------

Vector SurrogateModel::raw_predict(const Matrix& s) const {
  if (s.cols() != input_dim) {
    throw Error(Errc::WidthMismatch, "surrogate expects " + std::to_string(input_dim) + " surrogate columns, got " +
                                         std::to_string(s.cols()));
  }
  const Matrix inner = input_columns.empty() ? s : select_columns(s, input_columns);
  return form == Form::linear ? linear.predict(inner) : tree.predict(inner);
}

Vector SurrogateModel::predict(const Matrix& s) const {
  Vector out = raw_predict(s);
  out = (scale * out.array() + offset).matrix();
  return out;
}

Vector SurrogateModel::embedded_coefficients() const {
  if (form != Form::linear) throw Error(Errc::ConfigError, "only linear surrogates have coefficients");
  if (input_columns.empty()) return linear.coefficients;
  Vector beta = Vector::Zero(input_dim);
  for (std::size_t j = 0; j < input_columns.size(); ++j) {
    beta(input_columns[j]) = linear.coefficients(static_cast<Eigen::Index>(j));
  }
  return beta;
}

json to_json(const SurrogateModel& f) {
  json doc;
  doc["form"] = f.form == SurrogateModel::Form::linear ? "linear" : "tree";
  doc["input_dim"] = f.input_dim;
  doc["input_columns"] = f.input_columns;
  doc["scale"] = f.scale;
  doc["offset"] = f.offset;
  doc["model"] = f.form == SurrogateModel::Form::linear ? model_to_json(AnyModel{f.linear}) : model_to_json(AnyModel{f.tree});
  return doc;
}

SurrogateModel surrogate_from_json(const json& doc) {
  try {
    SurrogateModel f;
    const std::string form = doc.at("form").get<std::string>();
    f.input_dim = doc.at("input_dim").get<Eigen::Index>();
    f.input_columns = doc.at("input_columns").get<std::vector<Eigen::Index>>();
    f.scale = doc.at("scale").get<double>();
    f.offset = doc.at("offset").get<double>();
    const AnyModel inner = model_from_json(doc.at("model"));
    if (form == "linear" && std::holds_alternative<LinearModel>(inner)) {
      f.form = SurrogateModel::Form::linear;
      f.linear = std::get<LinearModel>(inner);
    } else if (form == "tree" && std::holds_alternative<TreeModel>(inner)) {
      f.form = SurrogateModel::Form::tree;
      f.tree = std::get<TreeModel>(inner);
    } else {
      throw Error(Errc::SchemaError, "surrogate form and model kind disagree");
    }
    return f;
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaError, e.what());
  }
}

// -- Surrogate index and outcome regressions ---------------------------------

std::string to_string(IndexFamily f) {
  switch (f) {
    case IndexFamily::linear: return "linear";
    case IndexFamily::tree: return "tree";
    case IndexFamily::gbm: return "gbm";
  }
  return "unknown";
}

IndexFamily parse_index_family(const std::string& s) {
  if (s == "linear") return IndexFamily::linear;
  if (s == "tree") return IndexFamily::tree;
  if (s == "gbm") return IndexFamily::gbm;
  throw Error(Errc::ConfigError, "unknown index family '" + s + "'");
}

Vector SurrogateIndex::predict(const Matrix& x, const Matrix& s) const {
  if (x.cols() != k || s.cols() != d) throw Error(Errc::WidthMismatch, "surrogate index input width");
  if (x.rows() != s.rows()) throw Error(Errc::ShapeMismatch, "x and s row counts differ");
  return surro::predict(model, hstack(x, s));
}

SurrogateIndex fit_surrogate_index(const Cohort& outcome_data, IndexFamily family, const RandomSource& rng,
                                   const IndexFitOptions& options) {
  const Vector& y = require_y(outcome_data);
  if (outcome_data.x.rows() < 2) throw Error(Errc::TooFewSamples, "surrogate index needs at least two rows");
  const Matrix features = outcome_data.xs();
  SurrogateIndex out;
  out.k = outcome_data.k();
  out.d = outcome_data.d();
  switch (family) {
    case IndexFamily::linear:
      out.model = fit_linear(features, y);
      break;
    case IndexFamily::tree:
      out.model = fit_tree_cv(features, y, std::nullopt, options.grid, options.folds, rng);
      break;
    case IndexFamily::gbm:
      out.model = fit_gbm(features, y, options.gbm, rng);
      break;
  }
  out.residual_variance = (surro::predict(out.model, features) - y).squaredNorm() / static_cast<double>(y.size());
  return out;
}

SurrogateModel fit_outcome_regression(const Cohort& outcome_data, PlugInFamily family, const RandomSource& rng,
                                      const IndexFitOptions& options) {
  const Vector& y = require_y(outcome_data);
  SurrogateModel f;
  f.input_dim = outcome_data.d();
  if (family == PlugInFamily::linear) {
    f.form = SurrogateModel::Form::linear;
    f.linear = fit_linear(outcome_data.s, y);
  } else {
    f.form = SurrogateModel::Form::tree;
    f.tree = fit_tree_cv(outcome_data.s, y, std::nullopt, options.grid, options.folds, rng);
  }
  return f;
}

Eigen::Index reg_sel_reg_column(const Cohort& outcome_data) {
  const Vector& y = require_y(outcome_data);
  const Matrix& s = outcome_data.s;
  if (s.cols() < 1) throw Error(Errc::ShapeMismatch, "no surrogate columns");
  const double n = static_cast<double>(s.rows());
  Matrix z = s.rowwise() - s.colwise().mean();
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    const double sd = std::sqrt(z.col(j).squaredNorm() / n);
    if (sd > 0.0) z.col(j) /= sd;
  }
  const Vector theta = fit_linear(z, y).coefficients;
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < theta.size(); ++j) {
    const double a = std::abs(theta(j)), b = std::abs(theta(best));
    if (a > b + 1e-10 * std::max(1.0, b)) best = j;
  }
  return best;
}

SurrogateModel fit_reg_sel_reg(const Cohort& outcome_data, PlugInFamily family, const RandomSource& rng,
                               const IndexFitOptions& options) {
  const Eigen::Index j = reg_sel_reg_column(outcome_data);
  Cohort single = outcome_data;
  single.s = outcome_data.s.col(j);
  if (!outcome_data.s_names.empty()) single.s_names = {outcome_data.s_names[static_cast<std::size_t>(j)]};
  SurrogateModel f = fit_outcome_regression(single, family, rng, options);
  f.input_dim = outcome_data.d();
  f.input_columns = {j};
  return f;
}

// -- Conditional sampler -------------------------------------------------------

Matrix ConditionalSampler::mean(int arm, const Matrix& x) const {
  if (arm != 0 && arm != 1) throw Error(Errc::NonBinaryTreatment, "arm must be 0 or 1");
  if (x.cols() != k) throw Error(Errc::WidthMismatch, "sampler covariate width");
  const auto& models = mean_models[static_cast<std::size_t>(arm)];
  if (models.empty()) throw Error(Errc::UnfittedNuisance, "sampler is not fitted");
  Matrix out(x.rows(), d);
  for (Eigen::Index j = 0; j < d; ++j) out.col(j) = models[static_cast<std::size_t>(j)].predict(x);
  return out;
}

Matrix ConditionalSampler::draw(int arm, const Matrix& x, const RandomSource& rng) const {
  const Matrix means = mean(arm, x);
  const Matrix& pool = residual_pools[static_cast<std::size_t>(arm)];
  const auto L = static_cast<Eigen::Index>(samples_per_arm);
  Matrix out(x.rows() * L, d);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    RandomSource unit = rng.substream(static_cast<std::uint64_t>(i));
    for (Eigen::Index l = 0; l < L; ++l) {
      const auto r = static_cast<Eigen::Index>(unit.uniform_index(static_cast<std::size_t>(pool.rows())));
      out.row(i * L + l) = means.row(i) + pool.row(r);
    }
  }
  return out;
}

ConditionalSampler fit_conditional_sampler(const Cohort& treatment_data, const RandomSource& rng,
                                           const SamplerOptions& options) {
  const IntVector& t = require_t(treatment_data);
  if (options.samples_per_arm < 1) throw Error(Errc::ConfigError, "samples_per_arm must be positive");
  ConditionalSampler sampler;
  sampler.k = treatment_data.k();
  sampler.d = treatment_data.d();
  sampler.samples_per_arm = options.samples_per_arm;
  for (int arm = 0; arm < 2; ++arm) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      if (t(i) == arm) rows.push_back(i);
    }
    if (rows.size() < 2) throw Error(Errc::SingleArmData, "arm " + std::to_string(arm) + " has fewer than two units");
    const Matrix x = take_rows(treatment_data.x, rows);
    const Matrix s = take_rows(treatment_data.s, rows);
    Matrix pool(s.rows(), s.cols());
    auto& models = sampler.mean_models[static_cast<std::size_t>(arm)];
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
      Vector oob;
      const auto stream = static_cast<std::uint64_t>(arm * s.cols() + j);
      models.push_back(fit_forest(x, s.col(j), options.forest, rng.substream(stream), std::nullopt, &oob));
      pool.col(j) = s.col(j) - oob;
    }
    sampler.residual_pools[static_cast<std::size_t>(arm)] = std::move(pool);
  }
  return sampler;
}

// -- Nuisances -----------------------------------------------------------------

Vector NuisanceBundle::propensity(const Matrix& x) const {
  if (e_constant) return Vector::Constant(x.rows(), *e_constant);
  if (!e_hat) throw Error(Errc::UnfittedNuisance, "propensity model is not fitted");
  return e_hat->predict(x);
}

Vector NuisanceBundle::surrogate_score(const Matrix& x, const Matrix& s) const {
  if (!rho_hat) throw Error(Errc::UnfittedNuisance, "surrogate score model is not fitted");
  return rho_hat->predict(hstack(x, s));
}

const SurrogateIndex& NuisanceBundle::index() const {
  if (!h_hat) throw Error(Errc::UnfittedNuisance, "surrogate index is not fitted");
  return *h_hat;
}

NuisanceBundle fit_nuisances(const Cohort& outcome_data, const Cohort& treatment_data, const RandomSource& rng,
                             const NuisanceOptions& options) {
  const IntVector& t = require_t(treatment_data);
  NuisanceBundle b;
  b.h_hat = fit_surrogate_index(outcome_data, options.index_family, rng.substream(0), options.index);
  if (treatment_data.population == PopulationTag::experimental) {
    b.e_constant = t.cast<double>().mean();
  } else {
    b.e_hat = fit_logistic(treatment_data.x, t, options.propensity_l2);
  }
  b.rho_hat = fit_logistic(treatment_data.xs(), t, options.propensity_l2);
  if (options.fit_sampler) b.sampler = fit_conditional_sampler(treatment_data, rng.substream(2), options.sampler);
  return b;
}

// -- Bound regression ------------------------------------------------------------

Vector bound_weights_from_scores(const Vector& e, const Vector& rho, WeightKind scheme, std::optional<Clip> clip) {
  if (e.size() != rho.size()) throw Error(Errc::ShapeMismatch, "propensity and surrogate score lengths differ");
  if (scheme != WeightKind::w2 && scheme != WeightKind::wplus && scheme != WeightKind::w1) {
    throw Error(Errc::ConfigError, "bound weights are w2, wplus or w1");
  }
  Vector w(e.size());
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    double ei = e(i), ri = rho(i);
    if (clip) {
      ei = std::clamp(ei, clip->first, clip->second);
      ri = std::clamp(ri, clip->first, clip->second);
    }
    const double eta = ri / ei - (1.0 - ri) / (1.0 - ei);
    switch (scheme) {
      case WeightKind::w2: w(i) = eta * eta; break;
      case WeightKind::w1: w(i) = std::abs(eta); break;
      default: w(i) = ri / ei + (1.0 - ri) / (1.0 - ei); break;
    }
  }
  return w;
}

Vector compute_bound_weights(const Cohort& treatment_data, const NuisanceBundle& bundle, WeightKind scheme,
                             std::optional<Clip> clip, const DensityRatio* ratio) {
  Vector w = bound_weights_from_scores(bundle.propensity(treatment_data.x),
                                       bundle.surrogate_score(treatment_data.x, treatment_data.s), scheme, clip);
  if (ratio && !ratio->is_identity()) w.array() *= ratio->evaluate(treatment_data.x).array();
  return w;
}

std::string to_string(BoundFamily f) {
  switch (f) {
    case BoundFamily::linear_ols: return "linear-ols";
    case BoundFamily::linear_lasso: return "linear-lasso";
    case BoundFamily::tree: return "tree";
    case BoundFamily::bintree: return "bintree";
  }
  return "unknown";
}

std::vector<std::vector<double>> quantile_thresholds(const Matrix& s, int bins) {
  if (bins < 2) throw Error(Errc::ConfigError, "bins must be at least 2");
  std::vector<std::vector<double>> out(static_cast<std::size_t>(s.cols()));
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    std::vector<double> v(s.col(j).data(), s.col(j).data() + s.rows());
    std::sort(v.begin(), v.end());
    auto& q = out[static_cast<std::size_t>(j)];
    for (int l = 1; l < bins; ++l) {
      const double pos = static_cast<double>(l) / bins * static_cast<double>(v.size() - 1);
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const std::size_t hi = std::min(lo + 1, v.size() - 1);
      const double value = v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
      // Thresholds at or above the maximum give a constant indicator.
      if (value < v.back() && (q.empty() || value > q.back())) q.push_back(value);
    }
  }
  return out;
}

namespace {

// Tree on indicators Z = 1[S_j <= q] mapped back to a tree on raw s. A split
// Z <= 0.5 sends S_j > q left, so the children swap.
TreeModel binarized_to_raw(const TreeModel& tree, const std::vector<std::pair<Eigen::Index, double>>& columns,
                           Eigen::Index d) {
  TreeModel raw = tree;
  raw.n_features = static_cast<int>(d);
  for (auto& node : raw.nodes) {
    if (node.is_leaf()) continue;
    const auto& [j, q] = columns[static_cast<std::size_t>(node.feature)];
    node.feature = static_cast<int>(j);
    node.threshold = q;
    std::swap(node.left, node.right);
  }
  return raw;
}

}  // namespace

SurrogateModel fit_bound_regression(const Cohort& treatment_data, const NuisanceBundle& bundle,
                                    const BoundOptions& options, const RandomSource& rng) {
  const Vector w = compute_bound_weights(treatment_data, bundle, options.scheme, options.clip,
                                         options.ratio ? &*options.ratio : nullptr);
  if (!(w.mean() >= 1e-8)) {
    throw Error(Errc::AllZeroWeights, "bound weights vanish: the surrogates carry no information about treatment");
  }
  const Vector target = bundle.index().predict(treatment_data.x, treatment_data.s);
  const Matrix& s = treatment_data.s;
  SurrogateModel f;
  f.input_dim = s.cols();
  switch (options.family) {
    case BoundFamily::linear_ols:
    case BoundFamily::linear_lasso:
      f.form = SurrogateModel::Form::linear;
      f.linear = fit_linear(s, target, w, options.family == BoundFamily::linear_lasso ? options.lambda : 0.0);
      break;
    case BoundFamily::tree:
      f.form = SurrogateModel::Form::tree;
      f.tree = fit_tree_cv(s, target, w, options.grid, options.folds, rng);
      break;
    case BoundFamily::bintree: {
      const auto thresholds = quantile_thresholds(s, options.bins);
      std::vector<std::pair<Eigen::Index, double>> columns;
      for (Eigen::Index j = 0; j < s.cols(); ++j) {
        for (double q : thresholds[static_cast<std::size_t>(j)]) columns.emplace_back(j, q);
      }
      if (columns.empty()) throw Error(Errc::DegenerateContrasts, "every surrogate column is constant");
      Matrix z(s.rows(), static_cast<Eigen::Index>(columns.size()));
      for (std::size_t c = 0; c < columns.size(); ++c) {
        z.col(static_cast<Eigen::Index>(c)) =
            (s.col(columns[c].first).array() <= columns[c].second).cast<double>().matrix();
      }
      f.form = SurrogateModel::Form::tree;
      f.tree = binarized_to_raw(fit_tree_cv(z, target, w, options.grid, options.folds, rng), columns, s.cols());
      break;
    }
  }
  return f;
}

// -- Surrogate sampling ----------------------------------------------------------

SamplingContrasts sampling_contrasts(const Cohort& treatment_data, const NuisanceBundle& bundle,
                                     const RandomSource& rng, const DensityRatio* ratio) {
  if (!bundle.sampler) throw Error(Errc::UnfittedNuisance, "conditional sampler is not fitted");
  const SurrogateIndex& h = bundle.index();
  const ConditionalSampler& g = *bundle.sampler;
  const Eigen::Index n = treatment_data.x.rows();
  const Eigen::Index L = g.samples_per_arm;

  SamplingContrasts out;
  out.samples_per_arm = g.samples_per_arm;
  out.s1_draws = g.draw(1, treatment_data.x, rng.substream(1));
  out.s0_draws = g.draw(0, treatment_data.x, rng.substream(0));
  Matrix x_rep(n * L, treatment_data.k());
  for (Eigen::Index i = 0; i < n; ++i) x_rep.middleRows(i * L, L).rowwise() = treatment_data.x.row(i);
  out.h1_draws = h.predict(x_rep, out.s1_draws);
  out.h0_draws = h.predict(x_rep, out.s0_draws);

  out.d.resize(n, g.d);
  out.c.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.d.row(i) = out.s1_draws.middleRows(i * L, L).colwise().mean() - out.s0_draws.middleRows(i * L, L).colwise().mean();
    out.c(i) = out.h1_draws.segment(i * L, L).mean() - out.h0_draws.segment(i * L, L).mean();
  }
  out.weights = ratio && !ratio->is_identity() ? ratio->evaluate(treatment_data.x) : Vector::Ones(n);
  return out;
}

namespace {

double soft(double v, double t) { return v > t ? v - t : (v < -t ? v + t : 0.0); }

// Accelerated proximal gradient on (1/2n) sum_j w_j r_j(beta)^2 + lambda |beta|_1
// where r_j is evaluated from the raw draws of unit j.
Vector proximal_gradient(const SamplingContrasts& sc, const SamplingOptions& options) {
  const Eigen::Index n = sc.weights.size();
  const Eigen::Index d = sc.s1_draws.cols();
  const Eigen::Index L = sc.samples_per_arm;
  const double inv_n = 1.0 / static_cast<double>(n);

  auto gradient = [&](const Vector& beta) {
    const Vector f1 = sc.s1_draws * beta;
    const Vector f0 = sc.s0_draws * beta;
    Vector grad = Vector::Zero(d);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double r = (sc.h1_draws.segment(j * L, L) - f1.segment(j * L, L)).mean() -
                       (sc.h0_draws.segment(j * L, L) - f0.segment(j * L, L)).mean();
      const Vector dj = (sc.s1_draws.middleRows(j * L, L).colwise().mean() -
                         sc.s0_draws.middleRows(j * L, L).colwise().mean()).transpose();
      grad -= inv_n * sc.weights(j) * r * dj;
    }
    return grad;
  };

  // Lipschitz constant of the smooth part: largest eigenvalue of (1/n) D'WD.
  const Matrix gram = inv_n * sc.d.transpose() * sc.weights.asDiagonal() * sc.d;
  const double lip = Eigen::SelfAdjointEigenSolver<Matrix>(gram, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  const double step = 1.0 / lip;

  Vector beta = Vector::Zero(d), y = beta;
  double momentum = 1.0;
  for (int it = 0; it < options.max_iterations; ++it) {
    Vector next = y - step * gradient(y);
    for (Eigen::Index k = 0; k < d; ++k) next(k) = soft(next(k), step * options.lambda);
    const double change = (next - beta).cwiseAbs().maxCoeff();
    // Restart the momentum when it points uphill.
    if ((y - next).dot(next - beta) > 0.0) momentum = 1.0;
    const double m_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    y = next + ((momentum - 1.0) / m_next) * (next - beta);
    beta = std::move(next);
    momentum = m_next;
    if (change < options.tolerance) break;
  }
  return beta;
}

}  // namespace

Vector solve_sampling_objective(const SamplingContrasts& contrasts, const SamplingOptions& options) {
  if (!(options.lambda >= 0.0)) throw Error(Errc::ConfigError, "lambda must be nonnegative");
  if (contrasts.d.rows() == 0) throw Error(Errc::TooFewSamples, "no sampled units");
  if (contrasts.d.cwiseAbs().maxCoeff() <= 1e-10) {
    throw Error(Errc::DegenerateContrasts, "sampled surrogate contrasts vanish for every unit");
  }
  if (options.solver == SamplingOptions::Solver::gradient) return proximal_gradient(contrasts, options);
  LinearFitOptions lo;
  lo.l1_strength = options.lambda;
  lo.fit_intercept = false;
  lo.tolerance = 1e-12;
  lo.max_sweeps = 100000;
  return fit_linear(contrasts.d, contrasts.c, contrasts.weights, lo).coefficients;
}

SurrogateModel fit_surrogate_sampling(const Cohort& treatment_data, const Cohort& outcome_data,
                                      const NuisanceBundle& bundle, const SamplingOptions& options,
                                      const RandomSource& rng) {
  const SamplingContrasts sc =
      sampling_contrasts(treatment_data, bundle, rng, options.ratio ? &*options.ratio : nullptr);
  SurrogateModel f;
  f.form = SurrogateModel::Form::linear;
  f.input_dim = treatment_data.d();
  f.linear.coefficients = solve_sampling_objective(sc, options);
  f.linear.intercept = 0.0;
  if (options.calibrate) f = calibrate_surrogate(f, outcome_data, &bundle.index());
  return f;
}

double estimate_sampling_risk(const SurrogateModel& f, const SamplingContrasts& contrasts) {
  const Eigen::Index n = contrasts.c.size();
  const Eigen::Index L = contrasts.samples_per_arm;
  if (n == 0) return 0.0;
  const Vector f1 = f.predict(contrasts.s1_draws);
  const Vector f0 = f.predict(contrasts.s0_draws);
  double total = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double r = contrasts.c(j) - (f1.segment(j * L, L).mean() - f0.segment(j * L, L).mean());
    total += contrasts.weights(j) * r * r;
  }
  return total / static_cast<double>(n);
}

SurrogateModel calibrate_surrogate(const SurrogateModel& f, const Cohort& outcome_data, const SurrogateIndex* h_hat,
                                   bool variance_match) {
  const Vector target = h_hat ? h_hat->predict(outcome_data.x, outcome_data.s) : require_y(outcome_data);
  SurrogateModel out = f;
  if (variance_match) {
    const Vector raw = f.raw_predict(outcome_data.s);
    const double sd_raw = std::sqrt((raw.array() - raw.mean()).square().mean());
    const double sd_target = std::sqrt((target.array() - target.mean()).square().mean());
    if (sd_raw > 0.0) out.scale = sd_target / sd_raw;
    out.offset = mean_of(target) - out.scale * mean_of(raw);
    return out;
  }
  out.offset = f.offset + mean_of(target) - mean_of(f.predict(outcome_data.s));
  return out;
}

}  // namespace surro
