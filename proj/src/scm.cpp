#include "surro/scm.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

#include "surro/models/logistic.hpp"

namespace surro {

std::string to_string(CaseId c) {
  static const char* names[] = {"a", "b", "c", "d", "e", "f"};
  return names[static_cast<int>(c)];
}

CaseId parse_case(const std::string& s) {
  if (s.size() == 1 && s[0] >= 'a' && s[0] <= 'f') return static_cast<CaseId>(s[0] - 'a');
  throw Error(Errc::ConfigError, "unknown scenario case '" + s + "'");
}

std::string to_string(Nonlinearity n) { return n == Nonlinearity::linear ? "linear" : "square"; }

Nonlinearity parse_nonlinearity(const std::string& s) {
  if (s == "linear") return Nonlinearity::linear;
  if (s == "square") return Nonlinearity::square;
  throw Error(Errc::ConfigError, "unknown nonlinearity '" + s + "'");
}

namespace {

std::string short_number(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Columns uniform on the sphere of the given radius.
Matrix sphere_columns(Eigen::Index k, Eigen::Index cols, double radius, RandomSource& rng) {
  Matrix m(k, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < k; ++i) m(i, j) = rng.normal();
    m.col(j) *= radius / m.col(j).norm();
  }
  return m;
}

Vector normal_vector(Eigen::Index size, double mean, double sd, RandomSource& rng) {
  Vector v(size);
  for (Eigen::Index i = 0; i < size; ++i) v(i) = rng.normal(mean, sd);
  return v;
}

double phi_sum(Nonlinearity nl, const Eigen::Ref<const Vector>& z) {
  return nl == Nonlinearity::linear ? z.sum() : z.squaredNorm();
}

}  // namespace

std::string ScenarioSpec::label() const {
  std::string out = to_string(case_id) + "-" + to_string(nonlinearity) + "-k" + std::to_string(x_dim);
  if (unobserved_confounder) out += "-U";
  if (scale.med != 1.0) out += "-med" + short_number(scale.med);
  if (scale.leaf != 1.0) out += "-leaf" + short_number(scale.leaf);
  if (scale.proxy != 1.0) out += "-proxy" + short_number(scale.proxy);
  return out;
}

ScenarioParams sample_scenario_params(const ScenarioSpec& spec, RandomSource rng) {
  if (spec.x_dim < 1 || spec.d_med < 1 || spec.d_leaf < 0 || spec.d_proxy < 0) {
    throw Error(Errc::ConfigError, "scenario dimensions must be positive");
  }
  const Eigen::Index k = spec.x_dim;
  ScenarioParams p;
  p.spec = spec;
  p.w_xt = Vector::Zero(k);
  p.w_xt(0) = 0.8;
  if (k > 1) p.w_xt(1) = -0.6;
  p.b_t = -0.1;

  // Fixed draw order; case-specific zeroing happens afterwards so that the
  // shared blocks agree across cases for the same seed.
  p.w_xs0 = sphere_columns(k, spec.d_med, kRadiusMed * spec.scale.med, rng);
  p.w_xs1 = sphere_columns(k, spec.d_leaf, kRadiusLeaf * spec.scale.leaf, rng);
  p.w_xs2 = sphere_columns(k, spec.d_proxy, kRadiusProxy * spec.scale.proxy, rng);
  p.b_s0 = normal_vector(spec.d_med, 0.6, 0.5, rng);
  p.b_s1 = normal_vector(spec.d_leaf, 0.6, 0.5, rng);
  p.b_s2 = normal_vector(spec.d_proxy, 0.6, 0.5, rng);
  p.b_y = rng.normal(0.6, 0.5);
  p.w_xy = sphere_columns(k, 1, 1.0, rng).col(0);
  p.w_xm = sphere_columns(k, spec.d_med, kRadiusMed * spec.scale.med, rng);
  p.b_m = normal_vector(spec.d_med, 0.6, 0.5, rng);

  p.confounder_coef = spec.unobserved_confounder ? 1.0 : 0.0;
  switch (spec.case_id) {
    case CaseId::a:
      p.w_xy.setZero();
      break;
    case CaseId::b:
      p.w_xs0.setZero();
      p.w_xs1.setZero();
      p.w_xs2.setZero();
      break;
    case CaseId::c:
    case CaseId::d:
      break;
    case CaseId::e:
      p.direct_effect = 1.0;
      break;
    case CaseId::f:
      p.w_xs0.setZero();
      p.b_s0.setZero();
      break;
  }
  if (spec.case_id != CaseId::f) {
    p.w_xm.setZero();
    p.b_m.setZero();
  }
  return p;
}

ScenarioParams sample_scenario_params(const ScenarioSpec& spec) {
  return sample_scenario_params(spec, make_rng(spec.seed, 0));
}

std::pair<Cohort, ScenarioTruth> generate_cohort(const ScenarioParams& params, Eigen::Index n, Regime regime,
                                                 const RandomSource& rng) {
  if (n < 1) throw Error(Errc::EmptyCohort, "generate_cohort needs n >= 1");
  const ScenarioSpec& spec = params.spec;
  const Eigen::Index k = spec.x_dim;
  const Eigen::Index dm = spec.d_med, dl = spec.d_leaf, dp = spec.d_proxy;
  const Eigen::Index d = dm + dl + dp;
  const bool latent = spec.case_id == CaseId::f;
  const bool null_effect = spec.case_id == CaseId::c;
  const double cu = params.confounder_coef;

  Cohort c;
  c.n = static_cast<std::size_t>(n);
  c.x.resize(n, k);
  c.s.resize(n, d);
  c.t = IntVector(n);
  c.y = Vector(n);
  c.population = regime == Regime::observational ? PopulationTag::observational : PopulationTag::experimental;
  for (Eigen::Index j = 0; j < k; ++j) c.x_names.push_back(std::to_string(j));
  for (Eigen::Index j = 0; j < dm; ++j) c.s_names.push_back("med" + std::to_string(j));
  for (Eigen::Index j = 0; j < dl; ++j) c.s_names.push_back("leaf" + std::to_string(j));
  for (Eigen::Index j = 0; j < dp; ++j) c.s_names.push_back("proxy" + std::to_string(j));

  ScenarioTruth truth;
  truth.s0.resize(n, d);
  truth.s1.resize(n, d);
  truth.y0.resize(n);
  truth.y1.resize(n);
  truth.cate.resize(n);

  Vector x(k), e0(dm), e1(dl), e2(dp), em(dm);
  for (Eigen::Index i = 0; i < n; ++i) {
    RandomSource r = rng.substream(static_cast<std::uint64_t>(i));
    for (Eigen::Index j = 0; j < k; ++j) x(j) = r.normal();
    const double u = r.normal();
    const double eps_t = r.normal();
    const double ut = r.uniform();
    for (Eigen::Index j = 0; j < dm; ++j) e0(j) = r.normal();
    for (Eigen::Index j = 0; j < dl; ++j) e1(j) = r.normal();
    for (Eigen::Index j = 0; j < dp; ++j) e2(j) = r.normal();
    for (Eigen::Index j = 0; j < dm; ++j) em(j) = r.normal();
    const double ey = r.normal();

    const double p_treat =
        regime == Regime::observational ? sigmoid(params.w_xt.dot(x) + params.b_t + eps_t + cu * u) : 0.5;
    const int t = ut < p_treat ? 1 : 0;

    // Arm-free parts.
    const Vector a_med = latent ? Vector(params.w_xm.transpose() * x + params.b_m)
                                : Vector(params.w_xs0.transpose() * x + params.b_s0);
    const Vector a_leaf = params.w_xs1.transpose() * x + params.b_s1;
    const Vector proxy = (params.w_xs2.transpose() * x + params.b_s2).array() + cu * u + e2.array();
    const double y_base = params.b_y + params.w_xy.dot(x) + cu * u + ey;

    for (int arm = 0; arm <= 1; ++arm) {
      // Mediating block (the latent M in case f): mu = a (1 + t) + U + noise.
      const Vector mediator = (a_med * (1.0 + arm)).array() + cu * u + (latent ? em : e0).array();
      const Vector med = latent ? Vector(mediator + e0) : mediator;
      const Vector leaf = (a_leaf * (1.0 + arm)).array() + cu * u + e1.array();
      double y = y_base;
      if (!null_effect) {
        y += phi_sum(spec.nonlinearity, mediator) + phi_sum(spec.nonlinearity, proxy) + params.direct_effect * arm;
      }
      auto& s_arm = arm == 0 ? truth.s0 : truth.s1;
      s_arm.row(i).segment(0, dm) = med.transpose();
      s_arm.row(i).segment(dm, dl) = leaf.transpose();
      s_arm.row(i).segment(dm + dl, dp) = proxy.transpose();
      (arm == 0 ? truth.y0 : truth.y1)(i) = y;
    }

    double cate = 0.0;
    if (!null_effect) {
      // mu_1 = 2 a, mu_0 = a; noise variances cancel between arms.
      cate = spec.nonlinearity == Nonlinearity::linear ? a_med.sum() : 3.0 * a_med.squaredNorm();
      cate += params.direct_effect;
    }
    truth.cate(i) = cate;

    c.x.row(i) = x.transpose();
    (*c.t)(i) = t;
    c.s.row(i) = t ? truth.s1.row(i) : truth.s0.row(i);
    (*c.y)(i) = t ? truth.y1(i) : truth.y0(i);
  }
  truth.ate = (truth.y1 - truth.y0).mean();

  if (!null_effect) {
    const Matrix& w = latent ? params.w_xm : params.w_xs0;
    const Vector& b = latent ? params.b_m : params.b_s0;
    double pop = 0.0;
    for (Eigen::Index j = 0; j < dm; ++j) {
      pop += spec.nonlinearity == Nonlinearity::linear ? b(j) : 3.0 * (b(j) * b(j) + w.col(j).squaredNorm());
    }
    truth.population_ate = pop + params.direct_effect;
  }
  return {std::move(c), std::move(truth)};
}

std::pair<Cohort, ScenarioTruth> appendix_e1_scenario(Eigen::Index n, const RandomSource& rng, double x_to_y) {
  if (n < 1) throw Error(Errc::EmptyCohort, "appendix_e1_scenario needs n >= 1");
  Cohort c;
  c.n = static_cast<std::size_t>(n);
  c.x.resize(n, 1);
  c.s.resize(n, 1);
  c.t = IntVector(n);
  c.y = Vector(n);
  c.population = PopulationTag::experimental;
  c.x_names = {"0"};
  c.s_names = {"0"};
  ScenarioTruth truth;
  truth.s0.resize(n, 1);
  truth.s1.resize(n, 1);
  truth.y0.resize(n);
  truth.y1.resize(n);
  truth.cate.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    RandomSource r = rng.substream(static_cast<std::uint64_t>(i));
    const double x = r.normal();
    const double ut = r.uniform();
    const double es = r.normal();
    const double ey = r.normal();
    const int t = ut < 0.5 ? 1 : 0;
    truth.s0(i, 0) = es;
    truth.s1(i, 0) = x + 1.0 + es;
    truth.y0(i) = x_to_y * x + truth.s0(i, 0) + ey;
    truth.y1(i) = x_to_y * x + truth.s1(i, 0) + ey;
    truth.cate(i) = x + 1.0;
    c.x(i, 0) = x;
    (*c.t)(i) = t;
    c.s(i, 0) = t ? truth.s1(i, 0) : truth.s0(i, 0);
    (*c.y)(i) = t ? truth.y1(i) : truth.y0(i);
  }
  // E[X] = 0, so the effect is 1 by construction rather than a sample mean.
  truth.ate = 1.0;
  truth.population_ate = 1.0;
  return {std::move(c), std::move(truth)};
}

std::vector<ScenarioSpec> scenario_suite(SuiteFamily family, const std::vector<std::uint64_t>& seeds,
                                         const std::vector<CaseId>& cases) {
  struct Variant {
    bool u;
    ScaleOverrides scale;
  };
  const Variant variants[] = {
      {false, {1.0, 1.0, 1.0}}, {true, {1.0, 1.0, 1.0}},  {false, {2.0, 1.0, 1.0}},
      {false, {1.0, 1.0, 2.0}}, {false, {0.5, 1.0, 0.5}},
  };
  std::vector<ScenarioSpec> lattice;
  for (CaseId c : cases) {
    for (Nonlinearity nl : {Nonlinearity::linear, Nonlinearity::square}) {
      if (family == SuiteFamily::linear && nl != Nonlinearity::linear) continue;
      for (const auto& v : variants) {
        ScenarioSpec s;
        s.case_id = c;
        s.nonlinearity = nl;
        s.unobserved_confounder = v.u;
        s.scale = v.scale;
        lattice.push_back(s);
      }
    }
  }
  if (seeds.empty()) return lattice;
  std::vector<ScenarioSpec> out;
  out.reserve(lattice.size() * seeds.size());
  for (const auto& s : lattice) {
    for (std::uint64_t seed : seeds) {
      ScenarioSpec copy = s;
      copy.seed = seed;
      out.push_back(copy);
    }
  }
  return out;
}

std::pair<Cohort, ScenarioTruth> ihdp_shaped_cohort(const IhdpShapeOptions& options, const RandomSource& rng) {
  const Eigen::Index n = options.n;
  if (n < 1) throw Error(Errc::EmptyCohort, "ihdp_shaped_cohort needs n >= 1");
  const std::vector<std::string> x_names = {
      "Birth_weight_gm_baseline",    "Infant_sex_baseline",
      "Maternal_age_birth_baseline", "Maternal_education_baseline",
      "BLACK",                       "HISPANIC",
      "Analysis_gestational_age_weeks_baseline", "Head_circ_birth_cm_baseline"};
  const std::vector<std::string> s_names = {"Bayley_MDI_12m",    "Bayley_PDI_12m",    "Bayley_MDI_24m",
                                            "Bayley_PDI_24m",    "Infant_weight_24m", "Infant_length_24m",
                                            "BMI_24m"};
  const Eigen::Index k = 8, d = 7;

  // Surrogate response: base + A' z + tau T + noise, z = standardized covariates.
  const Vector base = (Vector(d) << 95.0, 92.0, 90.0, 88.0, 11.5, 85.0, 15.5).finished();
  const Vector noise_sd = (Vector(d) << 12.0, 13.0, 14.0, 13.0, 1.4, 3.5, 1.3).finished();
  Vector tau = (Vector(d) << 5.0, 2.5, 7.0, 1.5, 0.15, 0.6, 0.0).finished();
  const Vector beta = (Vector(d) << 0.15, 0.05, 0.45, 0.1, 0.0, 0.4, 0.0).finished();
  tau *= options.planted_ate / beta.dot(tau);
  Matrix a = Matrix::Zero(k, d);
  a.row(0) << 3.0, 3.5, 3.0, 4.0, 0.6, 1.8, 0.3;   // birth weight
  a.row(3) << 2.5, 1.0, 3.5, 1.0, 0.0, 0.2, 0.0;   // maternal education
  a.row(4) << -2.0, -1.0, -3.0, -1.5, 0.0, 0.0, 0.1;
  a.row(6) << 2.0, 2.5, 1.5, 2.0, 0.3, 1.0, 0.1;   // gestational age
  Vector gamma = Vector::Zero(k);
  gamma << 1.5, -0.5, 0.8, 3.0, -2.5, -0.5, 1.0, 0.5;

  Cohort c;
  c.n = static_cast<std::size_t>(n);
  c.x.resize(n, k);
  c.s.resize(n, d);
  c.t = IntVector(n);
  c.y = Vector(n);
  c.population = PopulationTag::experimental;
  c.x_names = x_names;
  c.s_names = s_names;
  ScenarioTruth truth;
  truth.s0.resize(n, d);
  truth.s1.resize(n, d);
  truth.y0.resize(n);
  truth.y1.resize(n);
  truth.cate = Vector::Constant(n, options.planted_ate);

  Vector z(k), raw(k), e(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    RandomSource r = rng.substream(static_cast<std::uint64_t>(i));
    z(0) = r.normal();
    raw(0) = std::clamp(std::round(1800.0 + 450.0 * z(0)), 700.0, 2500.0);
    raw(1) = r.bernoulli(0.5) ? 2.0 : 1.0;
    z(1) = raw(1) - 1.5;
    z(2) = r.normal();
    raw(2) = std::round(std::clamp(25.0 + 6.0 * z(2), 13.0, 45.0));
    raw(3) = static_cast<double>(1 + r.uniform_index(5));
    z(3) = (raw(3) - 3.0) / 1.4;
    const double race = r.uniform();
    raw(4) = race < 0.52 ? 1.0 : 0.0;
    raw(5) = race >= 0.52 && race < 0.63 ? 1.0 : 0.0;
    z(4) = raw(4) - 0.52;
    z(5) = raw(5) - 0.11;
    z(6) = 0.7 * z(0) + std::sqrt(1.0 - 0.49) * r.normal();
    raw(6) = std::round(33.0 + 2.5 * z(6));
    z(7) = 0.6 * z(0) + 0.8 * r.normal();
    raw(7) = std::round(10.0 * (29.0 + 2.0 * z(7))) / 10.0;
    const int t = r.bernoulli(options.treated_fraction) ? 1 : 0;
    for (Eigen::Index j = 0; j < d; ++j) e(j) = noise_sd(j) * r.normal();
    const double ey = 7.0 * r.normal();

    const Vector s0 = base + a.transpose() * z + e;
    const Vector s1 = s0 + tau;
    const double y_base = 20.0 + gamma.dot(z) + ey;
    truth.s0.row(i) = s0.transpose();
    truth.s1.row(i) = s1.transpose();
    truth.y0(i) = y_base + beta.dot(s0);
    truth.y1(i) = y_base + beta.dot(s1);
    c.x.row(i) = raw.transpose();
    (*c.t)(i) = t;
    c.s.row(i) = t ? s1.transpose() : s0.transpose();
    (*c.y)(i) = t ? truth.y1(i) : truth.y0(i);
  }
  truth.ate = (truth.y1 - truth.y0).mean();
  truth.population_ate = options.planted_ate;
  return {std::move(c), std::move(truth)};
}

void write_truth_csv(std::ostream& out, const ScenarioTruth& truth, const std::vector<std::string>& s_names) {
  const Eigen::Index d = truth.s0.cols();
  auto name = [&](Eigen::Index j) {
    return j < static_cast<Eigen::Index>(s_names.size()) ? s_names[static_cast<std::size_t>(j)] : std::to_string(j);
  };
  auto num = [](double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  };
  for (Eigen::Index j = 0; j < d; ++j) out << "s0_" << name(j) << ',';
  for (Eigen::Index j = 0; j < d; ++j) out << "s1_" << name(j) << ',';
  out << "y0,y1,cate\n";
  for (Eigen::Index i = 0; i < truth.y0.size(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) out << num(truth.s0(i, j)) << ',';
    for (Eigen::Index j = 0; j < d; ++j) out << num(truth.s1(i, j)) << ',';
    out << num(truth.y0(i)) << ',' << num(truth.y1(i)) << ',' << num(truth.cate(i)) << '\n';
  }
}

}  // namespace surro
