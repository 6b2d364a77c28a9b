#include "surro/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "surro/models/linear.hpp"

namespace surro {

using nlohmann::json;

Matrix DiscreteSCM::p_s() const {
  Matrix out = p_s0;
  for (Eigen::Index i = 0; i < nx(); ++i) out.row(i) = (1.0 - p_t1(i)) * p_s0.row(i) + p_t1(i) * p_s1.row(i);
  return out;
}

Matrix DiscreteSCM::pi() const { return p_s1 - p_s0; }

Matrix DiscreteSCM::rho() const {
  const Matrix marg = p_s();
  Matrix out(nx(), ns());
  for (Eigen::Index i = 0; i < nx(); ++i) {
    for (Eigen::Index j = 0; j < ns(); ++j) {
      out(i, j) = marg(i, j) > 0.0 ? p_t1(i) * p_s1(i, j) / marg(i, j) : 0.5;
    }
  }
  return out;
}

Matrix DiscreteSCM::h_observed() const {
  if (!h_t) return h;
  const Matrix r = rho();
  return (1.0 - r.array()) * (*h_t)[0].array() + r.array() * (*h_t)[1].array();
}

Vector DiscreteSCM::ratio() const { return density_ratio ? *density_ratio : Vector::Ones(nx()); }

void validate_discrete_scm(const DiscreteSCM& m) {
  const Eigen::Index nx = m.nx(), ns = m.ns();
  if (nx < 1 || ns < 1) throw Error(Errc::ShapeMismatch, "empty support");
  auto shape = [&](const Matrix& t, const char* name) {
    if (t.rows() != nx || t.cols() != ns) throw Error(Errc::ShapeMismatch, std::string(name) + " must be nx x ns");
  };
  if (m.p_x.size() != nx || m.p_t1.size() != nx) throw Error(Errc::ShapeMismatch, "p_x and p_t1 must have nx entries");
  shape(m.p_s0, "p_s0");
  shape(m.p_s1, "p_s1");
  if (m.h_t) {
    shape((*m.h_t)[0], "h_t[0]");
    shape((*m.h_t)[1], "h_t[1]");
  } else {
    shape(m.h, "h");
  }
  if (m.density_ratio && m.density_ratio->size() != nx) throw Error(Errc::ShapeMismatch, "density_ratio length");
  if (m.gamma && m.gamma->size() != m.x_support.cols()) throw Error(Errc::ShapeMismatch, "gamma length");
  if ((m.p_x.array() < 0.0).any() || std::abs(m.p_x.sum() - 1.0) > 1e-12) {
    throw Error(Errc::DomainMismatch, "p(x) must be a distribution");
  }
  for (const Matrix* t : {&m.p_s0, &m.p_s1}) {
    for (Eigen::Index i = 0; i < nx; ++i) {
      if ((t->row(i).array() < 0.0).any() || std::abs(t->row(i).sum() - 1.0) > 1e-12) {
        throw Error(Errc::DomainMismatch, "p(s | x, t) row " + std::to_string(i) + " is not a distribution");
      }
    }
  }
  for (Eigen::Index i = 0; i < nx; ++i) {
    if (m.p_x(i) > 0.0 && !(m.p_t1(i) > 0.0 && m.p_t1(i) < 1.0)) {
      throw Error(Errc::PositivityViolation, "p(T=1 | x) must lie in (0, 1) at x " + std::to_string(i));
    }
  }
}

ExactEffects exact_effects(const DiscreteSCM& m) {
  validate_discrete_scm(m);
  const Matrix& h0 = m.h_t ? (*m.h_t)[0] : m.h;
  const Matrix& h1 = m.h_t ? (*m.h_t)[1] : m.h;
  ExactEffects out;
  out.tau_y_of_x = (m.p_s1.cwiseProduct(h1) - m.p_s0.cwiseProduct(h0)).rowwise().sum();
  out.tau_s_of_x = m.pi() * m.s_support;
  out.tau_y = m.p_x.dot(out.tau_y_of_x);
  return out;
}

std::string to_string(WeightKind k) {
  switch (k) {
    case WeightKind::w2: return "w2";
    case WeightKind::wplus: return "wplus";
    case WeightKind::w1: return "w1";
    case WeightKind::wminus: return "wminus";
    case WeightKind::px_over_pxs: return "px_over_pxs";
    case WeightKind::uniform: return "uniform";
  }
  return "unknown";
}

Matrix weight_table(const DiscreteSCM& m, const WeightScheme& scheme) {
  validate_discrete_scm(m);
  const Matrix marg = m.p_s();
  const Matrix r = m.rho();
  const Vector ps = marg.transpose() * m.p_x;  // p(s)
  Matrix w(m.nx(), m.ns());
  for (Eigen::Index i = 0; i < m.nx(); ++i) {
    double e = m.p_t1(i);
    if (scheme.clip) e = std::clamp(e, scheme.clip->first, scheme.clip->second);
    for (Eigen::Index j = 0; j < m.ns(); ++j) {
      double rho = r(i, j);
      if (scheme.clip) rho = std::clamp(rho, scheme.clip->first, scheme.clip->second);
      const double eta = rho / e - (1.0 - rho) / (1.0 - e);
      switch (scheme.kind) {
        case WeightKind::w2: w(i, j) = eta * eta; break;
        case WeightKind::wplus: w(i, j) = rho / e + (1.0 - rho) / (1.0 - e); break;
        case WeightKind::w1: w(i, j) = std::abs(eta); break;
        case WeightKind::wminus: w(i, j) = eta; break;
        case WeightKind::px_over_pxs: w(i, j) = marg(i, j) > 0.0 ? ps(j) / marg(i, j) : 0.0; break;
        case WeightKind::uniform: w(i, j) = 1.0; break;
      }
    }
  }
  return w;
}

namespace {

// Joint mass p(x) p(s | x).
Matrix joint_mass(const DiscreteSCM& m) { return m.p_s().array().colwise() * m.p_x.array(); }

}  // namespace

Vector exact_weighted_minimizer(const DiscreteSCM& m, const WeightScheme& scheme) {
  const Matrix w = weight_table(m, scheme);
  const Matrix mass = joint_mass(m);
  const Matrix h = m.h_observed();
  Vector f = Vector::Zero(m.ns());
  for (Eigen::Index j = 0; j < m.ns(); ++j) {
    if (!(mass.col(j).sum() > 0.0)) continue;
    const double den = w.col(j).dot(mass.col(j));
    const double scale = w.col(j).cwiseAbs().dot(mass.col(j));
    if (!(std::abs(den) > 1e-14 * scale) || den == 0.0) {
      throw Error(Errc::ZeroDenominator, "weights " + to_string(scheme.kind) + " vanish at s " + std::to_string(j));
    }
    f(j) = w.col(j).cwiseProduct(mass.col(j)).dot(h.col(j)) / den;
  }
  return f;
}

Vector exact_t_weighted_minimizer(const DiscreteSCM& m) {
  validate_discrete_scm(m);
  const Matrix& h0 = m.h_t ? (*m.h_t)[0] : m.h;
  const Matrix& h1 = m.h_t ? (*m.h_t)[1] : m.h;
  const Vector num = (m.p_s1.cwiseProduct(h1) - m.p_s0.cwiseProduct(h0)).transpose() * m.p_x;
  const Vector den = m.pi().transpose() * m.p_x;
  Vector f(m.ns());
  for (Eigen::Index j = 0; j < m.ns(); ++j) {
    if (den(j) == 0.0) throw Error(Errc::ZeroDenominator, "sum_x p(x) pi(x, s) vanishes at s " + std::to_string(j));
    f(j) = num(j) / den(j);
  }
  return f;
}

Vector outcome_regression_table(const DiscreteSCM& m) {
  WeightScheme uniform;
  uniform.kind = WeightKind::uniform;
  return exact_weighted_minimizer(m, uniform);
}

double surrogate_ate(const DiscreteSCM& m, const Vector& f) {
  validate_discrete_scm(m);
  if (f.size() != m.ns()) throw Error(Errc::DomainMismatch, "surrogate table must have ns entries");
  return m.p_x.dot(m.pi() * f);
}

namespace {

Vector cate_gap(const DiscreteSCM& m, const Vector& f) {
  if (f.size() != m.ns()) throw Error(Errc::DomainMismatch, "surrogate table must have ns entries");
  const ExactEffects eff = exact_effects(m);
  return eff.tau_y_of_x - m.pi() * f;
}

}  // namespace

double exact_risk(const DiscreteSCM& m, const Vector& f) {
  const Vector gap = cate_gap(m, f);
  return (m.ratio().array() * m.p_x.array() * gap.array().square()).sum();
}

double exact_l1_risk(const DiscreteSCM& m, const Vector& f) {
  const Vector gap = cate_gap(m, f);
  return (m.ratio().array() * m.p_x.array() * gap.array().abs()).sum();
}

double risk_bound(const DiscreteSCM& m, const Vector& f, WeightKind scheme) {
  if (scheme != WeightKind::w2 && scheme != WeightKind::wplus && scheme != WeightKind::w1) {
    throw Error(Errc::ConfigError, "risk_bound supports w2, wplus and w1");
  }
  if (f.size() != m.ns()) throw Error(Errc::DomainMismatch, "surrogate table must have ns entries");
  WeightScheme ws;
  ws.kind = scheme;
  const Matrix w = weight_table(m, ws);
  const Matrix mass = joint_mass(m);
  const Matrix diff = m.h_observed().rowwise() - f.transpose();
  const Matrix loss = scheme == WeightKind::w1 ? Matrix(diff.cwiseAbs()) : Matrix(diff.cwiseAbs2());
  const Matrix cell = w.cwiseProduct(mass).cwiseProduct(loss);
  return m.ratio().dot(cell.rowwise().sum());
}

bool CaseReport::all_pass() const {
  return std::all_of(claims.begin(), claims.end(), [](const CaseClaim& c) { return c.informational || c.pass; });
}

namespace {

bool rows_equal(const Matrix& t, double tol) {
  for (Eigen::Index i = 1; i < t.rows(); ++i) {
    if ((t.row(i) - t.row(0)).cwiseAbs().maxCoeff() > tol) return false;
  }
  return true;
}

bool cols_equal(const Matrix& t, double tol) {
  for (Eigen::Index j = 1; j < t.cols(); ++j) {
    if ((t.col(j) - t.col(0)).cwiseAbs().maxCoeff() > tol) return false;
  }
  return true;
}

}  // namespace

CaseReport check_case_properties(CaseId case_id, const DiscreteSCM& m, double tolerance) {
  validate_discrete_scm(m);
  constexpr double structural = 1e-12;
  auto mismatch = [&](const std::string& why) {
    throw Error(Errc::CaseMismatch, "model is not a case " + to_string(case_id) + " model: " + why);
  };
  if (case_id != CaseId::e && m.h_t) mismatch("E[Y | x, s] depends on t");
  switch (case_id) {
    case CaseId::a:
      if (!rows_equal(m.h, structural)) mismatch("h depends on x");
      break;
    case CaseId::b:
      if (!rows_equal(m.p_s0, structural) || !rows_equal(m.p_s1, structural)) mismatch("S depends on X given T");
      break;
    case CaseId::c:
      if (!cols_equal(m.h, structural)) mismatch("h depends on s");
      break;
    case CaseId::d:
      break;
    case CaseId::e:
      if (!m.h_t) mismatch("no t-dependent outcome table");
      break;
    case CaseId::f:
      mismatch("no exact identities are checked for case f");
  }

  CaseReport report;
  report.case_id = case_id;
  const double tau_y = exact_effects(m).tau_y;
  auto add = [&](std::string claim, double lhs, double rhs, bool informational = false) {
    report.claims.push_back({std::move(claim), lhs, rhs, std::abs(lhs - rhs) <= tolerance, informational});
  };
  auto minimizer_ate = [&](WeightKind kind) {
    WeightScheme s;
    s.kind = kind;
    return surrogate_ate(m, exact_weighted_minimizer(m, s));
  };

  switch (case_id) {
    case CaseId::a: {
      const Vector g = outcome_regression_table(m);
      add("risk of E[Y|S] is zero", exact_risk(m, g), 0.0);
      WeightScheme plus;
      plus.kind = WeightKind::wplus;
      add("wplus-weighted minimizer equals E[Y|S]", (exact_weighted_minimizer(m, plus) - g).cwiseAbs().maxCoeff(), 0.0);
      break;
    }
    case CaseId::b:
      add("wplus surrogate ATE equals tau_Y", minimizer_ate(WeightKind::wplus), tau_y);
      add("w1 surrogate ATE equals tau_Y", minimizer_ate(WeightKind::w1), tau_y);
      add("p(x)/p(x|s) surrogate ATE equals tau_Y", minimizer_ate(WeightKind::px_over_pxs), tau_y);
      try {
        add("w2 surrogate ATE versus tau_Y", minimizer_ate(WeightKind::w2), tau_y, true);
      } catch (const Error&) {
      }
      break;
    case CaseId::c:
      add("constant surrogate has zero risk", exact_risk(m, Vector::Zero(m.ns())), 0.0);
      add("tau_Y is zero", tau_y, 0.0);
      break;
    case CaseId::d: {
      add("wminus surrogate ATE equals tau_Y", minimizer_ate(WeightKind::wminus), tau_y);
      WeightScheme minus;
      minus.kind = WeightKind::wminus;
      const Matrix w = weight_table(m, minus);
      const Matrix mass = joint_mass(m);
      double lowest = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
          if (mass(i, j) > 0.0) lowest = std::min(lowest, w(i, j));
        }
      }
      add("smallest wminus weight", lowest, 0.0, true);
      break;
    }
    case CaseId::e:
      add("t-weighted surrogate ATE equals tau_Y", surrogate_ate(m, exact_t_weighted_minimizer(m)), tau_y);
      break;
    case CaseId::f:
      break;
  }
  return report;
}

double linear_risk(const Vector& beta_h, const Vector& beta_f, const Matrix& tau_s_samples, const Vector& weights) {
  if (beta_h.size() != beta_f.size() || tau_s_samples.cols() != beta_h.size() ||
      weights.size() != tau_s_samples.rows()) {
    throw Error(Errc::DimensionMismatch, "linear_risk arguments disagree in dimension");
  }
  if (tau_s_samples.rows() == 0) return 0.0;
  const Vector proj = tau_s_samples * (beta_h - beta_f);
  return weights.dot(proj.cwiseAbs2()) / static_cast<double>(tau_s_samples.rows());
}

AteMatching ate_matching_surrogate(double tau_y, const Vector& deltas, double threshold) {
  AteMatching out;
  double best = -1.0;
  for (Eigen::Index j = 0; j < deltas.size(); ++j) {
    if (std::abs(deltas(j)) > best) {
      best = std::abs(deltas(j));
      out.column = j;
    }
  }
  if (deltas.size() == 0 || best < threshold) {
    throw Error(Errc::NoAffectedSurrogate, "no surrogate column has a weighted contrast above the threshold");
  }
  out.alpha = tau_y / deltas(out.column);
  return out;
}

Vector ate_matching_contrasts(const DiscreteSCM& m) {
  validate_discrete_scm(m);
  const double p1 = m.p_x.dot(m.p_t1);
  const double p0 = 1.0 - p1;
  const Matrix mean1 = m.p_s1 * m.s_support;  // E[S | x, T=1]
  const Matrix mean0 = m.p_s0 * m.s_support;
  Vector delta = Vector::Zero(m.s_support.cols());
  for (Eigen::Index i = 0; i < m.nx(); ++i) {
    const double e = m.p_t1(i);
    // p(x | T=t) w_t(x)
    const double a1 = m.p_x(i) * e / p1 * (p1 / e);
    const double a0 = m.p_x(i) * (1.0 - e) / p0 * (p0 / (1.0 - e));
    delta += a1 * mean1.row(i).transpose() - a0 * mean0.row(i).transpose();
  }
  return delta;
}

OutcomeRegressionBias outcome_regression_bias(const DiscreteSCM& m) {
  if (!m.gamma) throw Error(Errc::DomainMismatch, "outcome_regression_bias needs the X->Y coefficients");
  validate_discrete_scm(m);
  OutcomeRegressionBias out;
  out.true_ate = exact_effects(m).tau_y;
  out.plugin_ate = surrogate_ate(m, outcome_regression_table(m));
  const Matrix mass = joint_mass(m);
  const Vector ps = mass.colwise().sum().transpose();
  const Vector ps1 = m.p_s1.transpose() * m.p_x;  // p(S(1) = s)
  const Vector ps0 = m.p_s0.transpose() * m.p_x;
  Vector shift = Vector::Zero(m.x_support.cols());
  for (Eigen::Index j = 0; j < m.ns(); ++j) {
    if (!(ps(j) > 0.0)) continue;
    const Vector ex_given_s = m.x_support.transpose() * mass.col(j) / ps(j);
    shift += (ps1(j) - ps0(j)) * ex_given_s;
  }
  out.bias = m.gamma->dot(shift);
  return out;
}

OutcomeRegressionBias outcome_regression_bias_mc(Eigen::Index n, const RandomSource& rng, double x_to_y) {
  const auto [cohort, truth] = appendix_e1_scenario(n, rng, x_to_y);
  const LinearModel f = fit_linear(cohort.s, *cohort.y);
  const LinearModel x_on_s = fit_linear(cohort.s, cohort.x.col(0));
  const Vector fs = f.predict(cohort.s);
  double sum1 = 0.0, sum0 = 0.0;
  Eigen::Index n1 = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if ((*cohort.t)(i) == 1) {
      sum1 += fs(i);
      ++n1;
    } else {
      sum0 += fs(i);
    }
  }
  if (n1 == 0 || n1 == n) throw Error(Errc::SingleArmData, "simulated cohort has a single arm");
  OutcomeRegressionBias out;
  out.true_ate = truth.population_ate;
  out.plugin_ate = sum1 / static_cast<double>(n1) - sum0 / static_cast<double>(n - n1);
  const double tau_s = (truth.s1 - truth.s0).mean();
  out.bias = x_to_y * x_on_s.coefficients(0) * tau_s;
  return out;
}

namespace {

Vector dirichlet_flat(Eigen::Index size, RandomSource& rng) {
  Vector v(size);
  for (Eigen::Index i = 0; i < size; ++i) v(i) = -std::log(rng.uniform_open());
  return v / v.sum();
}

Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, RandomSource& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  }
  return m;
}

}  // namespace

RandomModel random_discrete_scm(CaseId case_id, RandomSource& rng, const RandomModelOptions& o) {
  if (case_id == CaseId::f) throw Error(Errc::CaseMismatch, "no discrete generator for case f");
  if (o.nx < 1 || o.ns < 2 || o.k < 1 || o.d < 1) throw Error(Errc::ConfigError, "invalid random model sizes");
  for (int attempt = 0; attempt < 100000; ++attempt) {
    RandomModel out;
    DiscreteSCM& m = out.model;
    m.x_support = normal_matrix(o.nx, o.k, rng);
    m.p_x = dirichlet_flat(o.nx, rng);
    m.p_t1.resize(o.nx);
    for (int i = 0; i < o.nx; ++i) m.p_t1(i) = o.randomized ? 0.5 : rng.uniform();
    m.s_support = normal_matrix(o.ns, o.d, rng);
    m.p_s0.resize(o.nx, o.ns);
    m.p_s1.resize(o.nx, o.ns);
    for (int i = 0; i < o.nx; ++i) {
      if (case_id == CaseId::b && i > 0) {
        m.p_s0.row(i) = m.p_s0.row(0);
        m.p_s1.row(i) = m.p_s1.row(0);
      } else {
        m.p_s0.row(i) = dirichlet_flat(o.ns, rng).transpose();
        m.p_s1.row(i) = dirichlet_flat(o.ns, rng).transpose();
      }
    }
    // Exact row sums keep validation at machine precision.
    for (int i = 0; i < o.nx; ++i) {
      m.p_s0.row(i) /= m.p_s0.row(i).sum();
      m.p_s1.row(i) /= m.p_s1.row(i).sum();
    }
    m.p_x /= m.p_x.sum();

    Vector g = normal_matrix(o.ns, 1, rng).col(0);
    Vector hx = normal_matrix(o.nx, 1, rng).col(0);
    if (o.linear) {
      out.beta_h = normal_matrix(o.d, 1, rng).col(0);
      g = m.s_support * *out.beta_h;
    }
    if (o.additive) {
      m.gamma = normal_matrix(o.k, 1, rng).col(0);
      hx = m.x_support * *m.gamma;
    }
    switch (case_id) {
      case CaseId::a:
        m.h = Matrix::Ones(o.nx, 1) * g.transpose();
        break;
      case CaseId::c:
        m.h = hx * Matrix::Ones(1, o.ns);
        break;
      default:
        if (o.linear || o.additive) {
          m.h = hx * Matrix::Ones(1, o.ns) + Matrix::Ones(o.nx, 1) * g.transpose();
        } else {
          m.h = normal_matrix(o.nx, o.ns, rng);
        }
        break;
    }
    if (case_id == CaseId::e) {
      const double direct = rng.normal();
      m.h_t = std::array<Matrix, 2>{m.h, (m.h.array() + direct).matrix() + 0.5 * normal_matrix(o.nx, o.ns, rng)};
    }
    if (o.shifted) {
      Vector r(o.nx);
      for (int i = 0; i < o.nx; ++i) r(i) = 0.2 + rng.uniform() * 2.0;
      m.density_ratio = r / m.p_x.dot(r);
    }

    bool ok = true;
    for (int i = 0; i < o.nx && ok; ++i) {
      ok = m.p_t1(i) >= o.positivity_margin && m.p_t1(i) <= 1.0 - o.positivity_margin;
    }
    if (ok && (case_id == CaseId::d || case_id == CaseId::e)) {
      const Vector q = m.pi().transpose() * m.p_x;
      ok = q.cwiseAbs().minCoeff() >= 1e-3;
    }
    if (ok) return out;
  }
  throw Error(Errc::PositivityViolation, "could not draw a model satisfying the constraints");
}

namespace {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    rows.push_back(std::vector<double>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) rows.back()[static_cast<std::size_t>(j)] = m(i, j);
  }
  return rows;
}

Matrix matrix_from_json(const json& doc) {
  const auto rows = doc.get<std::vector<std::vector<double>>>();
  const auto cols = rows.empty() ? 0 : rows.front().size();
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw Error(Errc::SchemaError, "ragged table");
    for (std::size_t j = 0; j < cols; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

json vec_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vec_from_json(const json& doc) {
  const auto v = doc.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

json to_json(const DiscreteSCM& m) {
  json doc = {{"x_support", matrix_to_json(m.x_support)}, {"p_x", vec_to_json(m.p_x)},
              {"p_t1", vec_to_json(m.p_t1)},              {"s_support", matrix_to_json(m.s_support)},
              {"p_s0", matrix_to_json(m.p_s0)},           {"p_s1", matrix_to_json(m.p_s1)},
              {"h", matrix_to_json(m.h)}};
  if (m.h_t) doc["h_t"] = {matrix_to_json((*m.h_t)[0]), matrix_to_json((*m.h_t)[1])};
  if (m.gamma) doc["gamma"] = vec_to_json(*m.gamma);
  if (m.density_ratio) doc["density_ratio"] = vec_to_json(*m.density_ratio);
  return doc;
}

DiscreteSCM discrete_scm_from_json(const json& doc) {
  try {
    DiscreteSCM m;
    m.x_support = matrix_from_json(doc.at("x_support"));
    m.p_x = vec_from_json(doc.at("p_x"));
    m.p_t1 = vec_from_json(doc.at("p_t1"));
    m.s_support = matrix_from_json(doc.at("s_support"));
    m.p_s0 = matrix_from_json(doc.at("p_s0"));
    m.p_s1 = matrix_from_json(doc.at("p_s1"));
    m.h = matrix_from_json(doc.at("h"));
    if (doc.contains("h_t")) {
      m.h_t = std::array<Matrix, 2>{matrix_from_json(doc["h_t"].at(0)), matrix_from_json(doc["h_t"].at(1))};
    }
    if (doc.contains("gamma")) m.gamma = vec_from_json(doc["gamma"]);
    if (doc.contains("density_ratio")) m.density_ratio = vec_from_json(doc["density_ratio"]);
    validate_discrete_scm(m);
    return m;
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaError, e.what());
  }
}

}  // namespace surro

namespace surro {

bool OracleCheckSummary::all_pass() const {
  return std::all_of(items.begin(), items.end(), [](const OracleCheckItem& i) { return i.failed == 0; });
}

OracleCheckSummary run_oracle_checks(std::uint64_t seed, int instances) {
  OracleCheckSummary out;
  out.items = {{"bound_w2", 0, 0, 0.0},    {"bound_wplus", 0, 0, 0.0}, {"translation", 0, 0, 0.0},
               {"case_b", 0, 0, 0.0},      {"case_d", 0, 0, 0.0},      {"linear_risk", 0, 0, 0.0}};
  auto record = [&](std::size_t item, double violation) {
    auto& it = out.items[item];
    ++it.checked;
    it.worst = std::max(it.worst, violation);
    if (violation > 0.0) ++it.failed;
  };
  for (int i = 0; i < instances; ++i) {
    RandomSource rng = make_rng(seed, static_cast<std::uint64_t>(i));
    RandomModelOptions o;
    o.nx = 2 + static_cast<int>(rng.uniform_index(4));
    o.ns = 2 + static_cast<int>(rng.uniform_index(5));
    const DiscreteSCM m = random_discrete_scm(CaseId::d, rng, o).model;
    Vector f(m.ns());
    for (Eigen::Index j = 0; j < f.size(); ++j) f(j) = 2.0 * rng.normal();
    const double risk = exact_risk(m, f);
    const double slack = 1e-12 * std::max(1.0, risk);
    record(0, std::max(0.0, risk - risk_bound(m, f, WeightKind::w2) - slack));
    record(1, std::max(0.0, risk - 2.0 * risk_bound(m, f, WeightKind::wplus) - slack));
    const double c = 10.0 * rng.normal();
    const double shifted = exact_risk(m, (f.array() + c).matrix());
    record(2, std::max(0.0, std::abs(shifted - risk) - slack));

    for (auto [id, item] : {std::pair{CaseId::b, std::size_t{3}}, std::pair{CaseId::d, std::size_t{4}}}) {
      const CaseReport report = check_case_properties(id, random_discrete_scm(id, rng, o).model, 1e-9);
      double worst = 0.0;
      for (const auto& claim : report.claims) {
        if (!claim.informational && !claim.pass) worst = std::max(worst, std::abs(claim.lhs - claim.rhs));
      }
      record(item, worst);
    }

    RandomModelOptions lo = o;
    lo.d = 1 + static_cast<int>(rng.uniform_index(3));
    lo.linear = true;
    const RandomModel lin = random_discrete_scm(CaseId::d, rng, lo);
    Vector beta_f(lo.d);
    for (int j = 0; j < lo.d; ++j) beta_f(j) = rng.normal();
    const ExactEffects eff = exact_effects(lin.model);
    const Vector w = static_cast<double>(lin.model.nx()) * lin.model.p_x.cwiseProduct(lin.model.ratio());
    const double lr = linear_risk(*lin.beta_h, beta_f, eff.tau_s_of_x, w);
    const double er = exact_risk(lin.model, lin.model.s_support * beta_f);
    record(5, std::max(0.0, std::abs(lr - er) - 1e-9));
  }
  return out;
}

}  // namespace surro
