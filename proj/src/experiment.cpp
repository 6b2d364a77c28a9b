#include "surro/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace surro {

using nlohmann::json;
namespace fs = std::filesystem;

// -- Scenario labels -------------------------------------------------------------

namespace {

double parse_number(const std::string& text, const std::string& context) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(Errc::ConfigError, "cannot parse '" + text + "' in " + context);
  }
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  return parts;
}

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

void reject_unknown_keys(const json& doc, const std::set<std::string>& allowed, const std::string& where) {
  if (!doc.is_object()) throw Error(Errc::ConfigError, where + " must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (!allowed.count(key)) throw Error(Errc::ConfigError, "unknown key '" + key + "' in " + where);
  }
}

}  // namespace

ScenarioSpec parse_scenario_label(const std::string& label) {
  const auto parts = split(label, '-');
  if (parts.empty()) throw Error(Errc::ConfigError, "empty scenario label");
  ScenarioSpec spec;
  spec.case_id = parse_case(parts[0]);
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const std::string& p = parts[i];
    if (i == 1 && (p == "linear" || p == "square")) {
      spec.nonlinearity = parse_nonlinearity(p);
    } else if (p == "U") {
      spec.unobserved_confounder = true;
    } else if (starts_with(p, "k") && p.size() > 1) {
      spec.x_dim = static_cast<int>(parse_number(p.substr(1), "scenario label"));
    } else if (starts_with(p, "med")) {
      spec.scale.med = parse_number(p.substr(3), "scenario label");
    } else if (starts_with(p, "leaf")) {
      spec.scale.leaf = parse_number(p.substr(4), "scenario label");
    } else if (starts_with(p, "proxy")) {
      spec.scale.proxy = parse_number(p.substr(5), "scenario label");
    } else {
      throw Error(Errc::ConfigError, "unknown scenario label part '" + p + "'");
    }
  }
  return spec;
}

ScenarioSpec scenario_from_json(const json& doc) {
  if (doc.is_string()) return parse_scenario_label(doc.get<std::string>());
  reject_unknown_keys(doc, {"case", "nonlinearity", "x_dim", "d_med", "d_leaf", "d_proxy", "unobserved_confounder", "scale"},
                      "scenario");
  try {
    ScenarioSpec spec;
    spec.case_id = parse_case(doc.value("case", std::string("d")));
    spec.nonlinearity = parse_nonlinearity(doc.value("nonlinearity", std::string("linear")));
    spec.x_dim = doc.value("x_dim", spec.x_dim);
    spec.d_med = doc.value("d_med", spec.d_med);
    spec.d_leaf = doc.value("d_leaf", spec.d_leaf);
    spec.d_proxy = doc.value("d_proxy", spec.d_proxy);
    spec.unobserved_confounder = doc.value("unobserved_confounder", false);
    if (doc.contains("scale")) {
      const json& sc = doc["scale"];
      reject_unknown_keys(sc, {"med", "leaf", "proxy"}, "scenario.scale");
      spec.scale.med = sc.value("med", 1.0);
      spec.scale.leaf = sc.value("leaf", 1.0);
      spec.scale.proxy = sc.value("proxy", 1.0);
    }
    if (spec.x_dim < 1 || spec.d_med < 1 || spec.d_leaf < 0 || spec.d_proxy < 0) {
      throw Error(Errc::ConfigError, "scenario dimensions out of range");
    }
    return spec;
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, std::string("scenario: ") + e.what());
  }
}

json to_json(const ScenarioSpec& spec) {
  return {{"case", to_string(spec.case_id)},
          {"nonlinearity", to_string(spec.nonlinearity)},
          {"x_dim", spec.x_dim},
          {"d_med", spec.d_med},
          {"d_leaf", spec.d_leaf},
          {"d_proxy", spec.d_proxy},
          {"unobserved_confounder", spec.unobserved_confounder},
          {"scale", {{"med", spec.scale.med}, {"leaf", spec.scale.leaf}, {"proxy", spec.scale.proxy}}}};
}

// -- Methods -----------------------------------------------------------------------

const std::vector<std::string>& registered_methods() {
  static const std::vector<std::string> ids{
      "outcome_reg_lin",      "outcome_reg_tree",     "reg_sel_reg_lin", "reg_sel_reg_tree",
      "surrogate_index_lin",  "surrogate_index_tree", "surrogate_index_gbm", "bound_reg_lin",
      "bound_reg_tree",       "bound_reg_bintree",    "surrogate_sampling_lin"};
  return ids;
}

bool is_registered_method(const std::string& id) {
  const auto& ids = registered_methods();
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

// -- Config --------------------------------------------------------------------------

namespace {

InclusionCriterion inclusion_from_json(const json& doc) {
  reject_unknown_keys(doc, {"feature", "op", "threshold"}, "inclusion");
  InclusionCriterion c;
  c.feature = doc.value("feature", 0);
  const std::string op = doc.value("op", std::string(">"));
  if (op == ">") c.op = InclusionCriterion::Op::greater;
  else if (op == ">=") c.op = InclusionCriterion::Op::greater_equal;
  else if (op == "<") c.op = InclusionCriterion::Op::less;
  else if (op == "<=") c.op = InclusionCriterion::Op::less_equal;
  else throw Error(Errc::ConfigError, "inclusion op must be one of > >= < <=");
  c.threshold = doc.value("threshold", 0.0);
  return c;
}

DataBlock data_from_json(const json& doc, const std::string& base_dir) {
  reject_unknown_keys(doc, {"path", "roles", "split_fraction", "split_seed", "reference_ate", "population"}, "data");
  DataBlock d;
  if (!doc.contains("path")) throw Error(Errc::ConfigError, "data.path is required");
  d.path = doc["path"].get<std::string>();
  if (fs::path(d.path).is_relative()) d.path = (fs::path(base_dir) / d.path).string();
  if (doc.contains("roles")) {
    const json& r = doc["roles"];
    reject_unknown_keys(r, {"x", "s", "t", "y"}, "data.roles");
    d.roles.x_columns = r.value("x", std::vector<std::string>{});
    d.roles.s_columns = r.value("s", std::vector<std::string>{});
    d.roles.t_column = r.value("t", std::string("t"));
    d.roles.y_column = r.value("y", std::string("y"));
  }
  d.roles.require_t = true;
  d.roles.require_y = true;
  d.split_fraction = doc.value("split_fraction", 0.7);
  d.split_seed = doc.value("split_seed", std::uint64_t{0});
  if (doc.contains("reference_ate") && !doc["reference_ate"].is_null()) d.reference_ate = doc["reference_ate"].get<double>();
  const std::string pop = doc.value("population", std::string("experimental"));
  if (pop == "experimental") d.population = PopulationTag::experimental;
  else if (pop == "observational") d.population = PopulationTag::observational;
  else throw Error(Errc::ConfigError, "data.population must be experimental or observational");
  if (!(d.split_fraction > 0.0 && d.split_fraction < 1.0)) throw Error(Errc::ConfigError, "split_fraction must lie in (0, 1)");
  return d;
}

const std::set<std::string> kMethodOptionKeys{"lambda", "clip", "L", "scheme", "bins", "calibrate", "folds"};

void validate_method_options(const MethodSpec& m) {
  reject_unknown_keys(m.options, kMethodOptionKeys, "options of " + m.id);
  if (m.options.contains("clip") && !m.options["clip"].is_null()) {
    const auto clip = m.options["clip"].get<std::vector<double>>();
    if (clip.size() != 2 || !(clip[0] > 0.0 && clip[0] < clip[1] && clip[1] < 1.0)) {
      throw Error(Errc::ConfigError, "clip must be [lo, hi] with 0 < lo < hi < 1");
    }
  }
  if (m.options.contains("lambda") && !(m.options["lambda"].get<double>() >= 0.0)) {
    throw Error(Errc::ConfigError, "lambda must be nonnegative");
  }
  if (m.options.contains("L") && m.options["L"].get<int>() < 1) throw Error(Errc::ConfigError, "L must be positive");
  if (m.options.contains("scheme")) {
    const auto s = m.options["scheme"].get<std::string>();
    if (s != "w2" && s != "wplus" && s != "w1") throw Error(Errc::ConfigError, "scheme must be w2, wplus or w1");
  }
}

}  // namespace

ExperimentConfig parse_config(const json& doc, const std::string& base_dir) {
  reject_unknown_keys(doc,
                      {"scenario", "scenarios", "suite", "data", "inclusion", "methods", "n_obs", "n_trial", "seeds",
                       "bootstrap", "output", "nuisance"},
                      "config");
  ExperimentConfig cfg;
  try {
    for (const char* key : {"scenario", "scenarios"}) {
      if (!doc.contains(key)) continue;
      const json& sc = doc[key];
      if (sc.is_array()) {
        for (const auto& item : sc) cfg.scenarios.push_back(scenario_from_json(item));
      } else {
        cfg.scenarios.push_back(scenario_from_json(sc));
      }
    }
    if (doc.contains("suite")) {
      const json& su = doc["suite"];
      reject_unknown_keys(su, {"family", "cases"}, "suite");
      const std::string fam = su.value("family", std::string("composite"));
      if (fam != "composite" && fam != "linear") throw Error(Errc::ConfigError, "suite.family must be composite or linear");
      std::vector<CaseId> cases;
      for (const auto& c : su.value("cases", std::vector<std::string>{"a", "b", "c", "d", "e", "f"})) cases.push_back(parse_case(c));
      for (const auto& spec : scenario_suite(fam == "linear" ? SuiteFamily::linear : SuiteFamily::composite, {}, cases)) {
        cfg.scenarios.push_back(spec);
      }
    }
    if (doc.contains("data")) cfg.data = data_from_json(doc["data"], base_dir);
    if (doc.contains("inclusion")) cfg.inclusion = inclusion_from_json(doc["inclusion"]);
    if (cfg.data && !cfg.scenarios.empty()) throw Error(Errc::ConfigError, "give either scenarios or a data block, not both");
    if (!cfg.data && cfg.scenarios.empty()) throw Error(Errc::ConfigError, "no scenario and no data block");
    if (cfg.data && cfg.inclusion) throw Error(Errc::ConfigError, "inclusion applies to synthetic scenarios only");

    if (doc.contains("methods")) {
      for (const auto& m : doc["methods"]) {
        MethodSpec spec;
        if (m.is_string()) {
          spec.id = m.get<std::string>();
        } else {
          reject_unknown_keys(m, {"id", "options"}, "method");
          spec.id = m.at("id").get<std::string>();
          if (m.contains("options")) spec.options = m["options"];
        }
        if (!is_registered_method(spec.id)) throw Error(Errc::ConfigError, "unknown method '" + spec.id + "'");
        validate_method_options(spec);
        cfg.methods.push_back(std::move(spec));
      }
    }
    cfg.n_obs = doc.value("n_obs", cfg.n_obs);
    cfg.n_trial = doc.value("n_trial", cfg.n_trial);
    if (cfg.n_trial == 0) cfg.n_trial = cfg.n_obs;
    if (cfg.n_obs < 2 || cfg.n_trial < 2) throw Error(Errc::ConfigError, "cohort sizes must be at least 2");
    if (doc.contains("seeds")) {
      const json& s = doc["seeds"];
      cfg.seeds.clear();
      if (s.is_number_integer()) {
        for (std::uint64_t i = 0; i < s.get<std::uint64_t>(); ++i) cfg.seeds.push_back(i);
      } else {
        cfg.seeds = s.get<std::vector<std::uint64_t>>();
      }
    }
    if (cfg.seeds.empty()) throw Error(Errc::ConfigError, "seeds must be nonempty");
    if (doc.contains("bootstrap")) {
      const json& b = doc["bootstrap"];
      reject_unknown_keys(b, {"B", "level"}, "bootstrap");
      cfg.bootstrap.replicates = b.value("B", cfg.bootstrap.replicates);
      cfg.bootstrap.level = b.value("level", cfg.bootstrap.level);
      if (cfg.bootstrap.replicates == 1 || cfg.bootstrap.replicates < 0) throw Error(Errc::ConfigError, "B must be 0 or >= 2");
      if (!(cfg.bootstrap.level > 0.0 && cfg.bootstrap.level < 1.0)) throw Error(Errc::ConfigError, "level must lie in (0, 1)");
    }
    if (doc.contains("output")) {
      const json& o = doc["output"];
      reject_unknown_keys(o, {"dir", "formats", "plots", "timings"}, "output");
      cfg.output.dir = o.value("dir", std::string());
      cfg.output.formats = o.value("formats", cfg.output.formats);
      cfg.output.plots = o.value("plots", false);
      cfg.output.timings = o.value("timings", false);
      for (const auto& f : cfg.output.formats) {
        if (f != "csv" && f != "json") throw Error(Errc::ConfigError, "output format must be csv or json");
      }
    }
    if (doc.contains("nuisance")) {
      const json& n = doc["nuisance"];
      reject_unknown_keys(n, {"index_family", "propensity_l2", "L", "sampler_trees", "sampler_min_samples_leaf", "gbm_max_iter",
                              "gbm_learning_rate"},
                          "nuisance");
      cfg.nuisance.index_family = parse_index_family(n.value("index_family", std::string("gbm")));
      cfg.nuisance.propensity_l2 = n.value("propensity_l2", 1.0);
      cfg.nuisance.sampler.samples_per_arm = n.value("L", 50);
      cfg.nuisance.sampler.forest.n_trees = n.value("sampler_trees", cfg.nuisance.sampler.forest.n_trees);
      cfg.nuisance.sampler.forest.min_samples_leaf =
          n.value("sampler_min_samples_leaf", cfg.nuisance.sampler.forest.min_samples_leaf);
      cfg.nuisance.index.gbm.max_iter = n.value("gbm_max_iter", cfg.nuisance.index.gbm.max_iter);
      cfg.nuisance.index.gbm.learning_rate = n.value("gbm_learning_rate", cfg.nuisance.index.gbm.learning_rate);
      if (cfg.nuisance.sampler.samples_per_arm < 1 || cfg.nuisance.sampler.forest.n_trees < 1) {
        throw Error(Errc::ConfigError, "sampler sizes must be positive");
      }
    }
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open config '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, "config is not valid JSON: " + std::string(e.what()));
  }
  return parse_config(doc, fs::path(path).parent_path().string().empty() ? "." : fs::path(path).parent_path().string());
}

Cohort load_cohort_csv(const std::string& path, const RoleMap& roles) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path + "'");
  Cohort c = read_cohort_csv(in, roles, true).cohort;
  validate_cohort(c);
  return c;
}

std::pair<Cohort, Cohort> stratified_split(const Cohort& c, double fraction, const RandomSource& rng) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw Error(Errc::ConfigError, "split fraction must lie in (0, 1)");
  if (!c.t) throw Error(Errc::SingleArmData, "stratified split needs a treatment column");
  std::vector<Eigen::Index> train, test;
  for (int arm = 0; arm < 2; ++arm) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < c.t->size(); ++i) {
      if ((*c.t)(i) == arm) rows.push_back(i);
    }
    if (rows.empty()) throw Error(Errc::SingleArmData, "arm " + std::to_string(arm) + " is empty");
    RandomSource r = rng.substream(static_cast<std::uint64_t>(arm));
    r.shuffle(std::span<Eigen::Index>(rows));
    const double target = fraction * static_cast<double>(rows.size());
    auto n_train = static_cast<std::size_t>(std::floor(target));
    if (target - std::floor(target) >= 0.5) ++n_train;
    train.insert(train.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
    test.insert(test.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {c.subset(train), c.subset(test)};
}

// -- Running -----------------------------------------------------------------------------

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

struct CellData {
  std::string scenario;
  std::uint64_t seed = 0;
  Cohort obs;
  Cohort trial;
  std::optional<ScenarioTruth> truth;  // trial truth for synthetic data
  double true_ate = 0.0;
  std::optional<DensityRatio> ratio;
};

// Nuisances shared by the methods of one (scenario, seed) cell, fitted on demand.
class LazyNuisances {
 public:
  LazyNuisances(const CellData& cell, const NuisanceOptions& options)
      : cell_(cell), options_(options), rng_(make_rng(cell.seed, 3)) {}

  const NuisanceBundle& core() {
    if (error_) throw *error_;
    if (!bundle_) {
      try {
        NuisanceOptions o = options_;
        o.fit_sampler = false;
        bundle_ = fit_nuisances(cell_.obs, cell_.obs, rng_, o);
      } catch (const Error& e) {
        error_ = e;
        throw;
      }
    }
    return *bundle_;
  }

  const NuisanceBundle& with_sampler() {
    core();
    if (sampler_error_) throw *sampler_error_;
    if (!bundle_->sampler) {
      try {
        bundle_->sampler = fit_conditional_sampler(cell_.obs, rng_.substream(2), options_.sampler);
      } catch (const Error& e) {
        sampler_error_ = e;
        throw;
      }
    }
    return *bundle_;
  }

 private:
  const CellData& cell_;
  NuisanceOptions options_;
  RandomSource rng_;
  std::optional<NuisanceBundle> bundle_;
  std::optional<Error> error_;
  std::optional<Error> sampler_error_;
};

// What a learner hands to evaluation: per-unit values on the trial cohort and
// optionally the potential-outcome contrasts.
struct FittedMethod {
  Vector values;
  std::optional<Vector> po_cate;
};

Clip clip_option(const json& options, ResultRow& row) {
  Clip clip = kDefaultClip;
  if (options.contains("clip")) {
    const auto v = options["clip"].get<std::vector<double>>();
    clip = {v[0], v[1]};
  }
  row.clip_lo = clip.first;
  row.clip_hi = clip.second;
  return clip;
}

WeightKind scheme_option(const json& options) {
  const std::string s = options.value("scheme", std::string("w2"));
  if (s == "wplus") return WeightKind::wplus;
  if (s == "w1") return WeightKind::w1;
  return WeightKind::w2;
}

FittedMethod from_surrogate(const SurrogateModel& f, const CellData& cell) {
  FittedMethod out;
  out.values = f.predict(cell.trial.s);
  if (cell.truth) out.po_cate = cate_potential_outcomes(f, cell.truth->s1, cell.truth->s0);
  return out;
}

FittedMethod run_method(const MethodSpec& m, const CellData& cell, LazyNuisances& nuisances, const RandomSource& rng,
                        ResultRow& row) {
  const json& opt = m.options;
  IndexFitOptions index_options;
  index_options.folds = opt.value("folds", 5);
  const std::string& id = m.id;

  if (id == "outcome_reg_lin" || id == "outcome_reg_tree") {
    const auto fam = id == "outcome_reg_lin" ? PlugInFamily::linear : PlugInFamily::tree;
    return from_surrogate(fit_outcome_regression(cell.obs, fam, rng, index_options), cell);
  }
  if (id == "reg_sel_reg_lin" || id == "reg_sel_reg_tree") {
    const auto fam = id == "reg_sel_reg_lin" ? PlugInFamily::linear : PlugInFamily::tree;
    return from_surrogate(fit_reg_sel_reg(cell.obs, fam, rng, index_options), cell);
  }
  if (starts_with(id, "surrogate_index_")) {
    const IndexFamily fam = id == "surrogate_index_lin" ? IndexFamily::linear
                            : id == "surrogate_index_tree" ? IndexFamily::tree
                                                           : IndexFamily::gbm;
    const SurrogateIndex h = fit_surrogate_index(cell.obs, fam, rng, index_options);
    FittedMethod out;
    out.values = h.predict(cell.trial.x, cell.trial.s);
    if (cell.truth) out.po_cate = h.predict(cell.trial.x, cell.truth->s1) - h.predict(cell.trial.x, cell.truth->s0);
    return out;
  }
  if (starts_with(id, "bound_reg_")) {
    BoundOptions bo;
    bo.scheme = scheme_option(opt);
    bo.clip = clip_option(opt, row);
    bo.folds = index_options.folds;
    bo.bins = opt.value("bins", 10);
    bo.ratio = cell.ratio;
    if (id == "bound_reg_lin") {
      bo.lambda = opt.value("lambda", 0.0);
      bo.family = bo.lambda > 0.0 ? BoundFamily::linear_lasso : BoundFamily::linear_ols;
      row.lambda = bo.lambda;
    } else {
      bo.family = id == "bound_reg_tree" ? BoundFamily::tree : BoundFamily::bintree;
    }
    return from_surrogate(fit_bound_regression(cell.obs, nuisances.core(), bo, rng), cell);
  }
  // surrogate_sampling_lin
  SamplingOptions so;
  so.lambda = opt.value("lambda", 0.01);
  so.calibrate = opt.value("calibrate", true);
  so.ratio = cell.ratio;
  row.lambda = so.lambda;
  NuisanceBundle bundle = nuisances.with_sampler();
  bundle.sampler->samples_per_arm = opt.value("L", bundle.sampler->samples_per_arm);
  row.samples = bundle.sampler->samples_per_arm;
  return from_surrogate(fit_surrogate_sampling(cell.obs, cell.obs, bundle, so, rng), cell);
}

void evaluate_method(const FittedMethod& fm, const CellData& cell, const BootstrapConfig& boot, const RandomSource& rng,
                     ResultRow& row, ScatterSeries* scatter) {
  const IntVector& t = *cell.trial.t;
  EffectEstimate est;
  est.method_id = row.method;
  est.ate = ate_diff_in_means(fm.values, t);
  row.ate_hat = est.ate;
  row.true_ate = cell.true_ate;
  row.mae = std::abs(est.ate - cell.true_ate);
  if (cell.truth) {
    est.estimator = Estimator::t_learner;
    est.cate = cate_t_learner(cell.trial.x, t, fm.values, cell.trial.x);
    const MetricReport rep = score(est, *cell.truth);
    row.pehe = rep.pehe;
    row.r2 = rep.r2_cate;
    if (fm.po_cate) row.r2_po = r_squared(*fm.po_cate, cell.truth->cate);
    if (scatter) {
      scatter->truth = cell.truth->cate;
      scatter->estimate = *est.cate;
    }
  }
  if (boot.replicates > 0) {
    const Vector& v = fm.values;
    auto stat = [&](const std::vector<Eigen::Index>& rows) {
      return ate_diff_in_means(take_rows(v, rows), t(rows));
    };
    const BootstrapResult b = bootstrap_ci(stat, v.size(), boot.replicates, boot.level, rng);
    row.ci_lo = b.lo;
    row.ci_hi = b.hi;
    row.se = b.se;
  }
}

std::vector<CellData> synthetic_cells(const ExperimentConfig& cfg, const ScenarioSpec& base, std::uint64_t seed) {
  ScenarioSpec spec = base;
  spec.seed = seed;
  const ScenarioParams params = sample_scenario_params(spec);
  CellData cell;
  cell.scenario = spec.label();
  cell.seed = seed;
  cell.obs = generate_cohort(params, cfg.n_obs, Regime::observational, make_rng(seed, 1)).first;
  auto [trial, truth] = generate_cohort(params, cfg.n_trial > 0 ? cfg.n_trial : cfg.n_obs, Regime::trial, make_rng(seed, 2));
  if (cfg.inclusion) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < trial.x.rows(); ++i) {
      if (cfg.inclusion->includes(trial.x.row(i).transpose())) keep.push_back(i);
    }
    trial = trial.subset(keep);
    ScenarioTruth kept;
    kept.s0 = take_rows(truth.s0, keep);
    kept.s1 = take_rows(truth.s1, keep);
    kept.y0 = take_rows(truth.y0, keep);
    kept.y1 = take_rows(truth.y1, keep);
    kept.cate = take_rows(truth.cate, keep);
    kept.ate = keep.empty() ? 0.0 : (kept.y1 - kept.y0).mean();
    kept.population_ate = truth.population_ate;
    truth = std::move(kept);
    cell.ratio = DensityRatio::inclusion(*cfg.inclusion, cell.obs);
  }
  cell.trial = std::move(trial);
  cell.true_ate = truth.ate;
  cell.truth = std::move(truth);
  std::vector<CellData> out;
  out.push_back(std::move(cell));
  return out;
}

CellData external_cell(const ExperimentConfig& cfg, const Cohort& data, std::uint64_t seed) {
  const DataBlock& db = *cfg.data;
  auto [train, test] = stratified_split(data, db.split_fraction, make_rng(db.split_seed, seed));
  train.population = db.population;
  test.population = PopulationTag::experimental;
  CellData cell;
  cell.scenario = "data:" + fs::path(db.path).stem().string();
  cell.seed = seed;
  cell.true_ate = db.reference_ate ? *db.reference_ate : ate_diff_in_means(*test.y, *test.t);
  cell.obs = std::move(train);
  cell.trial = std::move(test);
  return cell;
}

}  // namespace

ResultsTable run_experiment(const ExperimentConfig& cfg) {
  ResultsTable table;
  std::optional<Cohort> data;
  if (cfg.data) {
    data = load_cohort_csv(cfg.data->path, cfg.data->roles);
    data->population = cfg.data->population;
  }
  const std::size_t n_scenarios = cfg.data ? 1 : cfg.scenarios.size();
  for (std::size_t sc = 0; sc < n_scenarios; ++sc) {
    for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
      const std::uint64_t seed = cfg.seeds[si];
      std::vector<CellData> cells;
      std::optional<Error> setup_error;
      try {
        if (data) {
          cells.push_back(external_cell(cfg, *data, seed));
        } else {
          cells = synthetic_cells(cfg, cfg.scenarios[sc], seed);
        }
      } catch (const Error& e) {
        setup_error = e;
      }
      if (setup_error) {
        const std::string label = data ? "data:" + fs::path(cfg.data->path).stem().string() : cfg.scenarios[sc].label();
        for (const auto& m : cfg.methods) {
          ResultRow row;
          row.scenario = label;
          row.seed = seed;
          row.method = m.id;
          row.status = std::string(to_string(setup_error->code()));
          row.message = setup_error->what();
          table.rows.push_back(std::move(row));
        }
        continue;
      }
      for (const CellData& cell : cells) {
        LazyNuisances nuisances(cell, cfg.nuisance);
        for (const auto& m : cfg.methods) {
          ResultRow row;
          row.scenario = cell.scenario;
          row.seed = seed;
          row.method = m.id;
          const auto start = std::chrono::steady_clock::now();
          const std::uint64_t stream = mix64(fnv1a(m.id));
          ScatterSeries series{cell.scenario, m.id, {}, {}};
          const bool want_scatter = cfg.output.plots && si == 0;
          try {
            const FittedMethod fm = run_method(m, cell, nuisances, make_rng(seed, stream), row);
            evaluate_method(fm, cell, cfg.bootstrap, make_rng(seed, stream ^ 0xb0075ULL), row,
                            want_scatter ? &series : nullptr);
          } catch (const Error& e) {
            row.status = std::string(to_string(e.code()));
            row.message = e.what();
            row.ate_hat.reset();
            row.mae.reset();
            row.r2.reset();
            row.pehe.reset();
            row.r2_po.reset();
            row.ci_lo.reset();
            row.ci_hi.reset();
            row.se.reset();
          } catch (const std::exception& e) {
            row.status = "InternalError";
            row.message = e.what();
          }
          row.runtime_ms =
              std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
          if (want_scatter && row.status == "ok" && series.truth.size() > 0) table.scatter.push_back(std::move(series));
          table.rows.push_back(std::move(row));
        }
      }
    }
  }
  return table;
}

// -- Emission ----------------------------------------------------------------------------

const std::vector<std::string>& results_columns() {
  static const std::vector<std::string> cols{"scenario", "seed",  "method", "status", "ate_hat", "true_ate",
                                             "mae",      "r2",    "pehe",   "r2_po",  "ci_lo",   "ci_hi",
                                             "se",       "lambda", "clip_lo", "clip_hi", "L",     "message"};
  return cols;
}

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> csv_fields(const std::string& line, std::size_t line_no) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw Error(Errc::ParseError, "line " + std::to_string(line_no) + ": unterminated quote");
  out.push_back(std::move(cur));
  return out;
}

std::optional<double> parse_opt(const std::string& s, std::size_t line_no) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw Error(Errc::ParseError, "line " + std::to_string(line_no) + ": bad number '" + s + "'");
  return v;
}

}  // namespace

void write_results_csv(std::ostream& out, const ResultsTable& table, bool timings) {
  const auto& cols = results_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  if (timings) out << ",runtime_ms";
  out << '\n';
  for (const auto& r : table.rows) {
    out << csv_quote(r.scenario) << ',' << r.seed << ',' << csv_quote(r.method) << ',' << csv_quote(r.status) << ','
        << format_opt(r.ate_hat) << ',' << format_opt(r.true_ate) << ',' << format_opt(r.mae) << ','
        << format_opt(r.r2) << ',' << format_opt(r.pehe) << ',' << format_opt(r.r2_po) << ','
        << format_opt(r.ci_lo) << ',' << format_opt(r.ci_hi) << ',' << format_opt(r.se) << ','
        << format_opt(r.lambda) << ',' << format_opt(r.clip_lo) << ',' << format_opt(r.clip_hi) << ','
        << (r.samples ? std::to_string(*r.samples) : std::string()) << ',' << csv_quote(r.message);
    if (timings) out << ',' << format_double(r.runtime_ms);
    out << '\n';
  }
  if (!out) throw Error(Errc::IoError, "failed writing results CSV");
}

ResultsTable read_results_csv(std::istream& in) {
  ResultsTable table;
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::SchemaError, "missing header row");
  const auto header = csv_fields(line, 1);
  const auto& cols = results_columns();
  const bool timings = header.size() == cols.size() + 1 && header.back() == "runtime_ms";
  if (!std::equal(cols.begin(), cols.end(), header.begin(), header.begin() + static_cast<std::ptrdiff_t>(std::min(header.size(), cols.size()))) ||
      (header.size() != cols.size() && !timings)) {
    throw Error(Errc::SchemaError, "unexpected results header");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = csv_fields(line, line_no);
    if (f.size() != header.size()) throw Error(Errc::ParseError, "line " + std::to_string(line_no) + ": wrong field count");
    ResultRow r;
    r.scenario = f[0];
    r.seed = std::stoull(f[1]);
    r.method = f[2];
    r.status = f[3];
    r.ate_hat = parse_opt(f[4], line_no);
    r.true_ate = parse_opt(f[5], line_no);
    r.mae = parse_opt(f[6], line_no);
    r.r2 = parse_opt(f[7], line_no);
    r.pehe = parse_opt(f[8], line_no);
    r.r2_po = parse_opt(f[9], line_no);
    r.ci_lo = parse_opt(f[10], line_no);
    r.ci_hi = parse_opt(f[11], line_no);
    r.se = parse_opt(f[12], line_no);
    r.lambda = parse_opt(f[13], line_no);
    r.clip_lo = parse_opt(f[14], line_no);
    r.clip_hi = parse_opt(f[15], line_no);
    if (!f[16].empty()) r.samples = std::stoi(f[16]);
    r.message = f[17];
    if (timings) r.runtime_ms = parse_opt(f[18], line_no).value_or(0.0);
    table.rows.push_back(std::move(r));
  }
  return table;
}

json results_to_json(const ResultsTable& table) {
  json rows = json::array();
  json runtimes = json::array();
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  for (const auto& r : table.rows) {
    rows.push_back({{"scenario", r.scenario},
                    {"seed", r.seed},
                    {"method", r.method},
                    {"status", r.status},
                    {"ate_hat", opt(r.ate_hat)},
                    {"true_ate", opt(r.true_ate)},
                    {"mae", opt(r.mae)},
                    {"r2", opt(r.r2)},
                    {"pehe", opt(r.pehe)},
                    {"r2_po", opt(r.r2_po)},
                    {"ci_lo", opt(r.ci_lo)},
                    {"ci_hi", opt(r.ci_hi)},
                    {"se", opt(r.se)},
                    {"lambda", opt(r.lambda)},
                    {"clip_lo", opt(r.clip_lo)},
                    {"clip_hi", opt(r.clip_hi)},
                    {"L", r.samples ? json(*r.samples) : json(nullptr)},
                    {"message", r.message}});
    runtimes.push_back(r.runtime_ms);
  }
  return {{"schema_version", "1"}, {"columns", results_columns()}, {"rows", rows}, {"metadata", {{"runtime_ms", runtimes}}}};
}

std::string scatter_svg(const ScatterSeries& series) {
  constexpr double size = 480.0, pad = 48.0;
  const Eigen::Index n = std::min<Eigen::Index>(series.truth.size(), series.estimate.size());
  const Eigen::Index step = std::max<Eigen::Index>(1, n / 2000);
  double lo = 0.0, hi = 1.0;
  if (n > 0) {
    lo = std::min(series.truth.head(n).minCoeff(), series.estimate.head(n).minCoeff());
    hi = std::max(series.truth.head(n).maxCoeff(), series.estimate.head(n).maxCoeff());
  }
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  auto px = [&](double v) { return pad + (v - lo) / (hi - lo) * (size - 2 * pad); };
  auto py = [&](double v) { return size - px(v); };
  char buf[160];
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"480\" viewBox=\"0 0 480 480\">\n";
  out << "<rect width=\"480\" height=\"480\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf, "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"#999\"/>\n", px(lo), py(lo),
                px(hi), py(hi));
  out << buf;
  out << "<rect x=\"48\" y=\"48\" width=\"384\" height=\"384\" fill=\"none\" stroke=\"black\"/>\n";
  for (Eigen::Index i = 0; i < n; i += step) {
    std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"1.5\" fill=\"#1f77b4\" fill-opacity=\"0.5\"/>\n",
                  px(series.truth(i)), py(series.estimate(i)));
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "<text x=\"240\" y=\"470\" text-anchor=\"middle\" font-size=\"12\">true CATE [%.3g, %.3g]</text>\n",
                lo, hi);
  out << buf;
  out << "<text x=\"14\" y=\"240\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 240)\">estimated CATE</text>\n";
  out << "<text x=\"240\" y=\"30\" text-anchor=\"middle\" font-size=\"13\">" << series.method << " / " << series.scenario
      << "</text>\n";
  out << "</svg>\n";
  return out.str();
}

std::vector<std::string> emit_results(const ResultsTable& table, const OutputConfig& output) {
  const fs::path dir = output.dir.empty() ? fs::path(".") : fs::path(output.dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create output directory '" + dir.string() + "': " + ec.message());
  std::vector<std::string> written;
  auto open = [&](const fs::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error(Errc::IoError, "cannot write '" + p.string() + "'");
    written.push_back(p.string());
    return f;
  };
  for (const auto& fmt : output.formats) {
    if (fmt == "csv") {
      auto f = open(dir / "results.csv");
      write_results_csv(f, table, output.timings);
    } else if (fmt == "json") {
      auto f = open(dir / "results.json");
      json doc = results_to_json(table);
      char stamp[32];
      const std::time_t now = std::time(nullptr);
      std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
      doc["metadata"]["generated_at"] = stamp;
      f << doc.dump(2) << '\n';
      if (!f) throw Error(Errc::IoError, "failed writing results JSON");
    } else {
      throw Error(Errc::ConfigError, "unknown output format '" + fmt + "'");
    }
  }
  if (output.plots) {
    for (const auto& s : table.scatter) {
      std::string name = "scatter_" + s.scenario + "_" + s.method + ".svg";
      std::replace_if(name.begin(), name.end(), [](char c) { return c == ':' || c == '/' || c == ' '; }, '_');
      auto f = open(dir / name);
      f << scatter_svg(s);
    }
  }
  return written;
}

}  // namespace surro
