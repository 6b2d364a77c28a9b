#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "surro/cohort.hpp"
#include "surro/eval.hpp"
#include "surro/rng.hpp"
#include "surro/scm.hpp"
#include "surro/surrogates.hpp"

namespace surro {

// Inverse of ScenarioSpec::label(), e.g. "d-linear-k2-U-med2". A bare case
// letter selects the base linear scenario.
ScenarioSpec parse_scenario_label(const std::string& label);
ScenarioSpec scenario_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ScenarioSpec& spec);

const std::vector<std::string>& registered_methods();
bool is_registered_method(const std::string& id);

struct MethodSpec {
  std::string id;
  nlohmann::json options = nlohmann::json::object();
};

struct DataBlock {
  std::string path;
  RoleMap roles;
  double split_fraction = 0.7;
  std::uint64_t split_seed = 0;
  // Defaults to the difference in means of y on the held-out split.
  std::optional<double> reference_ate;
  PopulationTag population = PopulationTag::experimental;
};

struct BootstrapConfig {
  int replicates = 2000;  // 0 disables intervals
  double level = 0.95;
};

struct OutputConfig {
  std::string dir;
  std::vector<std::string> formats{"csv", "json"};
  bool plots = false;
  // Adds the runtime_ms column to the CSV (which then varies between runs).
  bool timings = false;
};

struct ExperimentConfig {
  std::vector<ScenarioSpec> scenarios;
  std::optional<DataBlock> data;
  // Trial inclusion for synthetic scenarios; the density ratio follows.
  std::optional<InclusionCriterion> inclusion;
  std::vector<MethodSpec> methods;
  Eigen::Index n_obs = 10000;
  Eigen::Index n_trial = 0;  // 0: same as n_obs
  std::vector<std::uint64_t> seeds{0};
  BootstrapConfig bootstrap;
  OutputConfig output;
  NuisanceOptions nuisance;
};

// Relative data paths resolve against base_dir. Throws ConfigError.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

Cohort load_cohort_csv(const std::string& path, const RoleMap& roles = {});

// Within each arm, round(fraction * arm size) units (halves round up) go to
// train. Both halves keep the original row order.
std::pair<Cohort, Cohort> stratified_split(const Cohort& c, double fraction, const RandomSource& rng);

struct ResultRow {
  std::string scenario;
  std::uint64_t seed = 0;
  std::string method;
  std::string status = "ok";  // or the error identifier
  std::optional<double> ate_hat, true_ate, mae, r2, pehe, r2_po, ci_lo, ci_hi, se;
  std::optional<double> lambda, clip_lo, clip_hi;
  std::optional<int> samples;  // L
  std::string message;
  double runtime_ms = 0.0;

  bool operator==(const ResultRow&) const = default;
};

struct ScatterSeries {
  std::string scenario;
  std::string method;
  Vector truth;
  Vector estimate;
};

struct ResultsTable {
  std::vector<ResultRow> rows;
  std::vector<ScatterSeries> scatter;  // first seed of each scenario, when plots are on
};

ResultsTable run_experiment(const ExperimentConfig& cfg);

const std::vector<std::string>& results_columns();
void write_results_csv(std::ostream& out, const ResultsTable& table, bool timings = false);
ResultsTable read_results_csv(std::istream& in);
nlohmann::json results_to_json(const ResultsTable& table);
std::string scatter_svg(const ScatterSeries& series);

// Writes results.csv / results.json (and scatter SVGs) into output.dir.
// Returns the written paths. Throws IoError.
std::vector<std::string> emit_results(const ResultsTable& table, const OutputConfig& output);

}  // namespace surro
