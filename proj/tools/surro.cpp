#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "surro/experiment.hpp"
#include "surro/oracle.hpp"
#include "surro/scm.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

int exit_code_for(const surro::Error& e) {
  switch (e.code()) {
    case surro::Errc::IoError: return kExitIo;
    default: return kExitConfig;
  }
}

std::string default_out_dir() {
  if (const char* env = std::getenv("SURRO_OUTPUT_DIR"); env && *env) return env;
  return ".";
}

int cmd_run(const std::string& config_path, const std::string& out_dir, const std::vector<std::string>& formats,
            bool plots, bool timings) {
  surro::ExperimentConfig cfg = surro::load_config(config_path);
  if (!out_dir.empty()) cfg.output.dir = out_dir;
  if (cfg.output.dir.empty()) cfg.output.dir = default_out_dir();
  if (!formats.empty()) {
    for (const auto& f : formats) {
      if (f != "csv" && f != "json") throw surro::Error(surro::Errc::ConfigError, "format must be csv or json");
    }
    cfg.output.formats = formats;
  }
  if (plots) cfg.output.plots = true;
  if (timings) cfg.output.timings = true;
  const surro::ResultsTable table = surro::run_experiment(cfg);
  std::size_t failed = 0;
  for (const auto& r : table.rows) failed += r.status != "ok";
  for (const auto& p : surro::emit_results(table, cfg.output)) std::cout << "wrote " << p << '\n';
  std::cout << table.rows.size() << " rows, " << failed << " error rows\n";
  return 0;
}

int cmd_generate(const std::string& scenario, Eigen::Index n, std::uint64_t seed, const std::string& regime_name,
                 const std::string& out, const std::string& truth_out) {
  std::pair<surro::Cohort, surro::ScenarioTruth> generated;
  if (n < 1) throw surro::Error(surro::Errc::ConfigError, "--n must be positive");
  if (scenario == "ihdp") {
    surro::IhdpShapeOptions o;
    o.n = n;
    generated = surro::ihdp_shaped_cohort(o, surro::make_rng(seed, 0));
  } else if (scenario == "e1") {
    generated = surro::appendix_e1_scenario(n, surro::make_rng(seed, 0));
  } else {
    surro::ScenarioSpec spec = surro::parse_scenario_label(scenario);
    spec.seed = seed;
    surro::Regime regime = surro::Regime::observational;
    if (regime_name == "trial") regime = surro::Regime::trial;
    else if (regime_name != "observational") throw surro::Error(surro::Errc::ConfigError, "--regime must be observational or trial");
    generated = surro::generate_cohort(surro::sample_scenario_params(spec), n, regime,
                                       surro::make_rng(seed, regime == surro::Regime::observational ? 1 : 2));
  }
  const std::filesystem::path out_path = std::filesystem::path(out).is_relative() && out.find('/') == std::string::npos
                                             ? std::filesystem::path(default_out_dir()) / out
                                             : std::filesystem::path(out);
  std::ofstream f(out_path);
  if (!f) throw surro::Error(surro::Errc::IoError, "cannot write '" + out_path.string() + "'");
  surro::write_cohort_csv(f, generated.first);
  std::cout << "wrote " << out_path.string() << " (" << generated.first.n << " rows)\n";
  if (!truth_out.empty()) {
    std::ofstream t(truth_out);
    if (!t) throw surro::Error(surro::Errc::IoError, "cannot write '" + truth_out + "'");
    surro::write_truth_csv(t, generated.second, surro::s_column_names(generated.first));
    std::cout << "wrote " << truth_out << '\n';
  }
  return 0;
}

int cmd_oracle_check(std::uint64_t seed, int instances) {
  if (instances < 1) throw surro::Error(surro::Errc::ConfigError, "--instances must be positive");
  const surro::OracleCheckSummary summary = surro::run_oracle_checks(seed, instances);
  for (const auto& item : summary.items) {
    std::cout << (item.failed == 0 ? "PASS " : "FAIL ") << item.name << ": " << item.checked << " checked, "
              << item.failed << " failed, worst violation " << item.worst << '\n';
  }
  return summary.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn and evaluate plug-in surrogate endpoints"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string out_dir;
  std::vector<std::string> formats;
  app.add_option("--out-dir", out_dir, "Output directory (default: $SURRO_OUTPUT_DIR or .)");
  app.add_option("--format", formats, "Output formats: csv, json")->delimiter(',');

  auto* run = app.add_subcommand("run", "Run an experiment config");
  std::string config_path;
  bool plots = false, timings = false;
  run->add_option("config", config_path, "Experiment config (JSON)")->required();
  run->add_flag("--plots", plots, "Write CATE scatter plots (SVG)");
  run->add_flag("--timings", timings, "Add the runtime_ms column to the CSV");

  auto* gen = app.add_subcommand("generate", "Write a simulated cohort as CSV");
  std::string scenario, regime = "observational", out = "cohort.csv", truth_out;
  Eigen::Index n = 1000;
  std::uint64_t seed = 0;
  gen->add_option("scenario", scenario, "Scenario label (e.g. d-linear-k2-U), 'e1' or 'ihdp'")->required();
  gen->add_option("--n", n, "Number of units");
  gen->add_option("--seed", seed, "Seed");
  gen->add_option("--regime", regime, "observational or trial");
  gen->add_option("--out", out, "Output CSV");
  gen->add_option("--truth", truth_out, "Also write potential outcomes to this CSV");

  auto* oracle = app.add_subcommand("oracle-check", "Check exact identities on random discrete models");
  std::uint64_t oracle_seed = 0;
  int instances = 1000;
  oracle->add_option("--seed", oracle_seed, "Seed");
  oracle->add_option("--instances", instances, "Number of random models");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config_path, out_dir, formats, plots, timings);
    if (*gen) {
      const std::string target = out_dir.empty() ? out : (std::filesystem::path(out_dir) / out).string();
      return cmd_generate(scenario, n, seed, regime, target, truth_out);
    }
    return cmd_oracle_check(oracle_seed, instances);
  } catch (const surro::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
