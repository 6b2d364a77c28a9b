#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "surro/experiment.hpp"

using namespace surro;
namespace fs = std::filesystem;

namespace {

template <typename F>
void expect_error(Errc code, F&& f) {
  try {
    f();
    FAIL() << "no error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("surro_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ExperimentConfig small_config() {
  return parse_config(nlohmann::json::parse(R"({
    "scenario": "d-linear-k2",
    "n_obs": 600,
    "seeds": [0, 1],
    "methods": ["outcome_reg_lin", "reg_sel_reg_lin", "bound_reg_lin", "surrogate_index_lin",
                {"id": "surrogate_sampling_lin", "options": {"L": 5}}],
    "bootstrap": {"B": 20},
    "nuisance": {"index_family": "linear", "sampler_trees": 10}
  })"));
}

// One constant surrogate: sampling contrasts vanish, every other method runs.
fs::path constant_surrogate_csv(const fs::path& dir) {
  const fs::path p = dir / "flat.csv";
  std::ofstream f(p);
  f << "x_a,x_b,s_c,t,y\n";
  auto rng = make_rng(1, 1);
  for (int i = 0; i < 300; ++i) {
    const double a = rng.normal(), b = rng.normal();
    const int t = rng.bernoulli(0.5);
    f << a << ',' << b << ",1.5," << t << ',' << a + t + rng.normal() << '\n';
  }
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(SURRO_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST(Scenarios, LabelRoundTrip) {
  for (const auto& spec : scenario_suite(SuiteFamily::composite, {})) {
    EXPECT_EQ(parse_scenario_label(spec.label()), spec) << spec.label();
    EXPECT_EQ(scenario_from_json(to_json(spec)), spec);
  }
  EXPECT_EQ(parse_scenario_label("c").case_id, CaseId::c);
  expect_error(Errc::ConfigError, [] { parse_scenario_label("d-linear-bogus"); });
  expect_error(Errc::ConfigError, [] { scenario_from_json(nlohmann::json{{"case", "d"}, {"colour", 1}}); });
}

TEST(Config, Rejections) {
  auto bad = [](const char* text) {
    expect_error(Errc::ConfigError, [&] { parse_config(nlohmann::json::parse(text)); });
  };
  bad(R"({"scenario": "d", "methods": ["no_such_method"]})");
  bad(R"({"scenario": "d", "seeds": []})");
  bad(R"({"scenario": "d", "surprise": 1})");
  bad(R"({"data": {"path": "x.csv", "split_fraction": 1.0}})");
  bad(R"({"methods": []})");
  bad(R"({"scenario": "d", "methods": [{"id": "bound_reg_lin", "options": {"clip": [0.7, 0.3]}}]})");
  bad(R"({"scenario": "d", "methods": [{"id": "bound_reg_lin", "options": {"gamma": 1}}]})");
  EXPECT_EQ(registered_methods().size(), 11u);
}

TEST(Config, SeedsAndSuite) {
  const auto cfg = parse_config(nlohmann::json::parse(R"({"suite": {"family": "linear", "cases": ["d"]}, "seeds": 3})"));
  EXPECT_EQ(cfg.scenarios.size(), 5u);
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{0, 1, 2}));
  EXPECT_EQ(cfg.bootstrap.replicates, 2000);
}

TEST(Config, MissingFileIsIoError) {
  expect_error(Errc::IoError, [] { load_config("/nonexistent/dir/config.json"); });
}

TEST(Split, StratifiedCounts) {
  Cohort c;
  c.n = 100;
  c.x = Matrix::Zero(100, 1);
  c.s = Matrix::Zero(100, 1);
  IntVector t(100);
  for (int i = 0; i < 100; ++i) {
    t(i) = i < 60 ? 1 : 0;
    c.x(i, 0) = i;
  }
  c.t = t;
  const auto [train, test] = stratified_split(c, 0.7, make_rng(3, 0));
  EXPECT_EQ(train.t->sum(), 42);
  EXPECT_EQ(static_cast<int>(train.n) - train.t->sum(), 28);
  EXPECT_EQ(train.n + test.n, 100u);
  for (Eigen::Index i = 1; i < train.x.rows(); ++i) EXPECT_LT(train.x(i - 1, 0), train.x(i, 0));
  const auto again = stratified_split(c, 0.7, make_rng(3, 0));
  EXPECT_TRUE(again.first.x == train.x);
  expect_error(Errc::ConfigError, [&] { stratified_split(c, 1.0, make_rng(3, 0)); });
  Cohort one = c;
  one.t = IntVector::Ones(100);
  expect_error(Errc::SingleArmData, [&] { stratified_split(one, 0.7, make_rng(3, 0)); });
}

TEST(Run, OneRowPerCellAndDeterministic) {
  const auto cfg = small_config();
  const auto a = run_experiment(cfg);
  ASSERT_EQ(a.rows.size(), 10u);
  for (const auto& r : a.rows) {
    EXPECT_EQ(r.status, "ok") << r.method << ": " << r.message;
    EXPECT_TRUE(r.ate_hat && r.mae && r.ci_lo && r.ci_hi);
    EXPECT_LE(*r.ci_lo, *r.ci_hi);
  }
  const auto b = run_experiment(cfg);
  std::ostringstream ca, cb;
  write_results_csv(ca, a);
  write_results_csv(cb, b);
  EXPECT_EQ(ca.str(), cb.str());
}

TEST(Run, ZeroMethodsGiveEmptyTable) {
  auto cfg = small_config();
  cfg.methods.clear();
  EXPECT_TRUE(run_experiment(cfg).rows.empty());
}

TEST(Run, FailingMethodIsIsolated) {
  const fs::path dir = scratch("isolation");
  const fs::path csv = constant_surrogate_csv(dir);
  auto doc = nlohmann::json::parse(R"({
    "methods": ["outcome_reg_lin", "surrogate_sampling_lin", "surrogate_index_lin", "bound_reg_lin"],
    "seeds": 2, "bootstrap": {"B": 10},
    "nuisance": {"index_family": "linear", "sampler_trees": 10, "L": 5}})");
  doc["data"] = {{"path", csv.string()}};
  const auto with = run_experiment(parse_config(doc));
  doc["methods"] = {"outcome_reg_lin", "surrogate_index_lin", "bound_reg_lin"};
  const auto without = run_experiment(parse_config(doc));
  std::size_t j = 0;
  for (const auto& r : with.rows) {
    if (r.method == "surrogate_sampling_lin") {
      EXPECT_EQ(r.status, "DegenerateContrasts");
      EXPECT_FALSE(r.ate_hat.has_value());
      continue;
    }
    ASSERT_LT(j, without.rows.size());
    auto a = r, b = without.rows[j++];
    a.runtime_ms = b.runtime_ms = 0.0;
    EXPECT_EQ(a, b);
  }
  EXPECT_EQ(j, without.rows.size());
}

TEST(Emit, CsvShapeRoundTripAndJson) {
  auto table = run_experiment(small_config());
  table.rows.resize(2);
  table.rows[1].status = "SingleArmData";
  table.rows[1].message = "needs, quoting \"here\"";
  std::ostringstream out;
  write_results_csv(out, table);
  const std::string text = out.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
  std::istringstream in(text);
  const auto back = read_results_csv(in);
  ASSERT_EQ(back.rows.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    auto expected = table.rows[i];
    expected.runtime_ms = 0.0;
    EXPECT_EQ(back.rows[i], expected);
  }
  EXPECT_EQ(results_to_json(table)["schema_version"], "1");
  EXPECT_EQ(text.substr(0, text.find('\n')).find("runtime_ms"), std::string::npos);
}

TEST(Emit, FilesAndErrors) {
  const fs::path dir = scratch("emit");
  auto cfg = small_config();
  cfg.seeds = {0};
  cfg.output.dir = (dir / "nested").string();
  cfg.output.plots = true;
  const auto table = run_experiment(cfg);
  const auto paths = emit_results(table, cfg.output);
  EXPECT_TRUE(fs::exists(dir / "nested" / "results.csv"));
  EXPECT_TRUE(fs::exists(dir / "nested" / "results.json"));
  bool svg = false;
  for (const auto& p : paths) svg |= p.ends_with(".svg");
  EXPECT_TRUE(svg);
  EXPECT_NE(read_file(paths.back()).find("<svg"), std::string::npos);

  std::ofstream(dir / "blocker") << "x";
  OutputConfig blocked = cfg.output;
  blocked.dir = (dir / "blocker" / "sub").string();
  expect_error(Errc::IoError, [&] { emit_results(table, blocked); });
}

TEST(Cli, ExitCodesAndOutputs) {
  const fs::path dir = scratch("cli");
  {
    std::ofstream f(dir / "ok.json");
    f << R"({"scenario": "c-linear-k2", "n_obs": 300, "methods": ["outcome_reg_lin"], "bootstrap": {"B": 0}})";
    std::ofstream g(dir / "bad.json");
    g << R"({"scenario": "c", "methods": ["nope"]})";
  }
  EXPECT_EQ(run_cli("run " + (dir / "ok.json").string() + " --out-dir " + (dir / "out").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "results.csv"));
  EXPECT_EQ(run_cli("run " + (dir / "bad.json").string()), 2);
  EXPECT_EQ(run_cli("run " + (dir / "missing.json").string()), 3);
  EXPECT_EQ(run_cli("--bogus-flag"), 2);
  EXPECT_EQ(run_cli("generate d-linear-k2-U --n 50 --seed 3 --out " + (dir / "g.csv").string() + " --truth " +
                    (dir / "truth.csv").string()),
            0);
  const Cohort g = load_cohort_csv((dir / "g.csv").string());
  EXPECT_EQ(g.n, 50u);
  EXPECT_EQ(g.d(), 7);
  EXPECT_EQ(run_cli("generate ihdp --out " + (dir / "ihdp.csv").string()), 0);
  EXPECT_EQ(run_cli("oracle-check --instances 50"), 0);
}
