/*
 * Copyright 2026 The oebsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oeb/harness/config.hpp"
#include "oeb/harness/plot.hpp"
#include "oeb/harness/runner.hpp"
#include "oeb/harness/verify.hpp"

using namespace oeb;
using harness::ConfigError;

namespace {

const char* kSmallConfig = R"(
# two strategies over a toy synthetic population
[environment]
kind = synth
d = 2
periods = 2
per_period = 60
weight_seed = 3
context_seed = 4
noise = bernoulli

[model]
kind = ridge
penalty = 1e-3

[run]
reps = 3
budget_fraction = 0.1
seed = 77

[strategy]
kind = entropy
beta = 0.1,0.6

[strategy]
kind = srs
)";

harness::ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return harness::parse_config(in, "test");
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("oeb_harness_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

std::size_t count_occurrences(const std::string& text, const std::string& needle) {
  std::size_t count = 0, pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    ++count;
    pos += needle.size();
  }
  return count;
}

}  // namespace

TEST_CASE("config parsing round trip") {
  const auto config = parse(kSmallConfig);
  CHECK(config.env_kind == harness::ExperimentConfig::EnvKind::kSynth);
  CHECK(config.synth.per_period == 60);
  CHECK(config.reps == 3);
  CHECK(config.seed == 77);
  REQUIRE(config.strategies.size() == 2);
  CHECK(config.strategies[0].params == std::vector<double>{0.1, 0.6});
}

TEST_CASE("config rejects unknown keys with a field path") {
  try {
    parse("[environment]\nkind = synth\nbogus = 1\n[strategy]\nkind = srs\n");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("environment.bogus") != std::string::npos);
  }
}

TEST_CASE("config rejects unknown sections, duplicates and bad values") {
  CHECK_THROWS_AS(parse("[nonsense]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[environment]\nkind = synth\nkind = synth\n"), ConfigError);
  CHECK_THROWS_AS(parse("[environment]\nkind = synth\n"), ConfigError);  // no strategy
  CHECK_THROWS_AS(
      parse("[environment]\nkind = synth\n[strategy]\nkind = quantum\n"), ConfigError);
  CHECK_THROWS_AS(
      parse("[environment]\nkind = synth\n[strategy]\nkind = entropy\nbeta = -1\n"),
      ConfigError);
  CHECK_THROWS_AS(
      parse("[environment]\nkind = synth\n[run]\nbudget_fraction = 1.2\n"
            "[strategy]\nkind = srs\n"),
      ConfigError);
}

TEST_CASE("degenerate run produces one SRS row per rep") {
  auto config = parse(kSmallConfig);
  config.reps = 1;
  config.synth.periods = 1;
  config.strategies.resize(1);
  config.strategies[0].params = {0.5};
  const auto dir = fresh_dir("degenerate");
  const auto result = harness::run_experiment(config, dir.string());
  REQUIRE(result.per_draw.size() == 1);
  CHECK(result.per_draw[0].period == 0);
  CHECK(result.per_draw[0].k == 6);  // 0.1 * 60
  CHECK(result.per_draw[0].reward >= 0.0);
  CHECK(result.per_draw[0].reward <= result.per_draw[0].k);
  std::filesystem::remove_all(dir);
}

TEST_CASE("runs are byte-identical across repeats and job counts") {
  const auto config = parse(kSmallConfig);
  const auto d1 = fresh_dir("det1"), d2 = fresh_dir("det2"), d3 = fresh_dir("det3");
  harness::run_experiment(config, d1.string(), 1);
  harness::run_experiment(config, d2.string(), 1);
  harness::run_experiment(config, d3.string(), 3);
  CHECK(slurp(d1 / "per_draw.csv") == slurp(d2 / "per_draw.csv"));
  CHECK(slurp(d1 / "per_draw.csv") == slurp(d3 / "per_draw.csv"));
  CHECK(slurp(d1 / "aggregate.csv") == slurp(d3 / "aggregate.csv"));
  CHECK(slurp(d1 / "meta.json") == slurp(d3 / "meta.json"));
  for (const auto& d : {d1, d2, d3}) std::filesystem::remove_all(d);
}

TEST_CASE("aggregates are recomputable from the per-draw csv") {
  const auto config = parse(kSmallConfig);
  const auto dir = fresh_dir("refold");
  harness::run_experiment(config, dir.string());

  const auto table = harness::read_table((dir / "per_draw.csv").string());
  std::vector<harness::PerDrawRow> rows;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    harness::PerDrawRow row;
    row.rep = static_cast<int>(table.number(i, table.column("rep")));
    row.period = static_cast<int>(table.number(i, table.column("period")));
    row.strategy = table.rows[i][table.column("strategy")];
    row.param = table.number(i, table.column("param"));
    row.k = static_cast<int>(table.number(i, table.column("K")));
    row.n = static_cast<int>(table.number(i, table.column("N")));
    row.reward = table.number(i, table.column("reward"));
    row.pop_true = table.number(i, table.column("pop_true"));
    row.est_model = table.number(i, table.column("est_model"));
    row.est_ipw = table.number(i, table.column("est_ipw"));
    row.est_dr = table.number(i, table.column("est_dr"));
    rows.push_back(std::move(row));
  }
  const auto refold = harness::aggregate_rows(rows);
  const auto rebuilt = dir / "aggregate_rebuilt.csv";
  harness::write_aggregate_csv(rebuilt, refold);
  CHECK(slurp(rebuilt) == slurp(dir / "aggregate.csv"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("sweep table reward is nonincreasing in beta end to end") {
  auto config = parse(kSmallConfig);
  config.reps = 6;
  config.synth.per_period = 300;
  config.synth.noise = NoiseSpec::none();
  config.strategies.resize(1);
  config.strategies[0].params = {0.05, 0.3, 2.0};
  const auto dir = fresh_dir("sweep");
  const auto result = harness::sweep(config, dir.string(), 2);
  REQUIRE(result.aggregate.size() == 3);  // final period only
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& row : result.aggregate) {  // map order: ascending beta
    CHECK(row.mean_reward <= prev + 1e-12);
    prev = row.mean_reward;
  }
  CHECK(std::filesystem::exists(dir / "sweep.csv"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("csv environment flows through the harness") {
  const auto dir = fresh_dir("csvenv");
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "data.csv");
    out << "x1,x2,y\n";
    for (int i = 0; i < 40; ++i)
      out << 0.1 * (i % 10) << ',' << 0.05 * i << ',' << (i % 7) / 7.0 << "\n";
  }
  std::string text = std::string("[environment]\nkind = csv\npath = ") +
                     (dir / "data.csv").string() +
                     "\nfeatures = x1,x2\nreward = y\nperiods = 2\n"
                     "partition_seed = 5\n[run]\nreps = 2\nbudget_fraction = 0.2\n"
                     "seed = 3\n[strategy]\nkind = mps\n";
  const auto config = parse(text);
  const auto result = harness::run_experiment(config, (dir / "out").string());
  CHECK(result.per_draw.size() == 4);  // 2 reps x 2 periods
  for (const auto& row : result.per_draw) CHECK(row.k == 4);  // 0.2 * 20
  std::filesystem::remove_all(dir);
}

TEST_CASE("knn and noisy-oracle models run through the harness") {
  for (const char* model : {"knn", "noisy-oracle"}) {
    auto config = parse(std::string("[environment]\nkind = synth\nd = 2\nperiods = 2\n"
                                    "per_period = 80\n[model]\nkind = ") +
                        model +
                        "\nk = 4\nsigma = 0.05\n[run]\nreps = 2\n"
                        "budget_fraction = 0.1\nseed = 5\n[strategy]\nkind = entropy\n"
                        "beta = 0.4\n");
    const auto dir = fresh_dir(std::string("model_") + model);
    const auto result = harness::run_experiment(config, dir.string());
    CHECK(result.per_draw.size() == 4);
    for (const auto& row : result.per_draw) {
      CHECK(std::isfinite(row.est_ipw));
      CHECK(std::isfinite(row.est_dr));
    }
    std::filesystem::remove_all(dir);
  }
}

TEST_CASE("plot renders an empty table with a no-data annotation") {
  harness::Table table;
  table.header = {"strategy", "param",    "period",   "mean_reward", "reward_ci95",
                  "var_model", "var_ipw", "var_dr",   "bias_model",  "bias_ipw",
                  "bias_dr",   "n_reps"};
  const auto svg = harness::plot_svg(table, harness::PlotKind::kRewardVariance);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("no data") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
}

TEST_CASE("plot draws one polyline per strategy with matching legend") {
  harness::Table table;
  table.header = {"strategy", "param", "period", "mean_reward", "reward_ci95",
                  "var_model", "var_ipw", "var_dr", "bias_model", "bias_ipw",
                  "bias_dr", "n_reps"};
  table.rows = {
      {"entropy", "0.1", "1", "10", "1", "5", "7", "6", "0", "0", "0", "8"},
      {"entropy", "0.5", "1", "8", "1", "4", "5", "4", "0", "0", "0", "8"},
      {"srs", "0", "1", "6", "1", "3", "4", "3", "0", "0", "0", "8"},
  };
  const auto svg = harness::plot_svg(table, harness::PlotKind::kRewardVariance);
  CHECK(count_occurrences(svg, "<polyline") == 2);
  CHECK(svg.find(">entropy</text>") != std::string::npos);
  CHECK(svg.find(">srs</text>") != std::string::npos);
}

TEST_CASE("plot inclusion-check draws scatter plus identity line") {
  harness::Table table;
  table.header = {"id", "target", "empirical"};
  table.rows = {{"0", "0.2", "0.21"}, {"1", "0.5", "0.49"}, {"2", "0.8", "0.8"}};
  const auto svg = harness::plot_svg(table, harness::PlotKind::kInclusionCheck);
  CHECK(svg.find("stroke-dasharray") != std::string::npos);  // identity line
  CHECK(count_occurrences(svg, "<circle") == 3);
}

TEST_CASE("plot rejects schema mismatches and unknown kinds") {
  harness::Table table;
  table.header = {"foo", "bar"};
  CHECK_THROWS_AS(harness::plot_svg(table, harness::PlotKind::kRewardVariance),
                  std::invalid_argument);
  CHECK_THROWS_AS(harness::parse_plot_kind("pie"), std::invalid_argument);
}

TEST_CASE("verify dispatch rejects unknown suites") {
  CHECK_THROWS_AS(harness::verify_suite("nope"), std::invalid_argument);
}

TEST_CASE("output directory resolution precedence") {
  CHECK(harness::resolve_out_dir("flag", "config") == "flag");
  CHECK(harness::resolve_out_dir("", "config") == "config");
  ::setenv("OEB_OUT_DIR", "/tmp/oeb_env_dir", 1);
  CHECK(harness::resolve_out_dir("", "") == "/tmp/oeb_env_dir");
  ::unsetenv("OEB_OUT_DIR");
  CHECK(harness::resolve_out_dir("", "") == ".");
}

TEST_CASE("verify suites run clean at a non-default seed") {
  for (const char* suite : {"appendixC", "prop1"}) {
    const auto report = harness::verify_suite(suite, 0xFEED);
    CHECK(report.pass);
    CHECK(!report.checks.empty());
  }
}
