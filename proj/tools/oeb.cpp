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

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "oeb/harness/config.hpp"
#include "oeb/harness/plot.hpp"
#include "oeb/harness/runner.hpp"
#include "oeb/harness/verify.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out;
  int jobs = 1;
  std::int64_t seed = -1;  // -1: keep the config's seed
};

int run_or_sweep(const CommonFlags& flags, bool do_sweep) {
  auto config = oeb::harness::load_config(flags.config_path);
  if (flags.seed >= 0) config.seed = static_cast<std::uint64_t>(flags.seed);
  const std::string out_dir = oeb::harness::resolve_out_dir(flags.out, config.out_dir);
  const auto result = do_sweep ? oeb::harness::sweep(config, out_dir, flags.jobs)
                               : oeb::harness::run_experiment(config, out_dir, flags.jobs);
  std::cout << "wrote " << (result.dir / "per_draw.csv").string() << "\n"
            << "wrote " << (result.dir / "aggregate.csv").string() << "\n";
  if (do_sweep) std::cout << "wrote " << (result.dir / "sweep.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"optimize-and-estimate bandit simulator"};
  app.require_subcommand(1);

  CommonFlags run_flags, sweep_flags;
  auto add_common = [](CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "experiment config file")->required();
    cmd->add_option("--seed", flags.seed, "override the config seed");
    cmd->add_option("--out", flags.out, "output directory");
    cmd->add_option("--jobs", flags.jobs, "parallel workers for repetitions")
        ->check(CLI::PositiveNumber);
  };
  auto* run_cmd = app.add_subcommand("run", "run the multi-period experiment");
  add_common(run_cmd, run_flags);
  auto* sweep_cmd = app.add_subcommand("sweep", "run and tabulate the final period");
  add_common(sweep_cmd, sweep_flags);

  std::string suite;
  std::string verify_out;
  std::int64_t verify_seed = -1;
  auto* verify_cmd = app.add_subcommand("verify", "run a property suite");
  verify_cmd->add_option("--suite", suite,
                         "pareto | estimators | bounds | prop1 | appendixC")
      ->required();
  verify_cmd->add_option("--out", verify_out, "directory for suite artifacts");
  verify_cmd->add_option("--seed", verify_seed, "suite seed");

  std::string plot_input, plot_kind, plot_out, plot_column;
  auto* plot_cmd = app.add_subcommand("plot", "render an aggregate CSV to SVG");
  plot_cmd->add_option("csv", plot_input, "aggregate/sweep/inclusion CSV")->required();
  plot_cmd->add_option("--kind", plot_kind,
                       "reward-variance | bias-vs-reward | inclusion-check")
      ->required();
  plot_cmd->add_option("--out", plot_out, "output SVG path (default plot.svg)");
  plot_cmd->add_option("--column", plot_column, "y column for aggregate plots");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run_cmd) return run_or_sweep(run_flags, false);
    if (*sweep_cmd) return run_or_sweep(sweep_flags, true);
    if (*verify_cmd) {
      const std::uint64_t seed =
          verify_seed >= 0 ? static_cast<std::uint64_t>(verify_seed)
                           : oeb::harness::verify_detail::kDefaultSeed;
      const auto report = oeb::harness::verify_suite(suite, seed, verify_out);
      std::cout << oeb::harness::report_json(report);
      return report.pass ? 0 : 2;
    }
    if (*plot_cmd) {
      const auto table = oeb::harness::read_table(plot_input);
      const auto kind = oeb::harness::parse_plot_kind(plot_kind);
      const std::string out = plot_out.empty() ? "plot.svg" : plot_out;
      oeb::harness::plot_to_file(table, kind, out, plot_column);
      std::cout << "wrote " << out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
