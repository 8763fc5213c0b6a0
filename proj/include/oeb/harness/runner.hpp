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

#ifndef OEB_HARNESS_RUNNER_HPP
#define OEB_HARNESS_RUNNER_HPP

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "oeb/core.hpp"
#include "oeb/design.hpp"
#include "oeb/env.hpp"
#include "oeb/estimators.hpp"
#include "oeb/harness/config.hpp"
#include "oeb/harness/table.hpp"
#include "oeb/model.hpp"
#include "oeb/rng.hpp"
#include "oeb/sampler.hpp"

namespace oeb::harness {

/// One line of the per-draw CSV.
struct PerDrawRow {
  int rep = 0;
  int period = 0;
  std::string strategy;
  double param = 0.0;
  int k = 0;
  int n = 0;
  double reward = 0.0;
  double pop_true = 0.0;
  double est_model = 0.0;
  double est_ipw = 0.0;
  double est_dr = 0.0;
};

/// One line of the aggregate CSV: moments across repetitions for a
/// (strategy, param, period) cell.
struct AggregateRow {
  std::string strategy;
  double param = 0.0;
  int period = 0;
  double mean_reward = 0.0;
  double reward_ci95 = 0.0;
  double var_model = 0.0;
  double var_ipw = 0.0;
  double var_dr = 0.0;
  double bias_model = 0.0;
  double bias_ipw = 0.0;
  double bias_dr = 0.0;
  int n_reps = 0;
};

struct RunResult {
  std::filesystem::path dir;
  std::vector<PerDrawRow> per_draw;
  std::vector<AggregateRow> aggregate;
};

namespace detail {

struct Arm {
  design::StrategyConfig config;
  std::string label;
  double param = 0.0;
};

inline std::vector<Arm> expand_arms(const ExperimentConfig& config) {
  std::vector<Arm> arms;
  for (const auto& grid : config.strategies) {
    for (double p : grid.params) {
      Arm arm;
      arm.config = grid.base;
      arm.config.beta = p > 0.0 ? p : arm.config.beta;
      arm.config.abs.alpha = p;
      arm.label = design::StrategyConfig::kind_name(grid.base.kind);
      arm.param = p;
      arms.push_back(std::move(arm));
    }
  }
  return arms;
}

inline std::vector<Period> build_periods(const ExperimentConfig& config) {
  std::vector<Period> periods =
      config.env_kind == ExperimentConfig::EnvKind::kSynth
          ? env::synth_generate(config.synth)
          : env::csv_ingest(config.csv_path, config.csv);
  for (auto& p : periods) {
    const int n = p.size();
    int k = static_cast<int>(std::llround(config.budget_fraction * n));
    k = std::max(1, std::min(k, n));
    p = p.with_budget(k);
  }
  return periods;
}

/// Runs every arm through all periods for one repetition. Reward draws and
/// Pareto uniforms are keyed by (seed, rep, period), shared across arms, so
/// strategies are compared on common random numbers.
inline std::vector<PerDrawRow> simulate_rep(const ExperimentConfig& config,
                                            const std::vector<Period>& periods,
                                            const std::vector<Arm>& arms, int rep) {
  const std::uint64_t master = config.seed;
  const auto rep64 = static_cast<std::uint64_t>(rep);

  std::vector<IdValueMap> realized(periods.size());
  for (std::size_t t = 0; t < periods.size(); ++t)
    realized[t] =
        realize_rewards(periods[t], rng::key({master, rng::kTagReward, rep64,
                                              static_cast<std::uint64_t>(t)}));

  std::vector<PerDrawRow> rows;
  rows.reserve(arms.size() * periods.size());
  model::FitParams fit_params = config.fit_params;
  fit_params.oracle_seed = rng::key({master, rng::kTagModelNoise, rep64});

  for (std::size_t a = 0; a < arms.size(); ++a) {
    const Arm& arm = arms[a];
    model::TrainingSet train;
    for (std::size_t t = 0; t < periods.size(); ++t) {
      const Period& period = periods[t];
      const auto t64 = static_cast<std::uint64_t>(t);

      IdValueMap predictions;
      if (t == 0) {
        // First period is uniform random; no model exists yet, so estimates
        // fall back to zero predictions (DR then coincides with IPW).
        for (const auto& obs : period.observations) predictions[obs.id] = 0.0;
      } else {
        const auto mdl = model::fit(config.model_kind, train, fit_params);
        predictions = model::predict_clamped(
            mdl, std::span<const Observation>(period.observations), config.clamp_floor);
      }

      InclusionPlan plan =
          t == 0 ? design::srs_plan(period)
                 : design::make_plan(arm.config, period, predictions,
                                     rng::key({master, rng::kTagCluster, rep64, t64,
                                               static_cast<std::uint64_t>(a)}));

      const std::uint64_t draw_seed = rng::key({master, rng::kTagPareto, rep64, t64});
      SampleDraw draw = period.budget == 1 ? sampler::draw_sequential(plan, draw_seed)
                                           : sampler::draw_pareto(plan, draw_seed);
      draw = attach_rewards(draw, realized[t]);

      PerDrawRow row;
      row.rep = rep;
      row.period = period.index;
      row.strategy = arm.label;
      row.param = arm.param;
      row.k = period.budget;
      row.n = period.size();
      row.reward = draw_reward(draw);
      row.pop_true = period.population_total();
      row.est_model = estimators::estimate_model(draw, predictions);
      row.est_ipw = estimators::estimate_ipw(draw);
      row.est_dr = estimators::estimate_dr(draw, predictions);
      rows.push_back(std::move(row));

      for (const auto& obs : period.observations)
        if (draw.selected.count(obs.id)) train.add(obs.context, realized[t].at(obs.id));
    }
  }
  return rows;
}

}  // namespace detail

/// Collapses per-draw rows into per-(strategy, param, period) aggregates.
/// Pure fold over the rows; re-runnable from the per-draw CSV.
inline std::vector<AggregateRow> aggregate_rows(const std::vector<PerDrawRow>& rows) {
  struct Cell {
    Welford reward, model, ipw, dr;
    double bias_model = 0.0, bias_ipw = 0.0, bias_dr = 0.0;
  };
  std::map<std::tuple<std::string, double, int>, Cell> cells;
  for (const auto& row : rows) {
    auto& cell = cells[{row.strategy, row.param, row.period}];
    cell.reward.add(row.reward);
    cell.model.add(row.est_model);
    cell.ipw.add(row.est_ipw);
    cell.dr.add(row.est_dr);
    cell.bias_model += row.est_model - row.pop_true;
    cell.bias_ipw += row.est_ipw - row.pop_true;
    cell.bias_dr += row.est_dr - row.pop_true;
  }
  std::vector<AggregateRow> out;
  out.reserve(cells.size());
  for (const auto& [key, cell] : cells) {
    AggregateRow row;
    std::tie(row.strategy, row.param, row.period) = key;
    row.n_reps = cell.reward.n;
    row.mean_reward = cell.reward.mean;
    row.reward_ci95 =
        row.n_reps > 1 ? 1.96 * std::sqrt(cell.reward.variance() / row.n_reps) : 0.0;
    row.var_model = cell.model.variance();
    row.var_ipw = cell.ipw.variance();
    row.var_dr = cell.dr.variance();
    row.bias_model = cell.bias_model / row.n_reps;
    row.bias_ipw = cell.bias_ipw / row.n_reps;
    row.bias_dr = cell.bias_dr / row.n_reps;
    out.push_back(std::move(row));
  }
  return out;
}

inline const char* kPerDrawHeader =
    "rep,period,strategy,param,K,N,reward,pop_true,est_model,est_ipw,est_dr";
inline const char* kAggregateHeader =
    "strategy,param,period,mean_reward,reward_ci95,var_model,var_ipw,var_dr,"
    "bias_model,bias_ipw,bias_dr,n_reps";

inline void write_per_draw_csv(const std::filesystem::path& path,
                               const std::vector<PerDrawRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kPerDrawHeader << "\n";
  for (const auto& r : rows) {
    out << r.rep << ',' << r.period << ',' << r.strategy << ',' << format_number(r.param)
        << ',' << r.k << ',' << r.n << ',' << format_number(r.reward) << ','
        << format_number(r.pop_true) << ',' << format_number(r.est_model) << ','
        << format_number(r.est_ipw) << ',' << format_number(r.est_dr) << '\n';
  }
}

inline void write_aggregate_csv(const std::filesystem::path& path,
                                const std::vector<AggregateRow>& rows,
                                bool with_period = true) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  if (with_period) {
    out << kAggregateHeader << "\n";
  } else {
    out << "strategy,param,mean_reward,reward_ci95,var_model,var_ipw,var_dr,"
           "bias_model,bias_ipw,bias_dr,n_reps\n";
  }
  for (const auto& r : rows) {
    out << r.strategy << ',' << format_number(r.param) << ',';
    if (with_period) out << r.period << ',';
    out << format_number(r.mean_reward) << ',' << format_number(r.reward_ci95) << ','
        << format_number(r.var_model) << ',' << format_number(r.var_ipw) << ','
        << format_number(r.var_dr) << ',' << format_number(r.bias_model) << ','
        << format_number(r.bias_ipw) << ',' << format_number(r.bias_dr) << ','
        << r.n_reps << '\n';
  }
}

/**
 * Runs the full multi-period protocol: period 0 sampled uniformly at random,
 * later periods planned per strategy from a model fit on that arm's
 * accumulated selections, drawn by Pareto (sequential when K = 1).
 * Repetitions run in parallel across `jobs` workers; every stream is keyed
 * by (seed, rep, period), so output is byte-identical for any job count.
 *
 * Writes per_draw.csv, aggregate.csv and meta.json into out_dir.
 */
inline RunResult run_experiment(const ExperimentConfig& config,
                                const std::string& out_dir, int jobs = 1) {
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  const auto periods = detail::build_periods(config);
  const auto arms = detail::expand_arms(config);

  std::vector<std::vector<PerDrawRow>> by_rep(config.reps);
  const int workers = std::min(jobs, config.reps);
  if (workers <= 1) {
    for (int rep = 0; rep < config.reps; ++rep)
      by_rep[rep] = detail::simulate_rep(config, periods, arms, rep);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::vector<std::exception_ptr> errors(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (int rep = next.fetch_add(1); rep < config.reps; rep = next.fetch_add(1))
            by_rep[rep] = detail::simulate_rep(config, periods, arms, rep);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  RunResult result;
  result.dir = out_dir;
  for (auto& rows : by_rep)
    result.per_draw.insert(result.per_draw.end(), rows.begin(), rows.end());
  result.aggregate = aggregate_rows(result.per_draw);

  std::filesystem::create_directories(result.dir);
  write_per_draw_csv(result.dir / "per_draw.csv", result.per_draw);
  write_aggregate_csv(result.dir / "aggregate.csv", result.aggregate);

  std::ofstream meta(result.dir / "meta.json");
  meta << "{\n  \"seed\": " << config.seed << ",\n  \"reps\": " << config.reps
       << ",\n  \"budget_fraction\": " << format_number(config.budget_fraction);
  if (config.env_kind == ExperimentConfig::EnvKind::kCsv) {
    meta << ",\n  \"partition_seed\": " << config.csv.partition_seed;
  } else {
    meta << ",\n  \"weight_seed\": " << config.synth.weight_seed
         << ",\n  \"context_seed\": " << config.synth.context_seed;
  }
  meta << ",\n  \"periods\": [";
  for (std::size_t t = 0; t < periods.size(); ++t) {
    meta << (t ? ", " : "") << "{\"index\": " << periods[t].index
         << ", \"n\": " << periods[t].size() << ", \"k\": " << periods[t].budget
         << ", \"pop_true\": " << format_number(periods[t].population_total()) << "}";
  }
  meta << "]\n}\n";
  return result;
}

/// Reward-variance sweep: the final-period aggregate, one row per
/// (strategy, parameter). Written to sweep.csv alongside the run outputs.
inline RunResult sweep(const ExperimentConfig& config, const std::string& out_dir,
                       int jobs = 1) {
  RunResult result = run_experiment(config, out_dir, jobs);
  int last = 0;
  for (const auto& row : result.aggregate) last = std::max(last, row.period);
  std::vector<AggregateRow> final_rows;
  for (const auto& row : result.aggregate)
    if (row.period == last) final_rows.push_back(row);
  write_aggregate_csv(result.dir / "sweep.csv", final_rows, /*with_period=*/false);
  result.aggregate = std::move(final_rows);
  return result;
}

}  // namespace oeb::harness

#endif  // OEB_HARNESS_RUNNER_HPP
