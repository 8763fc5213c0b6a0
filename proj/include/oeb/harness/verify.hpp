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

#ifndef OEB_HARNESS_VERIFY_HPP
#define OEB_HARNESS_VERIFY_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "oeb/core.hpp"
#include "oeb/design.hpp"
#include "oeb/estimators.hpp"
#include "oeb/harness/table.hpp"
#include "oeb/oracle.hpp"
#include "oeb/rng.hpp"
#include "oeb/sampler.hpp"

namespace oeb::harness {

struct CheckResult {
  std::string name;
  bool pass = false;
  double value = 0.0;  // measured quantity
  double limit = 0.0;  // threshold it is compared against
};

struct SuiteReport {
  std::string suite;
  bool pass = true;
  std::vector<CheckResult> checks;

  void add(std::string name, double value, double limit) {
    const bool ok = value <= limit;
    checks.push_back({std::move(name), ok, value, limit});
    pass = pass && ok;
  }
};

inline std::string report_json(const SuiteReport& report) {
  std::string out = "{\n  \"suite\": \"" + report.suite + "\",\n  \"pass\": ";
  out += report.pass ? "true" : "false";
  out += ",\n  \"checks\": [\n";
  for (std::size_t i = 0; i < report.checks.size(); ++i) {
    const auto& c = report.checks[i];
    out += "    {\"name\": \"" + c.name + "\", \"pass\": ";
    out += c.pass ? "true" : "false";
    out += ", \"value\": " + format_number(c.value);
    out += ", \"limit\": " + format_number(c.limit) + "}";
    out += i + 1 < report.checks.size() ? ",\n" : "\n";
  }
  out += "  ]\n}\n";
  return out;
}

namespace verify_detail {

inline constexpr std::uint64_t kDefaultSeed = 0x0eb5eed;

/// Random explicit design over ids 0..n-1: all size-k subsets with random
/// positive probabilities.
inline oracle::DesignDistribution random_design(int n, int k, rng::Stream& stream) {
  oracle::DesignDistribution design;
  design.k = k;
  std::vector<int> pick(k);
  for (int i = 0; i < k; ++i) pick[i] = i;
  double total = 0.0;
  while (true) {
    oracle::DesignDistribution::Outcome outcome;
    outcome.subset.assign(pick.begin(), pick.end());
    outcome.prob = 0.01 + stream.next_unit();
    total += outcome.prob;
    design.support.push_back(std::move(outcome));
    int i = k - 1;
    while (i >= 0 && pick[i] == n - k + i) --i;
    if (i < 0) break;
    ++pick[i];
    for (int j = i + 1; j < k; ++j) pick[j] = pick[j - 1] + 1;
  }
  for (auto& o : design.support) o.prob /= total;
  design.validate();
  return design;
}

/**
 * Systematic draw with exact first-order inclusion probabilities: lay the
 * probabilities end to end over [0, K] and select the ids whose segment
 * contains u + j for j = 0..K-1. Valid for any plan whose probabilities sum
 * to K. Used as the exact fixed-size design in bound checks.
 */
inline SampleDraw systematic_draw(const InclusionPlan& plan, std::uint64_t seed) {
  plan.validate();
  rng::Stream stream(seed, {rng::kTagSequential});
  const double u = stream.next_unit();
  SampleDraw draw;
  draw.plan = plan;
  double cum = 0.0;
  int j = 0;
  for (const auto& [id, p] : plan.probs) {
    cum += p;
    while (j < plan.budget && u + j < cum) {
      draw.selected.insert(id);
      ++j;
    }
  }
  // Cumulative rounding can leave the final target uncovered; fill from the
  // tail with ids not yet selected.
  for (auto it = plan.probs.rbegin();
       it != plan.probs.rend() && static_cast<int>(draw.selected.size()) < plan.budget;
       ++it)
    draw.selected.insert(it->first);
  return draw;
}

inline IdValueMap random_values(const std::vector<ObsId>& ids, double lo, double hi,
                                rng::Stream& stream) {
  IdValueMap out;
  for (ObsId id : ids) out[id] = lo + (hi - lo) * stream.next_unit();
  return out;
}

inline std::vector<ObsId> id_range(int n) {
  std::vector<ObsId> ids(n);
  for (int i = 0; i < n; ++i) ids[i] = i;
  return ids;
}

}  // namespace verify_detail

/// Inclusion-probability identities on random explicit fixed-size designs:
/// sum-to-K, the pairwise-sum identity, and the variance identity.
inline SuiteReport verify_appendix_c(std::uint64_t seed = verify_detail::kDefaultSeed,
                                     int designs = 100) {
  SuiteReport report;
  report.suite = "appendixC";
  rng::Stream stream(seed, {0xAC});
  double worst_sum = 0.0, worst_pair = 0.0, worst_var = 0.0;
  for (int i = 0; i < designs; ++i) {
    const int n = 2 + static_cast<int>(stream.next_below(9));        // 2..10
    const int k = 1 + static_cast<int>(stream.next_below(std::min(n, 4)));
    const auto design = verify_detail::random_design(n, k, stream);
    const auto tables = oracle::enumerate_inclusion(design);
    double sum = 0.0;
    for (const auto& [id, p] : tables.first) sum += p;
    worst_sum = std::max(worst_sum, std::abs(sum - k));
    for (const auto& [xid, px] : tables.first) {
      double pair_sum = 0.0, var_sum = 0.0;
      for (const auto& [zid, pz] : tables.first) {
        if (zid == xid) continue;
        auto it = tables.joint.find(estimators::make_pair_key(xid, zid));
        const double pxz = it == tables.joint.end() ? 0.0 : it->second;
        pair_sum += pxz;
        var_sum += px * pz - pxz;
      }
      worst_pair = std::max(worst_pair, std::abs(pair_sum - (k - 1) * px));
      worst_var = std::max(worst_var, std::abs(var_sum - px * (1.0 - px)));
    }
  }
  report.add("sum_to_K", worst_sum, 1e-9);
  report.add("pairwise_sum_identity", worst_pair, 1e-9);
  report.add("variance_identity", worst_var, 1e-9);
  return report;
}

/// Estimator exactness on random explicit designs: unbiasedness of IPW/DR
/// under exact probabilities, the closed-form bias of all three estimators
/// against enumeration, and the closed-form variance against enumeration.
inline SuiteReport verify_estimators(std::uint64_t seed = verify_detail::kDefaultSeed,
                                     int designs = 100) {
  SuiteReport report;
  report.suite = "estimators";
  rng::Stream stream(seed, {0xE5});
  double worst_unbiased = 0.0, worst_bias = 0.0, worst_var = 0.0;
  for (int i = 0; i < designs; ++i) {
    const int n = 2 + static_cast<int>(stream.next_below(7));  // 2..8
    const int k = 1 + static_cast<int>(stream.next_below(std::min(n, 4)));
    const auto design = verify_detail::random_design(n, k, stream);
    const auto ids = verify_detail::id_range(n);
    const auto rewards = verify_detail::random_values(ids, 0.0, 1.0, stream);
    const auto predictions = verify_detail::random_values(ids, 0.0, 1.0, stream);
    const auto tables = oracle::enumerate_inclusion(design);
    double pop = 0.0;
    for (const auto& [id, r] : rewards) pop += r;

    // Exact probabilities: IPW and DR means hit the population total.
    const auto exact = oracle::enumerate_estimator_moments(design, rewards, predictions,
                                                           tables.first);
    worst_unbiased = std::max(worst_unbiased, std::abs(exact.ipw.mean - pop));
    worst_unbiased = std::max(worst_unbiased, std::abs(exact.dr.mean - pop));

    // Perturbed probabilities: closed-form bias equals enumerated bias.
    IdValueMap pi_hat;
    for (const auto& [id, p] : tables.first)
      pi_hat[id] = std::min(1.0, p * (0.7 + 0.6 * stream.next_unit()));
    const auto skewed =
        oracle::enumerate_estimator_moments(design, rewards, predictions, pi_hat);
    const auto bias =
        estimators::bias_closed_form(rewards, predictions, tables.first, pi_hat);
    worst_bias = std::max(worst_bias,
                          std::abs(skewed.model.mean - pop - bias.bias_model));
    worst_bias = std::max(worst_bias, std::abs(skewed.ipw.mean - pop - bias.bias_ipw));
    worst_bias = std::max(worst_bias, std::abs(skewed.dr.mean - pop - bias.bias_dr));

    // Closed-form variance equals enumerated variance when pi_hat = pi.
    estimators::VarianceInputs inputs;
    inputs.first_order = tables.first;
    inputs.joint = tables.joint;
    inputs.theta = rewards;
    worst_var = std::max(worst_var,
                         std::abs(estimators::variance_closed_form(inputs) -
                                  exact.ipw.variance));
    for (auto& [id, t] : inputs.theta) t -= predictions.at(id);
    worst_var = std::max(worst_var,
                         std::abs(estimators::variance_closed_form(inputs) -
                                  exact.dr.variance));
  }
  report.add("unbiasedness_exact_pi", worst_unbiased, 1e-9);
  report.add("bias_closed_form", worst_bias, 1e-9);
  report.add("variance_closed_form", worst_var, 1e-9);
  return report;
}

/// Closed-form optimality against the projected-gradient oracle at K = 1.
inline SuiteReport verify_prop1(std::uint64_t seed = verify_detail::kDefaultSeed,
                                int instances = 50) {
  SuiteReport report;
  report.suite = "prop1";
  rng::Stream stream(seed, {0x91});
  double worst_gap_ent = 0.0, worst_gap_kl = 0.0, worst_short = 0.0;
  for (int i = 0; i < instances; ++i) {
    const int n = 2 + static_cast<int>(stream.next_below(11));  // 2..12
    const double beta = 0.05 + 4.95 * stream.next_unit();
    const auto ids = verify_detail::id_range(n);
    const auto predictions = verify_detail::random_values(ids, 0.01, 1.0, stream);

    const auto ent_closed = design::entropy_plan(predictions, beta, 1);
    const double ent_val =
        oracle::objective_value(oracle::Objective::kEntropy, predictions, beta,
                                ent_closed.probs);
    const auto ent_pga = oracle::numeric_maximize(oracle::Objective::kEntropy,
                                                  predictions, beta, 1e-10);
    const double ent_pga_val =
        oracle::objective_value(oracle::Objective::kEntropy, predictions, beta, ent_pga);
    worst_gap_ent = std::max(worst_gap_ent, std::abs(ent_val - ent_pga_val));
    worst_short = std::max(worst_short, ent_pga_val - ent_val);

    const auto kl_closed = design::kl_plan(predictions, beta, 1);
    const double kl_val = oracle::objective_value(oracle::Objective::kKl, predictions,
                                                  beta, kl_closed.probs);
    const auto kl_pga =
        oracle::numeric_maximize(oracle::Objective::kKl, predictions, beta, 1e-10);
    const double kl_pga_val =
        oracle::objective_value(oracle::Objective::kKl, predictions, beta, kl_pga);
    worst_gap_kl = std::max(worst_gap_kl, std::abs(kl_val - kl_pga_val));
    worst_short = std::max(worst_short, kl_pga_val - kl_val);
  }
  report.add("entropy_objective_gap", worst_gap_ent, 1e-5);
  report.add("kl_objective_gap", worst_gap_kl, 1e-5);
  report.add("oracle_never_beats_closed_form", worst_short, 1e-6);
  return report;
}

/// Pareto sampling accuracy: the 101-point softmax design at K = 20, checked
/// against 10,000 empirical draws; forced ids always selected.
inline SuiteReport verify_pareto(std::uint64_t seed = verify_detail::kDefaultSeed,
                                 const std::string& out_dir = "") {
  SuiteReport report;
  report.suite = "pareto";

  IdValueMap weights;
  for (int i = 0; i <= 100; ++i) weights[i] = std::exp(3.0 * i / 100.0);
  const auto plan = design::cap_and_renormalize(weights, 20, {"entropy", 1.0 / 3.0});
  const auto empirical = sampler::empirical_inclusion(plan, 10000, seed);
  double worst = 0.0;
  for (const auto& [id, p] : plan.probs)
    worst = std::max(worst, std::abs(empirical.at(id) - p));
  report.add("softmax_grid_max_abs_dev", worst, 0.02);

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream out(std::filesystem::path(out_dir) / "inclusion_check.csv");
    out << "id,target,empirical\n";
    for (const auto& [id, p] : plan.probs)
      out << id << ',' << format_number(p) << ',' << format_number(empirical.at(id))
          << '\n';
  }

  InclusionPlan forced_plan;
  forced_plan.budget = 2;
  forced_plan.probs = {{0, 1.0}, {1, 0.5}, {2, 0.5}};
  forced_plan.forced = {0};
  forced_plan.tag = {"capped", 0.0};
  const auto freq = sampler::empirical_inclusion(forced_plan, 2000, seed + 1);
  report.add("forced_id_frequency_gap", std::abs(freq.at(0) - 1.0), 0.0);
  return report;
}

/// Variance-bound dominance (entropy and KL), skew monotonicity, and
/// Hoeffding coverage, all under exact fixed-size designs.
inline SuiteReport verify_bounds(std::uint64_t seed = verify_detail::kDefaultSeed,
                                 int instances = 50) {
  SuiteReport report;
  report.suite = "bounds";
  rng::Stream stream(seed, {0xB0});

  int violations = 0;
  double worst_ratio = 0.0;
  int accepted = 0;
  int attempts = 0;
  while (accepted < instances && attempts < instances * 200) {
    ++attempts;
    const int n = 5 + static_cast<int>(stream.next_below(8));  // 5..12
    const int k = 1 + static_cast<int>(stream.next_below(3));  // 1..3
    const double beta = 0.25 + 3.75 * stream.next_unit();
    const auto ids = verify_detail::id_range(n);
    const auto predictions = verify_detail::random_values(ids, 0.05, 1.0, stream);
    const auto rewards = verify_detail::random_values(ids, 0.0, 1.0, stream);

    estimators::BoundReport ent_bound, kl_bound;
    try {
      ent_bound = estimators::bound_entropy(predictions, beta, k);
      kl_bound = estimators::bound_kl(predictions, beta, k);
    } catch (const std::logic_error&) {
      continue;  // instance violates Assumption 1; draw another
    }
    ++accepted;

    const struct {
      InclusionPlan plan;
      const estimators::BoundReport* bound;
    } cases[2] = {{design::entropy_plan(predictions, beta, k), &ent_bound},
                  {design::kl_plan(predictions, beta, k), &kl_bound}};
    for (const auto& c : cases) {
      Welford ipw_acc, dr_acc;
      const std::uint64_t draw_seed = stream.next_u64();
      for (int trial = 0; trial < 10000; ++trial) {
        const std::uint64_t s = rng::key({draw_seed, static_cast<std::uint64_t>(trial)});
        SampleDraw draw = k == 1 ? sampler::draw_sequential(c.plan, s)
                                 : verify_detail::systematic_draw(c.plan, s);
        draw = attach_rewards(draw, rewards);
        ipw_acc.add(estimators::estimate_ipw(draw));
        dr_acc.add(estimators::estimate_dr(draw, predictions));
      }
      if (ipw_acc.variance() > c.bound->c1) ++violations;
      if (dr_acc.variance() > c.bound->c1_dr) ++violations;
      if (c.bound->c1 > 0.0)
        worst_ratio = std::max(worst_ratio, ipw_acc.variance() / c.bound->c1);
    }
  }
  report.add("bound_violations", violations, 0.0);
  report.add("worst_variance_to_bound_ratio", worst_ratio, 1.0);
  report.add("instances_short_of_target", instances - accepted, 0.0);

  {
    const auto ids = verify_detail::id_range(10);
    const auto predictions = verify_detail::random_values(ids, 0.05, 1.0, stream);
    double prev_ent = std::numeric_limits<double>::infinity();
    double prev_kl = std::numeric_limits<double>::infinity();
    double worst_increase = 0.0;
    for (double beta : {0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0}) {
      const double g_ent =
          estimators::skew_gamma(predictions, beta, estimators::BoundStrategy::kEntropy);
      const double g_kl =
          estimators::skew_gamma(predictions, beta, estimators::BoundStrategy::kKl);
      worst_increase = std::max({worst_increase, g_ent - prev_ent, g_kl - prev_kl});
      prev_ent = g_ent;
      prev_kl = g_kl;
    }
    report.add("gamma_monotone_in_beta", worst_increase, 1e-12);
  }

  {
    // Hoeffding coverage: 500 meta-trials of m = 50 exact sequential draws.
    const auto ids = verify_detail::id_range(10);
    const auto predictions = verify_detail::random_values(ids, 0.2, 1.0, stream);
    const auto rewards = verify_detail::random_values(ids, 0.0, 1.0, stream);
    const double beta = 0.5;
    const int m = 50;
    const auto plan = design::entropy_plan(predictions, beta, 1);
    const double halfwidth = estimators::hoeffding_halfwidth(
        predictions, beta, estimators::BoundStrategy::kEntropy, m, 0.05);
    double pop = 0.0;
    for (const auto& [id, r] : rewards) pop += r;
    int misses = 0;
    for (int meta = 0; meta < 500; ++meta) {
      double mean = 0.0;
      for (int i = 0; i < m; ++i) {
        const auto s = rng::key({seed, 0xC0FEULL, static_cast<std::uint64_t>(meta),
                                 static_cast<std::uint64_t>(i)});
        auto draw = attach_rewards(sampler::draw_sequential(plan, s), rewards);
        mean += estimators::estimate_ipw(draw);
      }
      mean /= m;
      if (std::abs(mean - pop) >= halfwidth) ++misses;
    }
    report.add("hoeffding_violation_rate", misses / 500.0, 0.07);
  }
  return report;
}

/// Dispatch by suite name; throws ConfigError-compatible invalid_argument on
/// unknown names.
inline SuiteReport verify_suite(const std::string& name,
                                std::uint64_t seed = verify_detail::kDefaultSeed,
                                const std::string& out_dir = "") {
  if (name == "pareto") return verify_pareto(seed, out_dir);
  if (name == "estimators") return verify_estimators(seed);
  if (name == "bounds") return verify_bounds(seed);
  if (name == "prop1") return verify_prop1(seed);
  if (name == "appendixC") return verify_appendix_c(seed);
  throw std::invalid_argument("unknown verify suite '" + name + "'");
}

}  // namespace oeb::harness

#endif  // OEB_HARNESS_VERIFY_HPP
