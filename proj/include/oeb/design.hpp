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

#ifndef OEB_DESIGN_HPP
#define OEB_DESIGN_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "oeb/core.hpp"
#include "oeb/rng.hpp"

namespace oeb::design {

/// Which sampling strategy to run, plus its parameters.
struct StrategyConfig {
  enum class Kind { kSrs, kMps, kEntropy, kKl, kAbsLogistic, kAbsExponential };
  Kind kind = Kind::kSrs;
  double beta = 1.0;  // entropy / kl temperature

  struct AbsParams {
    double alpha = 1.0;           // smoothing sharpness
    int clusters = 10;            // H
    double greedy_fraction = 0.1; // Z = round(fraction * K), Z < K
    double trim = 0.0;            // tau, floor on cluster probabilities
  };
  AbsParams abs;

  bool is_abs() const {
    return kind == Kind::kAbsLogistic || kind == Kind::kAbsExponential;
  }

  void validate() const {
    if ((kind == Kind::kEntropy || kind == Kind::kKl) && !(beta > 0.0))
      throw std::invalid_argument("StrategyConfig: beta must be > 0");
    if (is_abs()) {
      if (abs.clusters < 1)
        throw std::invalid_argument("StrategyConfig: clusters must be >= 1");
      if (!(abs.greedy_fraction >= 0.0 && abs.greedy_fraction < 1.0))
        throw std::invalid_argument("StrategyConfig: greedy_fraction outside [0,1)");
      if (!(abs.trim >= 0.0 && abs.trim <= 1.0 / abs.clusters))
        throw std::invalid_argument("StrategyConfig: trim outside [0, 1/H]");
    }
  }

  static const char* kind_name(Kind k) {
    switch (k) {
      case Kind::kSrs: return "srs";
      case Kind::kMps: return "mps";
      case Kind::kEntropy: return "entropy";
      case Kind::kKl: return "kl";
      case Kind::kAbsLogistic: return "abs-logistic";
      case Kind::kAbsExponential: return "abs-exponential";
    }
    return "?";
  }
};

/// Clustering byproduct of an ABS plan: assignment, cluster value means A_h,
/// cluster sampling probabilities, and the greedily forced ids.
struct ClusterPlan {
  std::map<ObsId, int> assignment;
  std::vector<double> centers;        // A_h, mean smoothed value per cluster
  std::vector<double> cluster_probs;  // pi(C_h), sums to 1
  std::set<ObsId> greedy_set;         // D, the top-Z ids
};

namespace detail {

inline void require_positive_budget(int k) {
  if (k < 1) throw std::invalid_argument("budget K must be >= 1");
}

/// Moves probabilities that are exactly 1 into the forced set so the plan
/// invariant (forced == {x : p == 1}) holds.
inline void sweep_forced(InclusionPlan& plan) {
  for (const auto& [id, p] : plan.probs)
    if (p == 1.0) plan.forced.insert(id);
}

}  // namespace detail

/**
 * Scales nonnegative weights to inclusion probabilities summing to K,
 * iteratively forcing any id whose scaled probability exceeds 1 and
 * redistributing the remaining budget K - |F| proportionally over the rest.
 * Terminates in at most N passes.
 *
 * Ids with zero weight cannot be sampled and are dropped from the plan.
 * Requires at least K strictly positive weights.
 */
inline InclusionPlan cap_and_renormalize(const IdValueMap& raw, int k,
                                         StrategyTag tag = {"capped", 0.0}) {
  detail::require_positive_budget(k);
  std::vector<std::pair<ObsId, double>> live;
  live.reserve(raw.size());
  for (const auto& [id, w] : raw) {
    if (w < 0.0 || !std::isfinite(w))
      throw std::invalid_argument("cap_and_renormalize: weight must be finite and >= 0");
    if (w > 0.0) live.emplace_back(id, w);
  }
  if (static_cast<int>(live.size()) < k)
    throw std::invalid_argument("cap_and_renormalize: fewer than K positive weights");

  InclusionPlan plan;
  plan.budget = k;
  plan.tag = std::move(tag);

  // Invariant maintained across passes: #live >= residual budget, hence the
  // forced set always stays strictly below K while live ids remain.
  int residual = k;
  bool changed = true;
  while (changed) {
    changed = false;
    double wsum = 0.0;
    for (const auto& [id, w] : live) wsum += w;
    if (!(wsum > 0.0))
      throw std::invalid_argument("cap_and_renormalize: weight sum underflow");
    const double scale = static_cast<double>(residual) / wsum;
    std::vector<std::pair<ObsId, double>> keep;
    keep.reserve(live.size());
    for (const auto& [id, w] : live) {
      if (w * scale > 1.0) {
        plan.forced.insert(id);
        plan.probs[id] = 1.0;
        --residual;
        changed = true;
      } else {
        keep.emplace_back(id, w);
      }
    }
    live.swap(keep);
    if (!changed) {
      for (const auto& [id, w] : live) plan.probs[id] = w * scale;
    }
  }
  detail::sweep_forced(plan);
  plan.validate();
  return plan;
}

/// Uniform design: every observation gets probability K/N.
inline InclusionPlan srs_plan(const Period& period) {
  period.validate();
  const int k = period.budget;
  const double p = static_cast<double>(k) / period.size();
  InclusionPlan plan;
  plan.budget = k;
  plan.tag = {"srs", 0.0};
  for (const auto& obs : period.observations) plan.probs[obs.id] = p;
  detail::sweep_forced(plan);
  plan.validate();
  return plan;
}

/// Samples proportionally to model predictions, the zero-variance point of
/// the IPW estimator under a perfect model. Predictions must be positive.
inline InclusionPlan mps_plan(const IdValueMap& predictions, int k) {
  detail::require_positive_budget(k);
  for (const auto& [id, v] : predictions)
    if (!(v > 0.0))
      throw std::invalid_argument("mps_plan: prediction must be > 0 for id " +
                                  std::to_string(id));
  return cap_and_renormalize(predictions, k, {"mps", 0.0});
}

// Softmax weights are floored here so extreme temperatures cannot underflow
// an id to probability zero; every observation must stay selectable.
inline constexpr double kWeightFloor = 1e-300;

/**
 * Entropy-regularized design: base weights exp(phi_hat(x)/beta) (a softmax),
 * scaled by K and capped. Weights are computed after subtracting the maximum
 * prediction, which leaves the plan unchanged and avoids overflow.
 */
inline InclusionPlan entropy_plan(const IdValueMap& predictions, double beta, int k) {
  if (!(beta > 0.0)) throw std::invalid_argument("entropy_plan: beta must be > 0");
  detail::require_positive_budget(k);
  if (predictions.empty()) throw std::invalid_argument("entropy_plan: no predictions");
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& [id, v] : predictions) top = std::max(top, v);
  IdValueMap weights;
  for (const auto& [id, v] : predictions)
    weights[id] = std::max(std::exp((v - top) / beta), kWeightFloor);
  return cap_and_renormalize(weights, k, {"entropy", beta});
}

/**
 * KL-regularized design: weights phi_hat(x) * exp(phi_hat(x)/beta), the
 * closed-form optimum that interpolates between model-proportional sampling
 * (beta -> infinity) and greedy selection (beta -> 0).
 */
inline InclusionPlan kl_plan(const IdValueMap& predictions, double beta, int k) {
  if (!(beta > 0.0)) throw std::invalid_argument("kl_plan: beta must be > 0");
  detail::require_positive_budget(k);
  if (predictions.empty()) throw std::invalid_argument("kl_plan: no predictions");
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& [id, v] : predictions) {
    if (!(v > 0.0))
      throw std::invalid_argument("kl_plan: prediction must be > 0 for id " +
                                  std::to_string(id));
    top = std::max(top, v);
  }
  IdValueMap weights;
  for (const auto& [id, v] : predictions)
    weights[id] = std::max(v * std::exp((v - top) / beta), kWeightFloor);
  return cap_and_renormalize(weights, k, {"kl", beta});
}

/// Expected reward of a plan under the model, sum of pi_hat(x) * phi_hat(x).
inline double expected_reward(const InclusionPlan& plan, const IdValueMap& predictions) {
  double total = 0.0;
  for (const auto& [id, p] : plan.probs) {
    auto it = predictions.find(id);
    if (it == predictions.end())
      throw std::invalid_argument("expected_reward: missing prediction for id " +
                                  std::to_string(id));
    total += p * it->second;
  }
  return total;
}

namespace detail {

/// Lloyd iterations on 1-D values followed by a repair pass that moves
/// boundary points between adjacent clusters until every cluster holds at
/// least min_size members. Values arrive sorted; clusters are contiguous
/// ranges. Returns the boundaries (cluster h = [bounds[h], bounds[h+1])).
inline std::vector<std::size_t> cluster_1d(const std::vector<double>& sorted_values,
                                           int h, std::size_t min_size,
                                           std::uint64_t seed) {
  const std::size_t n = sorted_values.size();
  if (n < static_cast<std::size_t>(h) * min_size)
    throw std::runtime_error("cluster_1d: cannot satisfy minimum cluster size");
  // Start from an equal split; seed the Lloyd centers with h random data
  // points. Cluster c covers [bounds[c], bounds[c+1]) of the sorted values.
  std::vector<std::size_t> bounds(h + 1);
  for (int c = 0; c <= h; ++c) bounds[c] = n * static_cast<std::size_t>(c) / h;
  rng::Stream stream(seed, {rng::kTagCluster});
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < h; ++i) {
    const std::size_t j = i + stream.next_below(n - i);
    std::swap(idx[i], idx[j]);
  }
  std::vector<double> centers(h);
  for (int i = 0; i < h; ++i) centers[i] = sorted_values[idx[i]];
  std::sort(centers.begin(), centers.end());

  for (int iter = 0; iter < 100; ++iter) {
    // Assign: nearest center; on sorted data the split between consecutive
    // centers sits at their midpoint. Coincident centers give no separating
    // midpoint; the current boundary is held so ties stay evenly split.
    std::vector<std::size_t> next(h + 1, 0);
    next[h] = n;
    std::size_t pos = 0;
    for (int c = 1; c < h; ++c) {
      if (centers[c] > centers[c - 1]) {
        const double mid = 0.5 * (centers[c - 1] + centers[c]);
        while (pos < n && sorted_values[pos] < mid) ++pos;
        next[c] = pos;
      } else {
        next[c] = std::max(bounds[c], pos);
      }
      pos = next[c];
    }
    if (next == bounds) break;
    bounds = next;
    for (int c = 0; c < h; ++c) {
      const std::size_t lo = bounds[c], hi = bounds[c + 1];
      if (hi > lo) {
        double m = 0.0;
        for (std::size_t i = lo; i < hi; ++i) m += sorted_values[i];
        centers[c] = m / static_cast<double>(hi - lo);
      }
    }
  }

  // Repair: two boundary sweeps. The forward sweep tops up clusters
  // 0..h-2 by shifting their right boundary; the backward sweep tops up
  // clusters h-1..1 by shifting their left boundary. Feasibility
  // (n >= h * min_size) guarantees cluster 0 keeps min_size members.
  for (int c = 0; c + 1 < h; ++c)
    bounds[c + 1] = std::max(bounds[c + 1], bounds[c] + min_size);
  for (int c = h - 1; c >= 1; --c)
    bounds[c] = std::min(bounds[c], bounds[c + 1] - min_size);
  return bounds;
}

}  // namespace detail

/**
 * Adaptive Bin Sampling. Greedily forces the top-Z predictions, smooths the
 * remaining predictions with a logistic or exponential map, clusters the
 * smoothed values into H strata of at least K-Z members, assigns each
 * stratum a probability proportional to its mean smoothed value (floored at
 * the trim factor), and spreads (K-Z) * pi(C_h) uniformly inside stratum h.
 *
 * If N < Z + H*(K-Z), H is reduced to the largest feasible value >= 1.
 */
inline std::pair<InclusionPlan, ClusterPlan> abs_plan(const IdValueMap& predictions,
                                                      const StrategyConfig& config,
                                                      int k, std::uint64_t seed) {
  config.validate();
  if (!config.is_abs()) throw std::invalid_argument("abs_plan: config kind is not ABS");
  detail::require_positive_budget(k);
  const int n = static_cast<int>(predictions.size());
  if (n < k) throw std::invalid_argument("abs_plan: K exceeds N");
  const bool logistic = config.kind == StrategyConfig::Kind::kAbsLogistic;

  const int z = std::min<int>(static_cast<int>(std::llround(config.abs.greedy_fraction * k)),
                              k - 1);

  // Top-Z by prediction, ties broken by ingestion order (lower id wins).
  std::vector<std::pair<ObsId, double>> items(predictions.begin(), predictions.end());
  std::vector<int> by_pred(items.size());
  std::iota(by_pred.begin(), by_pred.end(), 0);
  std::stable_sort(by_pred.begin(), by_pred.end(),
                   [&](int a, int b) { return items[a].second > items[b].second; });

  ClusterPlan clusters;
  InclusionPlan plan;
  plan.budget = k;
  plan.tag = {StrategyConfig::kind_name(config.kind), config.abs.alpha};
  for (int i = 0; i < z; ++i) {
    const ObsId id = items[by_pred[i]].first;
    clusters.greedy_set.insert(id);
    plan.forced.insert(id);
    plan.probs[id] = 1.0;
  }

  // Remaining pool, in ingestion order.
  std::vector<std::pair<ObsId, double>> pool;
  pool.reserve(n - z);
  for (const auto& [id, v] : items)
    if (!clusters.greedy_set.count(id)) pool.emplace_back(id, v);
  const int pool_n = static_cast<int>(pool.size());
  const int draws = k - z;  // K - Z cluster draws

  int h = config.abs.clusters;
  if (pool_n < h * draws) h = std::max(1, pool_n / draws);

  // Normalize predictions to the smoothing domain: [-5, 5] for logistic,
  // [0, 1] for exponential.
  double lo = pool.front().second, hi = pool.front().second;
  for (const auto& [id, v] : pool) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = hi - lo;
  auto normalized = [&](double v) {
    if (span == 0.0) return 0.0;
    const double unit = (v - lo) / span;
    return logistic ? 10.0 * unit - 5.0 : unit;
  };

  // kappa: the K-th largest normalized prediction in the pool.
  std::vector<double> norm_sorted;
  norm_sorted.reserve(pool_n);
  for (const auto& [id, v] : pool) norm_sorted.push_back(normalized(v));
  std::sort(norm_sorted.begin(), norm_sorted.end(), std::greater<>());
  const double kappa = norm_sorted[std::min<std::size_t>(k, norm_sorted.size()) - 1];

  auto smoothed = [&](double v) {
    const double x = normalized(v);
    return logistic ? 1.0 / (1.0 + std::exp(-config.abs.alpha * (x - kappa)))
                    : std::exp(config.abs.alpha * x);
  };

  // Sort pool members by smoothed value; ties keep ingestion order.
  std::vector<int> order(pool_n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> values(pool_n);
  for (int i = 0; i < pool_n; ++i) values[i] = smoothed(pool[i].second);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return values[a] < values[b]; });
  std::vector<double> sorted_values(pool_n);
  for (int i = 0; i < pool_n; ++i) sorted_values[i] = values[order[i]];

  const auto bounds =
      detail::cluster_1d(sorted_values, h, static_cast<std::size_t>(draws), seed);

  clusters.centers.assign(h, 0.0);
  clusters.cluster_probs.assign(h, 0.0);
  for (int c = 0; c < h; ++c) {
    const std::size_t size = bounds[c + 1] - bounds[c];
    double mean = 0.0;
    for (std::size_t i = bounds[c]; i < bounds[c + 1]; ++i) {
      mean += sorted_values[i];
      clusters.assignment[pool[order[i]].first] = c;
    }
    clusters.centers[c] = mean / static_cast<double>(size);
  }

  // pi(C_h) proportional to A_h, floored at trim, renormalizing the
  // un-floored clusters until stable.
  double total = std::accumulate(clusters.centers.begin(), clusters.centers.end(), 0.0);
  if (!(total > 0.0)) throw std::runtime_error("abs_plan: nonpositive cluster centers");
  for (int c = 0; c < h; ++c) clusters.cluster_probs[c] = clusters.centers[c] / total;
  const double tau = config.abs.trim;
  if (tau > 0.0) {
    std::vector<bool> floored(h, false);
    for (int pass = 0; pass < h; ++pass) {
      bool new_floor = false;
      double floored_mass = 0.0, free_weight = 0.0;
      for (int c = 0; c < h; ++c) {
        if (!floored[c] && clusters.cluster_probs[c] <= tau) {
          floored[c] = true;
          new_floor = true;
        }
        if (floored[c]) floored_mass += tau;
        else free_weight += clusters.centers[c];
      }
      for (int c = 0; c < h; ++c) {
        clusters.cluster_probs[c] =
            floored[c] ? tau : clusters.centers[c] / free_weight * (1.0 - floored_mass);
      }
      if (!new_floor) break;
    }
  }

  for (int c = 0; c < h; ++c) {
    const double size = static_cast<double>(bounds[c + 1] - bounds[c]);
    const double p = draws * clusters.cluster_probs[c] / size;
    for (std::size_t i = bounds[c]; i < bounds[c + 1]; ++i)
      plan.probs[pool[order[i]].first] = p;
  }
  detail::sweep_forced(plan);
  plan.validate();
  return {std::move(plan), std::move(clusters)};
}

/// Builds the plan for a strategy over a period's predictions. SRS ignores
/// the predictions.
inline InclusionPlan make_plan(const StrategyConfig& config, const Period& period,
                               const IdValueMap& predictions, std::uint64_t seed) {
  switch (config.kind) {
    case StrategyConfig::Kind::kSrs:
      return srs_plan(period);
    case StrategyConfig::Kind::kMps:
      return mps_plan(predictions, period.budget);
    case StrategyConfig::Kind::kEntropy:
      return entropy_plan(predictions, config.beta, period.budget);
    case StrategyConfig::Kind::kKl:
      return kl_plan(predictions, config.beta, period.budget);
    case StrategyConfig::Kind::kAbsLogistic:
    case StrategyConfig::Kind::kAbsExponential:
      return abs_plan(predictions, config, period.budget, seed).first;
  }
  throw std::logic_error("make_plan: unknown strategy kind");
}

}  // namespace oeb::design

#endif  // OEB_DESIGN_HPP
