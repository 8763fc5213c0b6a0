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

#ifndef OEB_CORE_HPP
#define OEB_CORE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "oeb/rng.hpp"

namespace oeb {

/// Stable integer identifier assigned at ingestion. Within a period ids are
/// strictly increasing, so id order doubles as ingestion order.
using ObsId = std::int64_t;

using IdValueMap = std::map<ObsId, double>;

/// Absolute tolerance for probability-sum checks.
inline constexpr double kProbSumTol = 1e-9;

/// Reward-noise law attached to an observation. Realized rewards always land
/// in [0, 1].
struct NoiseSpec {
  enum class Kind { kNone, kBernoulli, kTruncGauss };
  Kind kind = Kind::kNone;
  double sigma = 0.0;  // kTruncGauss only

  static NoiseSpec none() { return {Kind::kNone, 0.0}; }
  static NoiseSpec bernoulli() { return {Kind::kBernoulli, 0.0}; }
  static NoiseSpec trunc_gauss(double sigma) { return {Kind::kTruncGauss, sigma}; }
};

/// One arm: a context with a latent reward law. mean_reward is ground truth
/// hidden from sampling strategies; only models and diagnostics may read it.
struct Observation {
  ObsId id = 0;
  std::vector<double> context;
  double mean_reward = 0.0;
  NoiseSpec noise;

  void validate() const {
    if (!(mean_reward >= 0.0 && mean_reward <= 1.0))
      throw std::invalid_argument("Observation " + std::to_string(id) +
                                  ": mean_reward outside [0,1]");
    if (noise.kind == NoiseSpec::Kind::kTruncGauss && noise.sigma < 0.0)
      throw std::invalid_argument("Observation " + std::to_string(id) +
                                  ": negative noise sigma");
  }
};

/// One round: the arm set X_t plus the sampling budget K_t.
struct Period {
  int index = 0;
  std::vector<Observation> observations;
  int budget = 1;

  int size() const { return static_cast<int>(observations.size()); }

  void validate() const {
    if (index < 0) throw std::invalid_argument("Period: negative index");
    if (observations.empty()) throw std::invalid_argument("Period: empty");
    if (budget < 1 || budget > size())
      throw std::invalid_argument("Period " + std::to_string(index) +
                                  ": budget outside [1, N]");
    const std::size_t dim = observations.front().context.size();
    ObsId prev = observations.front().id;
    observations.front().validate();
    for (std::size_t i = 1; i < observations.size(); ++i) {
      observations[i].validate();
      if (observations[i].id <= prev)
        throw std::invalid_argument("Period " + std::to_string(index) +
                                    ": ids must be unique and increasing");
      if (observations[i].context.size() != dim)
        throw std::invalid_argument("Period " + std::to_string(index) +
                                    ": context dimension mismatch");
      prev = observations[i].id;
    }
  }

  /// Copy with a different budget (types are immutable after construction).
  Period with_budget(int k) const {
    Period p = *this;
    p.budget = k;
    p.validate();
    return p;
  }

  /// Exact population total, sum of mean rewards.
  double population_total() const {
    double s = 0.0;
    for (const auto& o : observations) s += o.mean_reward;
    return s;
  }
};

/// Label + parameter record identifying the strategy that produced a plan.
struct StrategyTag {
  std::string label;
  double param = 0.0;
};

/// Target inclusion probabilities for one period. Probabilities live in
/// (0, 1] and sum to the budget K; `forced` is exactly the set with
/// probability 1.
struct InclusionPlan {
  IdValueMap probs;
  int budget = 0;
  std::set<ObsId> forced;
  StrategyTag tag;

  void validate() const {
    if (budget < 1) throw std::invalid_argument("InclusionPlan: budget < 1");
    double sum = 0.0;
    for (const auto& [id, p] : probs) {
      if (!(p > 0.0 && p <= 1.0))
        throw std::invalid_argument("InclusionPlan: probability outside (0,1] for id " +
                                    std::to_string(id));
      if ((p == 1.0) != (forced.count(id) > 0))
        throw std::invalid_argument("InclusionPlan: forced set inconsistent at id " +
                                    std::to_string(id));
      sum += p;
    }
    if (std::abs(sum - budget) > kProbSumTol)
      throw std::invalid_argument("InclusionPlan: probabilities sum to " +
                                  std::to_string(sum) + ", expected " +
                                  std::to_string(budget));
  }
};

/// A realized size-K sample: the selected ids, their realized rewards, and
/// the plan that produced them.
struct SampleDraw {
  std::set<ObsId> selected;
  IdValueMap rewards;  // selected ids only
  InclusionPlan plan;
};

/// Copies realized rewards for the selected ids onto a draw.
inline SampleDraw attach_rewards(SampleDraw draw, const IdValueMap& realized) {
  draw.rewards.clear();
  for (ObsId id : draw.selected) {
    auto it = realized.find(id);
    if (it == realized.end())
      throw std::invalid_argument("attach_rewards: no reward for id " + std::to_string(id));
    draw.rewards[id] = it->second;
  }
  return draw;
}

/// Per-period estimate record: the three population-total estimates plus the
/// realized reward of the draw.
struct EstimateReport {
  double pop_true = 0.0;
  double est_model = 0.0;
  double est_ipw = 0.0;
  double est_dr = 0.0;
  double reward_realized = 0.0;
};

/// Closed-form bias decomposition. Biases are reported signed; callers take
/// magnitudes for display.
struct BiasReport {
  IdValueMap delta;   // E[r(x)] - phi_hat(x)
  IdValueMap lambda;  // pi(x) / pi_hat(x)
  double bias_model = 0.0;
  double bias_ipw = 0.0;
  double bias_dr = 0.0;
};

/**
 * Draws one realized reward per observation in the period. Pure function of
 * (period, seed): each observation's draw comes from a stream keyed by
 * (seed, id), so values are independent of evaluation order.
 *
 * Truncated-Gaussian noise resamples until the value lands in [0, 1], with a
 * cap of 100 attempts before clamping.
 */
inline IdValueMap realize_rewards(const Period& period, std::uint64_t seed) {
  period.validate();
  IdValueMap out;
  for (const auto& obs : period.observations) {
    double r = obs.mean_reward;
    switch (obs.noise.kind) {
      case NoiseSpec::Kind::kNone:
        break;
      case NoiseSpec::Kind::kBernoulli: {
        rng::Stream s(seed, {rng::kTagReward, static_cast<std::uint64_t>(obs.id)});
        r = s.next_unit() < obs.mean_reward ? 1.0 : 0.0;
        break;
      }
      case NoiseSpec::Kind::kTruncGauss: {
        rng::Stream s(seed, {rng::kTagReward, static_cast<std::uint64_t>(obs.id)});
        double v = obs.mean_reward + obs.noise.sigma * s.next_normal();
        for (int attempt = 1; attempt < 100 && (v < 0.0 || v > 1.0); ++attempt)
          v = obs.mean_reward + obs.noise.sigma * s.next_normal();
        r = std::clamp(v, 0.0, 1.0);
        break;
      }
    }
    out[obs.id] = r;
  }
  return out;
}

/// Total realized reward of the selected observations across draws.
inline double cumulative_reward(const std::vector<SampleDraw>& draws) {
  double total = 0.0;
  for (const auto& d : draws)
    for (const auto& [id, r] : d.rewards) total += r;
  return total;
}

/// Realized reward of a single draw.
inline double draw_reward(const SampleDraw& draw) {
  double total = 0.0;
  for (const auto& [id, r] : draw.rewards) total += r;
  return total;
}

}  // namespace oeb

#endif  // OEB_CORE_HPP
