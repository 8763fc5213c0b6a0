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

#ifndef OEB_ESTIMATORS_HPP
#define OEB_ESTIMATORS_HPP

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>

#include "oeb/core.hpp"
#include "oeb/design.hpp"

namespace oeb::estimators {

/// Unordered id pair, stored sorted.
using IdPair = std::pair<ObsId, ObsId>;

inline IdPair make_pair_key(ObsId a, ObsId b) {
  return a <= b ? IdPair{a, b} : IdPair{b, a};
}

/// First- and second-order inclusion probabilities plus the estimator-specific
/// weights theta (r for IPW, r - phi_hat for DR).
struct VarianceInputs {
  IdValueMap first_order;                 // pi(x)
  std::map<IdPair, double> joint;         // pi(x, z), symmetric, pi(x,x) = pi(x)
  IdValueMap theta;

  void validate() const {
    for (const auto& [id, p] : first_order) {
      if (!(p > 0.0 && p <= 1.0))
        throw std::invalid_argument("VarianceInputs: pi outside (0,1] for id " +
                                    std::to_string(id));
      if (!theta.count(id))
        throw std::invalid_argument("VarianceInputs: missing theta for id " +
                                    std::to_string(id));
      auto diag = joint.find({id, id});
      if (diag != joint.end() && std::abs(diag->second - p) > kProbSumTol)
        throw std::invalid_argument("VarianceInputs: pi(x,x) != pi(x) for id " +
                                    std::to_string(id));
    }
    for (const auto& [pr, p] : joint) {
      if (pr.first > pr.second)
        throw std::invalid_argument("VarianceInputs: joint keys must be sorted pairs");
      if (p < -kProbSumTol)
        throw std::invalid_argument("VarianceInputs: negative joint probability");
    }
  }
};

/// A-priori variance/concentration quantities of the entropy and KL designs.
struct BoundReport {
  double c1 = 0.0;      // variance bound for IPW; DR bound is 2 * c1
  double c1_dr = 0.0;   // 2 * c1
  double gamma = 0.0;   // skew measure, sum of d_x * g_x
  IdValueMap g;         // exp((phi_hat(x) - phi_min) / beta)
  IdValueMap d;         // 1 for entropy, phi_hat(x)/phi_min for KL
  double phimin = 0.0;
};

/// Model-based estimate: realized rewards of the sample plus predicted
/// rewards of the rest of the population.
inline double estimate_model(const SampleDraw& draw, const IdValueMap& predictions) {
  double total = 0.0;
  for (const auto& [id, p] : draw.plan.probs) {
    if (draw.selected.count(id)) {
      total += draw.rewards.at(id);
    } else {
      auto it = predictions.find(id);
      if (it == predictions.end())
        throw std::invalid_argument("estimate_model: missing prediction for id " +
                                    std::to_string(id));
      total += it->second;
    }
  }
  return total;
}

/// Horvitz-Thompson estimate: sampled rewards weighted by 1/pi_hat.
inline double estimate_ipw(const SampleDraw& draw) {
  double total = 0.0;
  for (ObsId id : draw.selected) {
    auto it = draw.plan.probs.find(id);
    if (it == draw.plan.probs.end() || !(it->second > 0.0))
      throw std::logic_error("estimate_ipw: selected id lacks positive probability");
    total += draw.rewards.at(id) / it->second;
  }
  return total;
}

/// Doubly-robust estimate: model total plus IPW-weighted residual correction.
inline double estimate_dr(const SampleDraw& draw, const IdValueMap& predictions) {
  double total = 0.0;
  for (const auto& [id, p] : draw.plan.probs) {
    auto it = predictions.find(id);
    if (it == predictions.end())
      throw std::invalid_argument("estimate_dr: missing prediction for id " +
                                  std::to_string(id));
    total += it->second;
    if (draw.selected.count(id)) {
      if (!(p > 0.0))
        throw std::logic_error("estimate_dr: selected id lacks positive probability");
      total += (draw.rewards.at(id) - it->second) / p;
    }
  }
  return total;
}

/**
 * Exact bias of the three estimators given true means, model predictions,
 * true inclusion probabilities and the probabilities used for weighting.
 * With delta = E[r] - phi_hat and lambda = pi / pi_hat:
 *
 *   bias_model = sum delta_x (pi_x - 1)
 *   bias_ipw   = sum E[r_x] (lambda_x - 1)
 *   bias_dr    = sum delta_x (lambda_x - 1)
 *
 * Values are signed.
 */
inline BiasReport bias_closed_form(const IdValueMap& mean_rewards,
                                   const IdValueMap& predictions,
                                   const IdValueMap& pi_true,
                                   const IdValueMap& pi_hat) {
  BiasReport report;
  for (const auto& [id, mean] : mean_rewards) {
    auto phi = predictions.find(id);
    auto pi = pi_true.find(id);
    auto pih = pi_hat.find(id);
    if (phi == predictions.end() || pi == pi_true.end() || pih == pi_hat.end())
      throw std::invalid_argument("bias_closed_form: missing entry for id " +
                                  std::to_string(id));
    if (!(pi->second > 0.0 && pi->second <= 1.0))
      throw std::invalid_argument("bias_closed_form: pi outside (0,1]");
    if (!(pih->second > 0.0))
      throw std::invalid_argument("bias_closed_form: pi_hat must be > 0");
    const double delta = mean - phi->second;
    const double lambda = pi->second / pih->second;
    report.delta[id] = delta;
    report.lambda[id] = lambda;
    report.bias_model += delta * (pi->second - 1.0);
    report.bias_ipw += mean * (lambda - 1.0);
    report.bias_dr += delta * (lambda - 1.0);
  }
  return report;
}

/**
 * Sampling variance of a Horvitz-Thompson-type sum for theta, valid when the
 * weighting probabilities equal the true inclusion probabilities:
 *
 *   A(theta) = 1/2 sum_{x,z} (theta_x/pi_x - theta_z/pi_z)^2 (pi_x pi_z - pi_xz)
 *
 * theta = r gives the IPW variance; theta = r - phi_hat gives DR.
 */
inline double variance_closed_form(const VarianceInputs& inputs) {
  inputs.validate();
  double total = 0.0;
  for (const auto& [xid, px] : inputs.first_order) {
    const double tx = inputs.theta.at(xid) / px;
    for (const auto& [zid, pz] : inputs.first_order) {
      if (zid <= xid) continue;  // strict upper triangle, doubled below
      auto joint_it = inputs.joint.find(make_pair_key(xid, zid));
      const double pxz = joint_it == inputs.joint.end() ? 0.0 : joint_it->second;
      const double tz = inputs.theta.at(zid) / pz;
      const double diff = tx - tz;
      total += diff * diff * (px * pz - pxz);
    }
  }
  return total;  // half of the sum over ordered pairs
}

namespace detail {

struct GapWeights {
  IdValueMap g, d;
  double phimin;
};

inline GapWeights gap_weights(const IdValueMap& predictions, double beta,
                              bool kl_weighted) {
  if (!(beta > 0.0)) throw std::invalid_argument("bounds: beta must be > 0");
  if (predictions.empty()) throw std::invalid_argument("bounds: no predictions");
  double phimin = predictions.begin()->second;
  for (const auto& [id, v] : predictions) phimin = std::min(phimin, v);
  if (kl_weighted && !(phimin > 0.0))
    throw std::invalid_argument("bounds: predictions must be > 0 for KL");
  GapWeights w;
  w.phimin = phimin;
  for (const auto& [id, v] : predictions) {
    w.g[id] = std::exp((v - phimin) / beta);
    w.d[id] = kl_weighted ? v / phimin : 1.0;
  }
  return w;
}

/// Verifies Assumption 1: K times the uncapped K=1 solution stays <= 1.
inline void check_assumption_scaled(const IdValueMap& weights, int k,
                                    const char* what) {
  double sum = 0.0, top = 0.0;
  for (const auto& [id, v] : weights) {
    sum += v;
    top = std::max(top, v);
  }
  if (k * top > sum * (1.0 + 1e-12))
    throw std::logic_error(std::string(what) +
                           ": K * pi(x) > 1 for some x; cap the plan before "
                           "applying the bound");
}

inline BoundReport bound_common(const IdValueMap& predictions, double beta, int k,
                                bool kl_weighted, const char* what) {
  if (k < 1) throw std::invalid_argument("bounds: K must be >= 1");
  auto w = gap_weights(predictions, beta, kl_weighted);
  IdValueMap scaled;  // weights of the K=1 design, for the Assumption 1 check
  for (const auto& [id, g] : w.g)
    scaled[id] = kl_weighted ? predictions.at(id) * g : g;
  check_assumption_scaled(scaled, k, what);

  BoundReport report;
  report.phimin = w.phimin;
  report.g = std::move(w.g);
  report.d = std::move(w.d);
  double sum_h = 0.0, sum_h2 = 0.0;
  for (const auto& [id, g] : report.g) {
    const double h = report.d.at(id) * g;
    sum_h += h;
    sum_h2 += h * h;
  }
  report.gamma = sum_h;
  report.c1 = sum_h * sum_h / k - sum_h2;
  report.c1_dr = 2.0 * report.c1;
  return report;
}

}  // namespace detail

/// Variance bound for entropy sampling with pi_hat = pi:
/// V(IPW) <= C1 = (1/K) sum_{x,z} g_x g_z - sum_x g_x^2, V(DR) <= 2 C1.
/// Requires Assumption 1 (the scaled probabilities never exceed 1).
inline BoundReport bound_entropy(const IdValueMap& predictions, double beta, int k) {
  return detail::bound_common(predictions, beta, k, false, "bound_entropy");
}

/// KL analogue with every g_x carrying the extra factor phi_hat(x)/phi_min.
inline BoundReport bound_kl(const IdValueMap& predictions, double beta, int k) {
  return detail::bound_common(predictions, beta, k, true, "bound_kl");
}

enum class BoundStrategy { kEntropy, kKl };

/**
 * Half-width of the Hoeffding interval for the mean of m repeated IPW
 * estimates under exact inclusion probabilities:
 *
 *   Gamma / sqrt(2m) * sqrt(log(2/delta)),
 *   Gamma = sum_x D_x exp((phi_hat(x) - phi_min)/beta).
 *
 * Pareto sampling adds an O(log K / sqrt(K)) * Pop term not evaluated here.
 */
inline double hoeffding_halfwidth(const IdValueMap& predictions, double beta,
                                  BoundStrategy strategy, int m, double delta) {
  if (m < 1) throw std::invalid_argument("hoeffding_halfwidth: m must be >= 1");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("hoeffding_halfwidth: delta outside (0,1)");
  auto w = detail::gap_weights(predictions, beta, strategy == BoundStrategy::kKl);
  double gamma = 0.0;
  for (const auto& [id, g] : w.g) gamma += w.d.at(id) * g;
  return gamma / std::sqrt(2.0 * m) * std::sqrt(std::log(2.0 / delta));
}

/// The skew measure Gamma alone.
inline double skew_gamma(const IdValueMap& predictions, double beta,
                         BoundStrategy strategy) {
  auto w = detail::gap_weights(predictions, beta, strategy == BoundStrategy::kKl);
  double gamma = 0.0;
  for (const auto& [id, g] : w.g) gamma += w.d.at(id) * g;
  return gamma;
}

}  // namespace oeb::estimators

#endif  // OEB_ESTIMATORS_HPP
