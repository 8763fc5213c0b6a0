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

#ifndef OEB_ORACLE_HPP
#define OEB_ORACLE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "oeb/core.hpp"
#include "oeb/estimators.hpp"
#include "oeb/sampler.hpp"

// Ground-truth machinery for tests and verification suites: exhaustive
// design enumeration, Monte Carlo subset distributions, and a numerical
// maximizer used to cross-check the closed-form designs. Shares no code
// with the strategies it checks.
namespace oeb::oracle {

/// Limit on distinct ids for exhaustive enumeration.
inline constexpr int kEnumerationLimit = 15;

/// An explicit probability law over fixed-size-K subsets of ids.
struct DesignDistribution {
  struct Outcome {
    std::vector<ObsId> subset;  // sorted, size K
    double prob = 0.0;
  };
  std::vector<Outcome> support;
  int k = 0;

  void validate() const {
    if (k < 1) throw std::invalid_argument("DesignDistribution: K < 1");
    double sum = 0.0;
    for (const auto& o : support) {
      if (static_cast<int>(o.subset.size()) != k)
        throw std::invalid_argument("DesignDistribution: subset size != K");
      if (!std::is_sorted(o.subset.begin(), o.subset.end()))
        throw std::invalid_argument("DesignDistribution: subset not sorted");
      if (o.prob < 0.0)
        throw std::invalid_argument("DesignDistribution: negative probability");
      sum += o.prob;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw std::invalid_argument("DesignDistribution: probabilities sum to " +
                                  std::to_string(sum));
  }

  std::set<ObsId> ids() const {
    std::set<ObsId> out;
    for (const auto& o : support) out.insert(o.subset.begin(), o.subset.end());
    return out;
  }
};

struct InclusionTables {
  IdValueMap first;                                 // pi(x)
  std::map<estimators::IdPair, double> joint;       // pi(x,z), x < z
};

/// Exact first- and second-order inclusion probabilities by summation over
/// the support. Refuses more than kEnumerationLimit distinct ids.
inline InclusionTables enumerate_inclusion(const DesignDistribution& design) {
  design.validate();
  const auto ids = design.ids();
  if (static_cast<int>(ids.size()) > kEnumerationLimit)
    throw std::invalid_argument("enumerate_inclusion: more than " +
                                std::to_string(kEnumerationLimit) + " ids");
  InclusionTables tables;
  for (ObsId id : ids) tables.first[id] = 0.0;
  for (const auto& o : design.support) {
    for (std::size_t i = 0; i < o.subset.size(); ++i) {
      tables.first[o.subset[i]] += o.prob;
      for (std::size_t j = i + 1; j < o.subset.size(); ++j)
        tables.joint[{o.subset[i], o.subset[j]}] += o.prob;
    }
  }
  return tables;
}

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};

struct EstimatorMoments {
  Moments model, ipw, dr;
};

/**
 * Exact mean and variance of the three estimators under the design, for
 * fixed rewards. Variance is with respect to the subset draw only.
 */
inline EstimatorMoments enumerate_estimator_moments(const DesignDistribution& design,
                                                    const IdValueMap& rewards,
                                                    const IdValueMap& predictions,
                                                    const IdValueMap& pi_hat) {
  design.validate();
  const auto ids = design.ids();
  if (static_cast<int>(ids.size()) > kEnumerationLimit)
    throw std::invalid_argument("enumerate_estimator_moments: more than " +
                                std::to_string(kEnumerationLimit) + " ids");
  double m1[3] = {0, 0, 0}, m2[3] = {0, 0, 0};
  for (const auto& o : design.support) {
    std::set<ObsId> sel(o.subset.begin(), o.subset.end());
    double est_model = 0.0, est_ipw = 0.0, est_dr = 0.0;
    for (ObsId id : ids) {
      const double r = rewards.at(id);
      const double phi = predictions.at(id);
      if (sel.count(id)) {
        const double ph = pi_hat.at(id);
        if (!(ph > 0.0))
          throw std::invalid_argument("enumerate_estimator_moments: pi_hat <= 0");
        est_model += r;
        est_ipw += r / ph;
        est_dr += phi + (r - phi) / ph;
      } else {
        est_model += phi;
        est_dr += phi;
      }
    }
    const double est[3] = {est_model, est_ipw, est_dr};
    for (int e = 0; e < 3; ++e) {
      m1[e] += o.prob * est[e];
      m2[e] += o.prob * est[e] * est[e];
    }
  }
  EstimatorMoments out;
  Moments* slots[3] = {&out.model, &out.ipw, &out.dr};
  for (int e = 0; e < 3; ++e) {
    slots[e]->mean = m1[e];
    slots[e]->variance = m2[e] - m1[e] * m1[e];
  }
  return out;
}

enum class Objective { kEntropy, kKl };

namespace detail {

/// Euclidean projection onto the probability simplex (sorting method).
inline std::vector<double> project_simplex(std::vector<double> v) {
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  int rho = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cum += u[i];
    const double t = (cum - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) {
      rho = static_cast<int>(i + 1);
      theta = t;
    }
  }
  (void)rho;
  for (auto& x : v) x = std::max(x - theta, 0.0);
  return v;
}

inline double safe_log(double p) { return std::log(std::max(p, 1e-12)); }

}  // namespace detail

/**
 * Projected gradient ascent on the probability simplex for the K = 1
 * reward-plus-regularizer objectives, with backtracking line search.
 * Independent check of the closed-form solutions. Returns a feasible pi
 * whose objective is within tol of the stationary value.
 */
inline IdValueMap numeric_maximize(Objective objective, const IdValueMap& predictions,
                                   double beta, double tol) {
  if (!(beta > 0.0)) throw std::invalid_argument("numeric_maximize: beta must be > 0");
  if (!(tol > 0.0)) throw std::invalid_argument("numeric_maximize: tol must be > 0");
  const int n = static_cast<int>(predictions.size());
  if (n < 1 || n > 12)
    throw std::invalid_argument("numeric_maximize: N must be in [1, 12]");

  std::vector<ObsId> ids;
  std::vector<double> phi;
  ids.reserve(n);
  phi.reserve(n);
  for (const auto& [id, v] : predictions) {
    if (objective == Objective::kKl && !(v > 0.0))
      throw std::invalid_argument("numeric_maximize: KL needs positive predictions");
    ids.push_back(id);
    phi.push_back(v);
  }
  std::vector<double> q(n, 0.0);
  if (objective == Objective::kKl) {
    double s = 0.0;
    for (double v : phi) s += v;
    for (int i = 0; i < n; ++i) q[i] = phi[i] / s;
  }

  auto value = [&](const std::vector<double>& p) {
    double v = 0.0;
    for (int i = 0; i < n; ++i) {
      v += p[i] * phi[i];
      if (p[i] > 0.0) {
        if (objective == Objective::kEntropy)
          v -= beta * p[i] * detail::safe_log(p[i]);
        else
          v -= beta * p[i] * (detail::safe_log(p[i]) - std::log(q[i]));
      }
    }
    return v;
  };
  auto gradient = [&](const std::vector<double>& p) {
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) {
      if (objective == Objective::kEntropy)
        g[i] = phi[i] - beta * (1.0 + detail::safe_log(p[i]));
      else
        g[i] = phi[i] - beta * (1.0 + detail::safe_log(p[i]) - std::log(q[i]));
    }
    return g;
  };

  std::vector<double> p(n, 1.0 / n);
  double current = value(p);
  const int max_iters = 100000;
  double step0 = 1.0;  // initial step adapts to the accepted step size
  int stalled = 0;     // consecutive iterations improving by less than tol
  for (int iter = 0; iter < max_iters; ++iter) {
    const auto g = gradient(p);
    double step = step0;
    bool improved = false;
    for (int halvings = 0; halvings < 80; ++halvings, step *= 0.5) {
      std::vector<double> cand(n);
      for (int i = 0; i < n; ++i) cand[i] = p[i] + step * g[i];
      cand = detail::project_simplex(std::move(cand));
      const double cv = value(cand);
      if (cv > current) {
        improved = true;
        stalled = cv - current < tol ? stalled + 1 : 0;
        p = std::move(cand);
        current = cv;
        step0 = std::clamp(step * 4.0, 1e-9, 1e6);
        break;
      }
    }
    // Converged once no step improves, or improvements have stayed below
    // tol long enough that the remaining gap is negligible.
    if (!improved || stalled >= 25) {
      IdValueMap out;
      for (int i = 0; i < n; ++i) out[ids[i]] = p[i];
      return out;
    }
  }
  throw std::runtime_error("numeric_maximize: no convergence after 100000 iterations");
}

/// Objective value of Phi_beta at a given pi; exposed for optimality checks.
inline double objective_value(Objective objective, const IdValueMap& predictions,
                              double beta, const IdValueMap& pi) {
  double qsum = 0.0;
  for (const auto& [id, v] : predictions) qsum += v;
  double value = 0.0;
  for (const auto& [id, p] : pi) {
    const double phi = predictions.at(id);
    value += p * phi;
    if (p > 0.0) {
      if (objective == Objective::kEntropy)
        value -= beta * p * detail::safe_log(p);
      else
        value -= beta * p * (detail::safe_log(p) - std::log(phi / qsum));
    }
  }
  return value;
}

/**
 * Empirical subset distribution of Pareto draws from a plan; the measured
 * frequencies expose the lambda = pi/pi_hat deviations of the
 * approximation. Restricted to designs small enough (N <= 12) for subset
 * frequencies to be meaningful.
 */
inline DesignDistribution pareto_design_mc(const InclusionPlan& plan, int trials,
                                           std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("pareto_design_mc: trials < 1");
  plan.validate();
  if (plan.probs.size() > 12)
    throw std::invalid_argument("pareto_design_mc: N must be <= 12");
  std::map<std::vector<ObsId>, int> counts;
  for (int t = 0; t < trials; ++t) {
    const auto draw =
        sampler::draw_pareto(plan, rng::key({seed, static_cast<std::uint64_t>(t)}));
    counts[std::vector<ObsId>(draw.selected.begin(), draw.selected.end())] += 1;
  }
  DesignDistribution design;
  design.k = plan.budget;
  for (const auto& [subset, count] : counts)
    design.support.push_back({subset, static_cast<double>(count) / trials});
  design.validate();
  return design;
}

}  // namespace oeb::oracle

#endif  // OEB_ORACLE_HPP
