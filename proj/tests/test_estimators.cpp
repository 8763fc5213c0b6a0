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
#include <cmath>
#include <limits>

#include "oeb/estimators.hpp"
#include "oeb/oracle.hpp"
#include "oeb/rng.hpp"

using namespace oeb;
using Catch::Matchers::WithinAbs;

namespace {

SampleDraw make_draw(std::vector<double> probs, std::set<ObsId> selected,
                     const IdValueMap& rewards) {
  SampleDraw draw;
  draw.plan.budget = static_cast<int>(selected.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    draw.plan.probs[static_cast<ObsId>(i)] = probs[i];
    if (probs[i] == 1.0) draw.plan.forced.insert(static_cast<ObsId>(i));
  }
  draw.selected = std::move(selected);
  for (ObsId id : draw.selected) draw.rewards[id] = rewards.at(id);
  return draw;
}

/// The two-outcome worked design: Pr({x0}) = 0.6, Pr({x1}) = 0.4.
oracle::DesignDistribution two_point_design() {
  oracle::DesignDistribution d;
  d.k = 1;
  d.support = {{{0}, 0.6}, {{1}, 0.4}};
  return d;
}

}  // namespace

TEST_CASE("model estimate") {
  const IdValueMap r = {{0, 0.2}, {1, 0.5}, {2, 0.9}};
  const IdValueMap phi = {{0, 0.3}, {1, 0.4}, {2, 0.8}};

  SECTION("census returns the exact total") {
    auto draw = make_draw({1.0, 1.0, 1.0}, {0, 1, 2}, r);
    CHECK_THAT(estimators::estimate_model(draw, phi), WithinAbs(1.6, 1e-12));
  }
  SECTION("a perfect model is exact for any sample") {
    auto draw = make_draw({0.4, 0.4, 0.2}, {1}, r);
    CHECK_THAT(estimators::estimate_model(draw, r), WithinAbs(1.6, 1e-12));
  }
  SECTION("direct arithmetic") {
    auto draw = make_draw({0.5, 0.5, 1.0}, {0, 2}, r);
    CHECK_THAT(estimators::estimate_model(draw, phi), WithinAbs(1.5, 1e-12));
  }
  SECTION("missing prediction is an error") {
    auto draw = make_draw({0.5, 0.5, 1.0}, {0, 2}, r);
    CHECK_THROWS_AS(estimators::estimate_model(draw, {{0, 0.3}, {2, 0.8}}),
                    std::invalid_argument);
  }
}

TEST_CASE("ipw estimate") {
  const IdValueMap r = {{0, 0.2}, {1, 0.5}, {2, 0.9}};

  SECTION("census with unit probabilities returns the total") {
    auto draw = make_draw({1.0, 1.0, 1.0}, {0, 1, 2}, r);
    CHECK_THAT(estimators::estimate_ipw(draw), WithinAbs(1.6, 1e-12));
  }
  SECTION("direct arithmetic") {
    auto draw = make_draw({0.5, 0.5, 1.0}, {0, 2}, r);
    CHECK_THAT(estimators::estimate_ipw(draw), WithinAbs(1.3, 1e-12));
  }
  SECTION("two-outcome design is unbiased with exact probabilities") {
    const IdValueMap rewards = {{0, 0.5}, {1, 0.25}};
    auto first = make_draw({0.6, 0.4}, {0}, rewards);
    auto second = make_draw({0.6, 0.4}, {1}, rewards);
    const double mean = 0.6 * estimators::estimate_ipw(first) +
                        0.4 * estimators::estimate_ipw(second);
    CHECK_THAT(mean, WithinAbs(0.75, 1e-12));
  }
}

TEST_CASE("dr estimate") {
  const IdValueMap r = {{0, 0.2}, {1, 0.5}, {2, 0.9}};
  const IdValueMap phi = {{0, 0.3}, {1, 0.4}, {2, 0.8}};

  SECTION("zero residuals make DR exact for any sample") {
    auto draw = make_draw({0.4, 0.4, 0.2}, {2}, r);
    CHECK_THAT(estimators::estimate_dr(draw, r), WithinAbs(1.6, 1e-12));
  }
  SECTION("direct arithmetic") {
    auto draw = make_draw({0.5, 0.5, 1.0}, {0, 2}, r);
    CHECK_THAT(estimators::estimate_dr(draw, phi), WithinAbs(1.4, 1e-12));
  }
  SECTION("enumeration mean equals the population total") {
    const IdValueMap rewards = {{0, 0.5}, {1, 0.25}};
    const IdValueMap preds = {{0, 0.9}, {1, 0.1}};
    const auto design = two_point_design();
    const auto tables = oracle::enumerate_inclusion(design);
    const auto moments =
        oracle::enumerate_estimator_moments(design, rewards, preds, tables.first);
    CHECK_THAT(moments.dr.mean, WithinAbs(0.75, 1e-12));
  }
}

TEST_CASE("closed-form bias") {
  SECTION("exact probabilities kill IPW and DR bias") {
    auto report = estimators::bias_closed_form({{0, 0.5}, {1, 0.2}}, {{0, 0.1}, {1, 0.9}},
                                               {{0, 0.3}, {1, 0.7}}, {{0, 0.3}, {1, 0.7}});
    CHECK_THAT(report.bias_ipw, WithinAbs(0.0, 1e-15));
    CHECK_THAT(report.bias_dr, WithinAbs(0.0, 1e-15));
  }
  SECTION("a perfect model kills model and DR bias") {
    auto report = estimators::bias_closed_form({{0, 0.5}, {1, 0.2}}, {{0, 0.5}, {1, 0.2}},
                                               {{0, 0.3}, {1, 0.7}}, {{0, 0.2}, {1, 0.9}});
    CHECK_THAT(report.bias_model, WithinAbs(0.0, 1e-15));
    CHECK_THAT(report.bias_dr, WithinAbs(0.0, 1e-15));
  }
  SECTION("worked two-observation case matches enumeration") {
    const IdValueMap mean = {{0, 0.5}, {1, 0.25}};
    const IdValueMap pi = {{0, 0.6}, {1, 0.4}};
    const IdValueMap pi_hat = {{0, 0.5}, {1, 0.5}};
    auto report = estimators::bias_closed_form(mean, mean, pi, pi_hat);
    CHECK_THAT(report.bias_ipw, WithinAbs(0.05, 1e-12));

    const auto design = two_point_design();
    const auto moments = oracle::enumerate_estimator_moments(design, mean, mean, pi_hat);
    CHECK_THAT(moments.ipw.mean, WithinAbs(0.8, 1e-12));
    CHECK_THAT(moments.ipw.mean - 0.75, WithinAbs(report.bias_ipw, 1e-12));
  }
  SECTION("domain violations") {
    CHECK_THROWS_AS(estimators::bias_closed_form({{0, 0.5}}, {{0, 0.5}}, {{0, 0.0}},
                                                 {{0, 0.5}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(estimators::bias_closed_form({{0, 0.5}}, {{0, 0.5}}, {{0, 0.5}},
                                                 {{0, 0.0}}),
                    std::invalid_argument);
  }
}

TEST_CASE("closed-form variance") {
  SECTION("constant theta over pi gives zero variance") {
    estimators::VarianceInputs inputs;
    inputs.first_order = {{0, 0.2}, {1, 0.3}, {2, 0.5}};
    inputs.theta = {{0, 0.2}, {1, 0.3}, {2, 0.5}};  // theta = pi
    CHECK_THAT(estimators::variance_closed_form(inputs), WithinAbs(0.0, 1e-15));
  }
  SECTION("worked two-observation case") {
    estimators::VarianceInputs inputs;
    inputs.first_order = {{0, 0.6}, {1, 0.4}};
    inputs.joint = {{{0, 1}, 0.0}};
    inputs.theta = {{0, 0.5}, {1, 0.25}};
    const double expected = 0.6 * std::pow(0.5 / 0.6 - 0.75, 2) +
                            0.4 * std::pow(0.25 / 0.4 - 0.75, 2);
    CHECK_THAT(estimators::variance_closed_form(inputs), WithinAbs(expected, 1e-9));
    CHECK_THAT(estimators::variance_closed_form(inputs), WithinAbs(0.0104167, 1e-7));
  }
  SECTION("matches enumeration on random small designs") {
    rng::Stream stream(1001, {0});
    for (int trial = 0; trial < 10; ++trial) {
      const int n = 2 + static_cast<int>(stream.next_below(5));
      const int k = 1 + static_cast<int>(stream.next_below(std::min(n, 3)));
      oracle::DesignDistribution design;
      design.k = k;
      std::vector<int> pick(k);
      for (int i = 0; i < k; ++i) pick[i] = i;
      double total = 0.0;
      while (true) {
        oracle::DesignDistribution::Outcome o;
        o.subset.assign(pick.begin(), pick.end());
        o.prob = 0.05 + stream.next_unit();
        total += o.prob;
        design.support.push_back(o);
        int i = k - 1;
        while (i >= 0 && pick[i] == n - k + i) --i;
        if (i < 0) break;
        ++pick[i];
        for (int j = i + 1; j < k; ++j) pick[j] = pick[j - 1] + 1;
      }
      for (auto& o : design.support) o.prob /= total;

      IdValueMap rewards, preds;
      for (int i = 0; i < n; ++i) {
        rewards[i] = stream.next_unit();
        preds[i] = stream.next_unit();
      }
      const auto tables = oracle::enumerate_inclusion(design);
      const auto moments =
          oracle::enumerate_estimator_moments(design, rewards, preds, tables.first);

      estimators::VarianceInputs inputs;
      inputs.first_order = tables.first;
      inputs.joint = tables.joint;
      inputs.theta = rewards;
      CHECK_THAT(estimators::variance_closed_form(inputs),
                 WithinAbs(moments.ipw.variance, 1e-9));
      for (auto& [id, t] : inputs.theta) t -= preds.at(id);
      CHECK_THAT(estimators::variance_closed_form(inputs),
                 WithinAbs(moments.dr.variance, 1e-9));
    }
  }
}

TEST_CASE("entropy variance bound") {
  SECTION("equal predictions, N=10, K=2") {
    IdValueMap preds;
    for (int i = 0; i < 10; ++i) preds[i] = 0.4;
    const auto bound = estimators::bound_entropy(preds, 0.7, 2);
    CHECK_THAT(bound.c1, WithinAbs(40.0, 1e-9));
    CHECK_THAT(bound.c1_dr, WithinAbs(80.0, 1e-9));
    for (const auto& [id, g] : bound.g) CHECK(g == 1.0);
  }
  SECTION("large beta limit approaches N^2/K - N") {
    IdValueMap preds = {{0, 0.2}, {1, 0.9}, {2, 0.5}, {3, 0.7}};
    const auto bound = estimators::bound_entropy(preds, 1e12, 2);
    CHECK_THAT(bound.c1, WithinAbs(16.0 / 2 - 4.0, 1e-6));
  }
  SECTION("assumption violation is a contract error") {
    IdValueMap preds = {{0, 0.01}, {1, 0.99}, {2, 0.05}};
    CHECK_THROWS_AS(estimators::bound_entropy(preds, 0.05, 3), std::logic_error);
  }
  SECTION("g is at least one and gamma at least N") {
    rng::Stream stream(1002, {0});
    IdValueMap preds;
    for (int i = 0; i < 8; ++i) preds[i] = stream.next_unit();
    const auto bound = estimators::bound_entropy(preds, 0.8, 1);
    for (const auto& [id, g] : bound.g) CHECK(g >= 1.0);
    CHECK(bound.gamma >= 8.0);
  }
}

TEST_CASE("kl variance bound") {
  SECTION("equal predictions reduce to the entropy bound") {
    IdValueMap preds;
    for (int i = 0; i < 10; ++i) preds[i] = 0.4;
    const auto ent = estimators::bound_entropy(preds, 0.7, 2);
    const auto kl = estimators::bound_kl(preds, 0.7, 2);
    CHECK_THAT(kl.c1, WithinAbs(ent.c1, 1e-9));
  }
  SECTION("kl bound dominates the entropy bound") {
    rng::Stream stream(1003, {0});
    for (int trial = 0; trial < 20; ++trial) {
      IdValueMap preds;
      for (int i = 0; i < 8; ++i) preds[i] = 0.1 + 0.9 * stream.next_unit();
      const double beta = 1.0 + 3.0 * stream.next_unit();
      const auto ent = estimators::bound_entropy(preds, beta, 2);
      const auto kl = estimators::bound_kl(preds, beta, 2);
      CHECK(kl.c1 >= ent.c1 - 1e-9);
    }
  }
  SECTION("nonpositive predictions are rejected") {
    CHECK_THROWS_AS(estimators::bound_kl({{0, 0.0}, {1, 0.5}}, 1.0, 1),
                    std::invalid_argument);
  }
}

TEST_CASE("hoeffding half-width") {
  SECTION("flat predictions give gamma = N") {
    IdValueMap preds;
    for (int i = 0; i < 7; ++i) preds[i] = 0.3;
    CHECK_THAT(estimators::skew_gamma(preds, 0.5, estimators::BoundStrategy::kEntropy),
               WithinAbs(7.0, 1e-12));
  }
  SECTION("worked value at gamma=10, m=50, delta=0.05") {
    // 10 flat predictions make gamma exactly 10; the half-width is then
    // sqrt(ln 40) = 1.92064...
    IdValueMap preds;
    for (int i = 0; i < 10; ++i) preds[i] = 0.5;
    const double hw = estimators::hoeffding_halfwidth(
        preds, 1.0, estimators::BoundStrategy::kEntropy, 50, 0.05);
    CHECK_THAT(hw, WithinAbs(std::sqrt(std::log(40.0)), 1e-12));
    CHECK_THAT(hw, WithinAbs(1.9207, 2e-4));
  }
  SECTION("gamma is nonincreasing in beta") {
    rng::Stream stream(1004, {0});
    IdValueMap preds;
    for (int i = 0; i < 9; ++i) preds[i] = 0.05 + 0.95 * stream.next_unit();
    for (auto strategy :
         {estimators::BoundStrategy::kEntropy, estimators::BoundStrategy::kKl}) {
      double prev = std::numeric_limits<double>::infinity();
      for (double beta : {0.1, 0.3, 0.8, 2.0, 5.0}) {
        const double g = estimators::skew_gamma(preds, beta, strategy);
        CHECK(g <= prev + 1e-12);
        prev = g;
      }
    }
  }
  SECTION("domain violations") {
    IdValueMap preds = {{0, 0.5}};
    CHECK_THROWS_AS(estimators::hoeffding_halfwidth(
                        preds, 1.0, estimators::BoundStrategy::kEntropy, 0, 0.05),
                    std::invalid_argument);
    CHECK_THROWS_AS(estimators::hoeffding_halfwidth(
                        preds, 1.0, estimators::BoundStrategy::kEntropy, 10, 1.5),
                    std::invalid_argument);
    CHECK_THROWS_AS(estimators::hoeffding_halfwidth(
                        preds, -1.0, estimators::BoundStrategy::kEntropy, 10, 0.05),
                    std::invalid_argument);
  }
}

TEST_CASE("variance inputs validation") {
  estimators::VarianceInputs inputs;
  inputs.first_order = {{0, 0.6}, {1, 0.4}};
  inputs.theta = {{0, 0.5}, {1, 0.25}};

  SECTION("unsorted joint keys are rejected") {
    inputs.joint = {{{1, 0}, 0.1}};
    CHECK_THROWS_AS(inputs.validate(), std::invalid_argument);
  }
  SECTION("diagonal must match the marginals") {
    inputs.joint = {{{0, 0}, 0.5}};
    CHECK_THROWS_AS(inputs.validate(), std::invalid_argument);
  }
  SECTION("missing theta is rejected") {
    inputs.theta.erase(1);
    CHECK_THROWS_AS(inputs.validate(), std::invalid_argument);
  }
}
