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

#include "oeb/core.hpp"

using namespace oeb;

namespace {

Period make_period(std::vector<double> means, NoiseSpec noise = NoiseSpec::none(),
                   int budget = 1) {
  Period p;
  p.index = 0;
  p.budget = budget;
  for (std::size_t i = 0; i < means.size(); ++i) {
    Observation o;
    o.id = static_cast<ObsId>(i);
    o.context = {static_cast<double>(i)};
    o.mean_reward = means[i];
    o.noise = noise;
    p.observations.push_back(o);
  }
  return p;
}

}  // namespace

TEST_CASE("realize_rewards with no noise returns the mean") {
  auto p = make_period({0.7, 0.1, 1.0});
  auto r = realize_rewards(p, 42);
  CHECK(r.at(0) == 0.7);
  CHECK(r.at(1) == 0.1);
  CHECK(r.at(2) == 1.0);
}

TEST_CASE("degenerate bernoulli always pays 1") {
  auto p = make_period({1.0, 1.0}, NoiseSpec::bernoulli());
  for (std::uint64_t seed : {1, 2, 3, 99}) {
    auto r = realize_rewards(p, seed);
    CHECK(r.at(0) == 1.0);
    CHECK(r.at(1) == 1.0);
  }
}

TEST_CASE("bernoulli sample mean approaches the mean reward") {
  auto p = make_period({0.3}, NoiseSpec::bernoulli());
  double total = 0.0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) total += realize_rewards(p, i).at(0);
  CHECK_THAT(total / draws, Catch::Matchers::WithinAbs(0.3, 0.01));
}

TEST_CASE("realize_rewards is a pure function of (period, seed)") {
  auto p = make_period({0.2, 0.5, 0.8}, NoiseSpec::trunc_gauss(0.3));
  auto a = realize_rewards(p, 7);
  auto b = realize_rewards(p, 7);
  auto c = realize_rewards(p, 8);
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("truncated gaussian rewards stay inside [0,1]") {
  auto p = make_period({0.05, 0.5, 0.95}, NoiseSpec::trunc_gauss(0.8));
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    for (const auto& [id, r] : realize_rewards(p, seed)) {
      CHECK(r >= 0.0);
      CHECK(r <= 1.0);
    }
  }
}

TEST_CASE("cumulative_reward") {
  SECTION("empty sequence sums to zero") { CHECK(cumulative_reward({}) == 0.0); }

  SECTION("one draw sums its rewards") {
    SampleDraw d;
    d.selected = {0, 1};
    d.rewards = {{0, 0.2}, {1, 0.8}};
    CHECK(cumulative_reward({d}) == 1.0);
  }

  SECTION("draws add up") {
    SampleDraw a, b;
    a.selected = {0, 1};
    a.rewards = {{0, 0.4}, {1, 0.6}};
    b.selected = {2};
    b.rewards = {{2, 0.5}};
    CHECK(cumulative_reward({a, b}) == 1.5);
  }
}

TEST_CASE("population total is the sum of mean rewards") {
  auto p = make_period({0.25, 0.5, 0.75});
  CHECK(p.population_total() == 1.5);
}

TEST_CASE("period validation") {
  auto p = make_period({0.5, 0.5}, NoiseSpec::none(), 2);
  CHECK_NOTHROW(p.validate());

  SECTION("budget above N") {
    p.budget = 3;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }
  SECTION("budget below 1") {
    p.budget = 0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }
  SECTION("duplicate ids") {
    p.observations[1].id = p.observations[0].id;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }
  SECTION("mean reward out of range") {
    p.observations[0].mean_reward = 1.5;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }
}

TEST_CASE("inclusion plan validation") {
  InclusionPlan plan;
  plan.budget = 2;
  plan.probs = {{0, 1.0}, {1, 0.5}, {2, 0.5}};
  plan.forced = {0};
  CHECK_NOTHROW(plan.validate());

  SECTION("sum must equal the budget") {
    plan.probs[2] = 0.4;
    CHECK_THROWS_AS(plan.validate(), std::invalid_argument);
  }
  SECTION("probabilities live in (0,1]") {
    plan.probs[2] = 0.0;
    plan.probs[1] = 1.0;
    plan.forced = {0, 1};
    CHECK_THROWS_AS(plan.validate(), std::invalid_argument);
  }
  SECTION("forced must be exactly the ones") {
    plan.forced = {};
    CHECK_THROWS_AS(plan.validate(), std::invalid_argument);
  }
}

TEST_CASE("attach_rewards copies only selected ids and requires coverage") {
  SampleDraw d;
  d.selected = {1, 3};
  IdValueMap realized = {{1, 0.5}, {2, 0.9}, {3, 0.1}};
  auto out = attach_rewards(d, realized);
  CHECK(out.rewards == IdValueMap{{1, 0.5}, {3, 0.1}});
  realized.erase(3);
  CHECK_THROWS_AS(attach_rewards(d, realized), std::invalid_argument);
}
