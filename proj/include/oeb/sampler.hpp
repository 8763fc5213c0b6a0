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

#ifndef OEB_SAMPLER_HPP
#define OEB_SAMPLER_HPP

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "oeb/core.hpp"
#include "oeb/rng.hpp"

namespace oeb::sampler {

/**
 * Exact draw for the sequential setting (K = 1): inverse-CDF walk over the
 * plan in ingestion order, so Pr(id) equals the plan probability exactly.
 */
inline SampleDraw draw_sequential(const InclusionPlan& plan, std::uint64_t seed) {
  plan.validate();
  if (plan.budget != 1)
    throw std::logic_error("draw_sequential: requires K = 1");
  rng::Stream stream(seed, {rng::kTagSequential});
  const double u = stream.next_unit();
  SampleDraw draw;
  draw.plan = plan;
  double cum = 0.0;
  ObsId last = plan.probs.begin()->first;
  for (const auto& [id, p] : plan.probs) {
    cum += p;
    last = id;
    if (u < cum) {
      draw.selected.insert(id);
      return draw;
    }
  }
  draw.selected.insert(last);  // u landed in the final rounding sliver
  return draw;
}

/**
 * Pareto order sampling: each id gets V(x) = U(1 - p) / ((1 - U) p) with U
 * uniform on (0, 1), and the K smallest V are selected. Forced ids (p = 1)
 * have V = 0 and always enter the sample. Per-id uniforms come from streams
 * keyed by (seed, id), so the draw is independent of evaluation order; ties
 * in V break by ingestion order.
 */
inline SampleDraw draw_pareto(const InclusionPlan& plan, std::uint64_t seed) {
  plan.validate();
  struct Entry {
    double v;
    ObsId id;
  };
  std::vector<Entry> entries;
  entries.reserve(plan.probs.size());
  for (const auto& [id, p] : plan.probs) {
    double v = 0.0;
    if (p < 1.0) {
      rng::Stream stream(seed, {rng::kTagPareto, static_cast<std::uint64_t>(id)});
      const double u = stream.next_open_unit();
      v = u * (1.0 - p) / ((1.0 - u) * p);
    }
    entries.push_back({v, id});
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.v < b.v; });
  SampleDraw draw;
  draw.plan = plan;
  for (int i = 0; i < plan.budget; ++i) draw.selected.insert(entries[i].id);
  return draw;
}

/// Frequency each id entered the sample over independent Pareto draws.
inline IdValueMap empirical_inclusion(const InclusionPlan& plan, int trials,
                                      std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("empirical_inclusion: trials < 1");
  plan.validate();
  IdValueMap counts;
  for (const auto& [id, p] : plan.probs) counts[id] = 0.0;
  for (int t = 0; t < trials; ++t) {
    const auto draw = draw_pareto(plan, rng::key({seed, static_cast<std::uint64_t>(t)}));
    for (ObsId id : draw.selected) counts[id] += 1.0;
  }
  for (auto& [id, c] : counts) c /= trials;
  return counts;
}

}  // namespace oeb::sampler

#endif  // OEB_SAMPLER_HPP
