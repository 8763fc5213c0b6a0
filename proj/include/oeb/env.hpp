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

#ifndef OEB_ENV_HPP
#define OEB_ENV_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "oeb/core.hpp"
#include "oeb/rng.hpp"

namespace oeb::env {

/// Synthetic population family: contexts uniform on [-1,1]^d, mean rewards
/// logistic(w . x). Temporal drift rotates w in the plane of the first two
/// coordinates by a fixed angle each period.
struct SynthSpec {
  int d = 2;
  int periods = 1;
  int per_period = 100;
  std::uint64_t weight_seed = 1;
  std::uint64_t context_seed = 2;
  NoiseSpec noise = NoiseSpec::none();
  enum class Grouping { kRandom, kTemporalDrift };
  Grouping grouping = Grouping::kRandom;
  double drift_angle = 0.1;  // radians per period, temporal-drift only

  void validate() const {
    if (d < 1) throw std::invalid_argument("SynthSpec: d must be >= 1");
    if (per_period < 2) throw std::invalid_argument("SynthSpec: per_period must be >= 2");
    if (periods < 1) throw std::invalid_argument("SynthSpec: periods must be >= 1");
  }
};

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Generating weights of a synth spec (before drift), standard normal
/// entries drawn from the weight seed.
inline std::vector<double> synth_weights(const SynthSpec& spec) {
  rng::Stream ws(spec.weight_seed, {rng::kTagWeights});
  std::vector<double> w(spec.d);
  for (auto& v : w) v = ws.next_normal();
  return w;
}

/// Deterministic synthetic period sequence. Budgets default to 1; the
/// harness re-stamps them from its budget fraction.
inline std::vector<Period> synth_generate(const SynthSpec& spec) {
  spec.validate();
  const std::vector<double> base_w = synth_weights(spec);
  std::vector<Period> periods;
  periods.reserve(spec.periods);
  for (int t = 0; t < spec.periods; ++t) {
    std::vector<double> w = base_w;
    if (spec.grouping == SynthSpec::Grouping::kTemporalDrift && spec.d >= 2) {
      const double a = spec.drift_angle * t;
      const double c = std::cos(a), s = std::sin(a);
      const double w0 = base_w[0], w1 = base_w[1];
      w[0] = c * w0 - s * w1;
      w[1] = s * w0 + c * w1;
    }
    Period period;
    period.index = t;
    period.budget = 1;
    period.observations.reserve(spec.per_period);
    for (int i = 0; i < spec.per_period; ++i) {
      Observation obs;
      obs.id = static_cast<ObsId>(t) * spec.per_period + i;
      rng::Stream cs(spec.context_seed,
                     {rng::kTagContext, static_cast<std::uint64_t>(obs.id)});
      obs.context.resize(spec.d);
      double dot = 0.0;
      for (int j = 0; j < spec.d; ++j) {
        obs.context[j] = 2.0 * cs.next_unit() - 1.0;
        dot += w[j] * obs.context[j];
      }
      obs.mean_reward = logistic(dot);
      obs.noise = spec.noise;
      period.observations.push_back(std::move(obs));
    }
    period.validate();
    periods.push_back(std::move(period));
  }
  return periods;
}

/// Column layout and options for CSV ingestion. Dialect: comma-separated,
/// first row header, '.' decimal, no quoting. Empty feature cells become 0;
/// empty or non-numeric rewards are errors.
struct CsvSchema {
  std::vector<std::string> feature_columns;
  std::string reward_column;
  std::optional<std::string> period_column;  // integer labels when present
  bool normalize = false;                     // min-max rewards to [0,1]
  int periods = 1;                            // T for the random partition
  std::uint64_t partition_seed = 0;

  void validate() const {
    if (feature_columns.empty())
      throw std::invalid_argument("CsvSchema: no feature columns");
    if (reward_column.empty())
      throw std::invalid_argument("CsvSchema: no reward column");
    if (!period_column && periods < 1)
      throw std::invalid_argument("CsvSchema: periods must be >= 1");
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::optional<double> parse_double(const std::string& s) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  while (e > b && (*(e - 1) == ' ' || *(e - 1) == '\t' || *(e - 1) == '\r')) --e;
  if (b == e) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc{} || ptr != e) return std::nullopt;
  return v;
}

}  // namespace detail

/**
 * Reads a CSV file into periods. Rows with an explicit period column are
 * grouped by label (ascending); otherwise rows are partitioned at random
 * into `periods` near-equal groups using the partition seed. Missing feature
 * cells become 0. With `normalize`, rewards are min-max mapped to [0,1];
 * otherwise they must already lie in [0,1].
 */
inline std::vector<Period> csv_ingest(const std::string& path, const CsvSchema& schema) {
  schema.validate();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv_ingest: cannot open " + path);

  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("csv_ingest: " + path + " is empty");
  const auto header = detail::split_csv_line(line);
  auto column_index = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      std::string h = header[i];
      while (!h.empty() && (h.back() == '\r' || h.back() == ' ')) h.pop_back();
      if (h == name) return i;
    }
    throw std::runtime_error("csv_ingest: column '" + name + "' not found in " + path);
  };

  std::vector<std::size_t> feature_idx;
  for (const auto& name : schema.feature_columns) feature_idx.push_back(column_index(name));
  const std::size_t reward_idx = column_index(schema.reward_column);
  std::optional<std::size_t> period_idx;
  if (schema.period_column) period_idx = column_index(*schema.period_column);

  struct RawRow {
    std::vector<double> context;
    double reward;
    long long period_label;
  };
  std::vector<RawRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_line(line);
    auto cell_at = [&](std::size_t i) -> const std::string& {
      static const std::string empty;
      return i < cells.size() ? cells[i] : empty;
    };
    RawRow row;
    row.context.reserve(feature_idx.size());
    for (std::size_t f = 0; f < feature_idx.size(); ++f) {
      const auto v = detail::parse_double(cell_at(feature_idx[f]));
      row.context.push_back(v.value_or(0.0));  // missing values become 0
    }
    const auto reward = detail::parse_double(cell_at(reward_idx));
    if (!reward)
      throw std::runtime_error("csv_ingest: " + path + " line " + std::to_string(line_no) +
                               ", column '" + schema.reward_column +
                               "': non-numeric reward");
    row.reward = *reward;
    row.period_label = 0;
    if (period_idx) {
      const auto label = detail::parse_double(cell_at(*period_idx));
      if (!label || *label != std::floor(*label))
        throw std::runtime_error("csv_ingest: " + path + " line " + std::to_string(line_no) +
                                 ", column '" + *schema.period_column +
                                 "': non-integer period label");
      row.period_label = static_cast<long long>(*label);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("csv_ingest: " + path + " has no data rows");

  if (schema.normalize) {
    double lo = rows.front().reward, hi = rows.front().reward;
    for (const auto& r : rows) {
      lo = std::min(lo, r.reward);
      hi = std::max(hi, r.reward);
    }
    const double span = hi - lo;
    for (auto& r : rows) r.reward = span == 0.0 ? 0.0 : (r.reward - lo) / span;
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!(rows[i].reward >= 0.0 && rows[i].reward <= 1.0))
      throw std::runtime_error("csv_ingest: reward outside [0,1] at data row " +
                               std::to_string(i + 1) + "; set normalize");
  }

  // Group rows into periods: by explicit label, or by seeded random
  // partition into near-equal parts.
  std::map<long long, std::vector<std::size_t>> groups;
  if (period_idx) {
    for (std::size_t i = 0; i < rows.size(); ++i)
      groups[rows[i].period_label].push_back(i);
  } else {
    std::vector<std::size_t> shuffled(rows.size());
    std::iota(shuffled.begin(), shuffled.end(), 0);
    rng::Stream ps(schema.partition_seed, {rng::kTagPartition});
    for (std::size_t i = 0; i + 1 < shuffled.size(); ++i) {
      const std::size_t j = i + ps.next_below(shuffled.size() - i);
      std::swap(shuffled[i], shuffled[j]);
    }
    const std::size_t t = static_cast<std::size_t>(schema.periods);
    if (rows.size() < t)
      throw std::runtime_error("csv_ingest: fewer rows than periods");
    const std::size_t base = rows.size() / t, extra = rows.size() % t;
    std::size_t pos = 0;
    for (std::size_t p = 0; p < t; ++p) {
      const std::size_t count = base + (p < extra ? 1 : 0);
      auto& g = groups[static_cast<long long>(p)];
      g.assign(shuffled.begin() + pos, shuffled.begin() + pos + count);
      std::sort(g.begin(), g.end());  // ids stay increasing within the period
      pos += count;
    }
  }

  std::vector<Period> periods;
  periods.reserve(groups.size());
  int t = 0;
  for (const auto& [label, members] : groups) {
    Period period;
    period.index = t++;
    period.budget = 1;
    for (std::size_t i : members) {
      Observation obs;
      obs.id = static_cast<ObsId>(i);
      obs.context = rows[i].context;
      obs.mean_reward = rows[i].reward;
      obs.noise = NoiseSpec::none();
      period.observations.push_back(std::move(obs));
    }
    period.validate();
    periods.push_back(std::move(period));
  }
  return periods;
}

}  // namespace oeb::env

#endif  // OEB_ENV_HPP
