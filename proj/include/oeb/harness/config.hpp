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

#ifndef OEB_HARNESS_CONFIG_HPP
#define OEB_HARNESS_CONFIG_HPP

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "oeb/design.hpp"
#include "oeb/env.hpp"
#include "oeb/model.hpp"

namespace oeb::harness {

/// Configuration or input validation problem; the CLI maps this to exit 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One [strategy] section: a strategy plus the parameter grid to sweep
/// (beta for entropy/kl, alpha for ABS; srs and mps carry a single
/// placeholder 0).
struct StrategyGrid {
  design::StrategyConfig base;
  std::vector<double> params;
};

/// Fully parsed experiment definition.
struct ExperimentConfig {
  enum class EnvKind { kSynth, kCsv };
  EnvKind env_kind = EnvKind::kSynth;
  env::SynthSpec synth;
  std::string csv_path;
  env::CsvSchema csv;

  model::RewardModel::Kind model_kind = model::RewardModel::Kind::kRidge;
  model::FitParams fit_params;
  double clamp_floor = model::kPredictionFloor;

  int reps = 1;
  double budget_fraction = 0.05;
  std::uint64_t seed = 0;
  std::string out_dir;  // may be empty; resolved by the CLI

  std::vector<StrategyGrid> strategies;
};

namespace detail {

struct RawSection {
  std::string name;
  int line = 0;
  std::map<std::string, std::string> entries;
  std::map<std::string, bool> consumed;
};

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<RawSection> parse_sections(std::istream& in, const std::string& where) {
  std::vector<RawSection> sections;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(where + ":" + std::to_string(line_no) + ": malformed section header");
      sections.push_back({trim(line.substr(1, line.size() - 2)), line_no, {}, {}});
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(where + ":" + std::to_string(line_no) + ": expected key = value");
    if (sections.empty())
      throw ConfigError(where + ":" + std::to_string(line_no) + ": key outside any section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto& section = sections.back();
    if (section.entries.count(key))
      throw ConfigError(where + ": " + section.name + "." + key + ": duplicate key");
    section.entries[key] = value;
  }
  return sections;
}

class SectionReader {
 public:
  SectionReader(RawSection& raw, std::string path) : raw_(raw), path_(std::move(path)) {}

  std::optional<std::string> get(const std::string& key) {
    auto it = raw_.entries.find(key);
    if (it == raw_.entries.end()) return std::nullopt;
    raw_.consumed[key] = true;
    return it->second;
  }

  std::string require(const std::string& key) {
    auto v = get(key);
    if (!v) throw ConfigError(path_ + "." + key + ": missing required key");
    return *v;
  }

  double number(const std::string& key, double fallback) {
    auto v = get(key);
    return v ? parse_number(key, *v) : fallback;
  }

  double require_number(const std::string& key) { return parse_number(key, require(key)); }

  long long integer(const std::string& key, long long fallback) {
    auto v = get(key);
    if (!v) return fallback;
    const double d = parse_number(key, *v);
    if (d != static_cast<long long>(d))
      throw ConfigError(path_ + "." + key + ": expected an integer");
    return static_cast<long long>(d);
  }

  bool boolean(const std::string& key, bool fallback) {
    auto v = get(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1") return true;
    if (*v == "false" || *v == "0") return false;
    throw ConfigError(path_ + "." + key + ": expected true or false");
  }

  std::vector<double> number_list(const std::string& key) {
    const std::string v = require(key);
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number(key, trim(item)));
    if (out.empty()) throw ConfigError(path_ + "." + key + ": empty list");
    return out;
  }

  std::vector<std::string> string_list(const std::string& key) {
    const std::string v = require(key);
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) throw ConfigError(path_ + "." + key + ": empty list entry");
      out.push_back(item);
    }
    if (out.empty()) throw ConfigError(path_ + "." + key + ": empty list");
    return out;
  }

  void finish() const {
    for (const auto& [key, value] : raw_.entries)
      if (!raw_.consumed.count(key))
        throw ConfigError(path_ + "." + key + ": unknown key");
  }

  const std::string& path() const { return path_; }

 private:
  double parse_number(const std::string& key, const std::string& text) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    if (ec != std::errc{} || ptr != text.data() + text.size())
      throw ConfigError(path_ + "." + key + ": cannot parse number '" + text + "'");
    return out;
  }

  RawSection& raw_;
  std::string path_;
};

inline design::StrategyConfig::Kind parse_strategy_kind(const std::string& name,
                                                        const std::string& path) {
  using Kind = design::StrategyConfig::Kind;
  if (name == "srs") return Kind::kSrs;
  if (name == "mps") return Kind::kMps;
  if (name == "entropy") return Kind::kEntropy;
  if (name == "kl") return Kind::kKl;
  if (name == "abs-logistic") return Kind::kAbsLogistic;
  if (name == "abs-exponential") return Kind::kAbsExponential;
  throw ConfigError(path + ".kind: unknown strategy '" + name + "'");
}

}  // namespace detail

/**
 * Parses the sectioned key-value experiment format. Sections: one
 * [environment], one [model], one [run], and one or more [strategy].
 * Unknown sections and keys are errors, reported with their field path.
 */
inline ExperimentConfig parse_config(std::istream& in, const std::string& where) {
  auto sections = detail::parse_sections(in, where);
  ExperimentConfig config;
  bool saw_env = false, saw_model = false, saw_run = false;
  int strategy_index = 0;

  for (auto& raw : sections) {
    if (raw.name == "environment") {
      if (saw_env) throw ConfigError(where + ": duplicate [environment] section");
      saw_env = true;
      detail::SectionReader r(raw, "environment");
      const std::string kind = r.require("kind");
      if (kind == "synth") {
        config.env_kind = ExperimentConfig::EnvKind::kSynth;
        config.synth.d = static_cast<int>(r.integer("d", 2));
        config.synth.periods = static_cast<int>(r.integer("periods", 1));
        config.synth.per_period = static_cast<int>(r.integer("per_period", 100));
        config.synth.weight_seed = static_cast<std::uint64_t>(r.integer("weight_seed", 1));
        config.synth.context_seed = static_cast<std::uint64_t>(r.integer("context_seed", 2));
        const std::string noise = r.get("noise").value_or("none");
        if (noise == "none") {
          config.synth.noise = NoiseSpec::none();
        } else if (noise == "bernoulli") {
          config.synth.noise = NoiseSpec::bernoulli();
        } else if (noise.rfind("gauss:", 0) == 0) {
          double sigma = 0.0;
          const std::string s = noise.substr(6);
          auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), sigma);
          if (ec != std::errc{} || ptr != s.data() + s.size() || sigma < 0.0)
            throw ConfigError("environment.noise: bad gauss sigma '" + s + "'");
          config.synth.noise = NoiseSpec::trunc_gauss(sigma);
        } else {
          throw ConfigError("environment.noise: unknown noise '" + noise + "'");
        }
        const std::string grouping = r.get("grouping").value_or("random");
        if (grouping == "random")
          config.synth.grouping = env::SynthSpec::Grouping::kRandom;
        else if (grouping == "temporal-drift")
          config.synth.grouping = env::SynthSpec::Grouping::kTemporalDrift;
        else
          throw ConfigError("environment.grouping: unknown grouping '" + grouping + "'");
        config.synth.drift_angle = r.number("drift_angle", 0.1);
        try {
          config.synth.validate();
        } catch (const std::invalid_argument& e) {
          throw ConfigError(std::string("environment: ") + e.what());
        }
      } else if (kind == "csv") {
        config.env_kind = ExperimentConfig::EnvKind::kCsv;
        config.csv_path = r.require("path");
        config.csv.feature_columns = r.string_list("features");
        config.csv.reward_column = r.require("reward");
        if (auto p = r.get("period_column")) config.csv.period_column = *p;
        config.csv.normalize = r.boolean("normalize", false);
        config.csv.periods = static_cast<int>(r.integer("periods", 1));
        config.csv.partition_seed =
            static_cast<std::uint64_t>(r.integer("partition_seed", 0));
        try {
          config.csv.validate();
        } catch (const std::invalid_argument& e) {
          throw ConfigError(std::string("environment: ") + e.what());
        }
      } else {
        throw ConfigError("environment.kind: unknown kind '" + kind + "'");
      }
      r.finish();
    } else if (raw.name == "model") {
      if (saw_model) throw ConfigError(where + ": duplicate [model] section");
      saw_model = true;
      detail::SectionReader r(raw, "model");
      const std::string kind = r.get("kind").value_or("ridge");
      if (kind == "ridge")
        config.model_kind = model::RewardModel::Kind::kRidge;
      else if (kind == "knn")
        config.model_kind = model::RewardModel::Kind::kKnn;
      else if (kind == "noisy-oracle")
        config.model_kind = model::RewardModel::Kind::kNoisyOracle;
      else
        throw ConfigError("model.kind: unknown kind '" + kind + "'");
      config.fit_params.ridge_penalty = r.number("penalty", 1e-3);
      config.fit_params.knn_k = static_cast<int>(r.integer("k", 5));
      config.fit_params.oracle_sigma = r.number("sigma", 0.0);
      config.clamp_floor = r.number("clamp_floor", model::kPredictionFloor);
      if (!(config.clamp_floor > 0.0 && config.clamp_floor <= 1.0))
        throw ConfigError("model.clamp_floor: must be in (0, 1]");
      r.finish();
    } else if (raw.name == "run") {
      if (saw_run) throw ConfigError(where + ": duplicate [run] section");
      saw_run = true;
      detail::SectionReader r(raw, "run");
      config.reps = static_cast<int>(r.integer("reps", 1));
      if (config.reps < 1) throw ConfigError("run.reps: must be >= 1");
      config.budget_fraction = r.number("budget_fraction", 0.05);
      if (!(config.budget_fraction > 0.0 && config.budget_fraction <= 1.0))
        throw ConfigError("run.budget_fraction: must be in (0, 1]");
      config.seed = static_cast<std::uint64_t>(r.integer("seed", 0));
      config.out_dir = r.get("out").value_or("");
      r.finish();
    } else if (raw.name == "strategy") {
      const std::string path = "strategy[" + std::to_string(strategy_index++) + "]";
      detail::SectionReader r(raw, path);
      StrategyGrid grid;
      grid.base.kind = detail::parse_strategy_kind(r.require("kind"), path);
      using Kind = design::StrategyConfig::Kind;
      switch (grid.base.kind) {
        case Kind::kSrs:
        case Kind::kMps:
          grid.params = {0.0};
          break;
        case Kind::kEntropy:
        case Kind::kKl:
          grid.params = r.number_list("beta");
          for (double b : grid.params)
            if (!(b > 0.0)) throw ConfigError(path + ".beta: must be > 0");
          break;
        case Kind::kAbsLogistic:
        case Kind::kAbsExponential:
          grid.params = r.number_list("alpha");
          grid.base.abs.clusters = static_cast<int>(r.integer("clusters", 10));
          grid.base.abs.greedy_fraction = r.number("greedy_fraction", 0.1);
          grid.base.abs.trim = r.number("trim", 0.0);
          break;
      }
      try {
        design::StrategyConfig probe = grid.base;
        probe.beta = grid.params.front() > 0.0 ? grid.params.front() : 1.0;
        probe.abs.alpha = grid.params.front();
        probe.validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError(path + ": " + e.what());
      }
      config.strategies.push_back(std::move(grid));
      r.finish();
    } else {
      throw ConfigError(where + ":" + std::to_string(raw.line) + ": unknown section [" +
                        raw.name + "]");
    }
  }

  if (!saw_env) throw ConfigError(where + ": missing [environment] section");
  if (config.strategies.empty()) throw ConfigError(where + ": no [strategy] sections");
  return config;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse_config(in, path);
}

/// Output directory precedence: --out flag, then the config's [run] out,
/// then $OEB_OUT_DIR, then the current directory.
inline std::string resolve_out_dir(const std::string& flag_out,
                                   const std::string& config_out) {
  if (!flag_out.empty()) return flag_out;
  if (!config_out.empty()) return config_out;
  if (const char* env = std::getenv("OEB_OUT_DIR"); env && *env) return env;
  return ".";
}

}  // namespace oeb::harness

#endif  // OEB_HARNESS_CONFIG_HPP
