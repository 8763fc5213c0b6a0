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

#ifndef OEB_MODEL_HPP
#define OEB_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "oeb/core.hpp"
#include "oeb/rng.hpp"

namespace oeb::model {

/// Default lower clamp for predictions; keeps IPW weights below 1e6.
inline constexpr double kPredictionFloor = 1e-6;

/// (context, realized reward) rows accumulated from all prior draws.
struct TrainingSet {
  struct Row {
    std::vector<double> context;
    double reward = 0.0;
  };
  std::vector<Row> rows;

  void add(std::vector<double> context, double reward) {
    if (!(reward >= 0.0 && reward <= 1.0))
      throw std::invalid_argument("TrainingSet: reward outside [0,1]");
    if (!rows.empty() && context.size() != rows.front().context.size())
      throw std::invalid_argument("TrainingSet: context dimension mismatch");
    rows.push_back({std::move(context), reward});
  }

  std::size_t size() const { return rows.size(); }
};

struct FitParams {
  double ridge_penalty = 1e-3;
  int knn_k = 5;
  double oracle_sigma = 0.0;
  std::uint64_t oracle_seed = 0;
};

namespace detail {

/// Solves A x = b by Gaussian elimination with partial pivoting. A is dense
/// row-major n x n.
inline std::vector<double> solve_linear(std::vector<double> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
    if (std::abs(a[pivot * n + col]) < 1e-12)
      throw std::runtime_error("solve_linear: singular system");
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[pivot * n + c]);
      std::swap(b[col], b[pivot]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] / a[col * n + col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t r = n; r-- > 0;) {
    double s = b[r];
    for (std::size_t c = r + 1; c < n; ++c) s -= a[r * n + c] * x[c];
    x[r] = s / a[r * n + r];
  }
  return x;
}

struct Ridge {
  std::vector<double> weights;
  double intercept = 0.0;

  double predict(const Observation& obs) const {
    if (obs.context.size() != weights.size())
      throw std::invalid_argument("ridge: context dimension mismatch");
    double y = intercept;
    for (std::size_t i = 0; i < weights.size(); ++i) y += weights[i] * obs.context[i];
    return y;
  }
};

struct Knn {
  TrainingSet data;
  int k = 5;

  double predict(const Observation& obs) const {
    if (!data.rows.empty() && obs.context.size() != data.rows.front().context.size())
      throw std::invalid_argument("knn: context dimension mismatch");
    // (squared distance, row index); ties by row index for determinism.
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(data.rows.size());
    for (std::size_t i = 0; i < data.rows.size(); ++i) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < obs.context.size(); ++j) {
        const double diff = obs.context[j] - data.rows[i].context[j];
        d2 += diff * diff;
      }
      dist.emplace_back(d2, i);
    }
    std::sort(dist.begin(), dist.end());
    double mean = 0.0;
    for (int i = 0; i < k; ++i) mean += data.rows[dist[i].second].reward;
    return mean / k;
  }
};

struct NoisyOracle {
  double sigma = 0.0;
  std::uint64_t seed = 0;

  double predict(const Observation& obs) const {
    double v = obs.mean_reward;
    if (sigma > 0.0) {
      rng::Stream s(seed, {rng::kTagModelNoise, static_cast<std::uint64_t>(obs.id)});
      v += sigma * s.next_normal();
    }
    return std::clamp(v, 0.0, 1.0);
  }
};

}  // namespace detail

/**
 * A fitted reward predictor. Ridge and k-NN read only the observation's
 * context; the noisy oracle reads the hidden mean reward (it exists to
 * isolate sampling behavior from model error in diagnostics).
 */
class RewardModel {
 public:
  enum class Kind { kRidge, kKnn, kNoisyOracle };

  static RewardModel ridge(detail::Ridge r) { return RewardModel(std::move(r)); }
  static RewardModel knn(detail::Knn k) { return RewardModel(std::move(k)); }
  static RewardModel noisy_oracle(detail::NoisyOracle o) { return RewardModel(std::move(o)); }

  double predict(const Observation& obs) const {
    return std::visit([&](const auto& m) { return m.predict(obs); }, impl_);
  }

 private:
  template <typename T>
  explicit RewardModel(T impl) : impl_(std::move(impl)) {}
  std::variant<detail::Ridge, detail::Knn, detail::NoisyOracle> impl_;
};

/**
 * Fits a reward model. Deterministic given (data, params). Ridge solves the
 * penalized normal equations with an unpenalized intercept; k-NN averages
 * the k nearest rows by Euclidean distance.
 */
inline RewardModel fit(RewardModel::Kind kind, const TrainingSet& data,
                       const FitParams& params = {}) {
  switch (kind) {
    case RewardModel::Kind::kRidge: {
      if (data.rows.empty()) throw std::invalid_argument("fit ridge: no training rows");
      const std::size_t d = data.rows.front().context.size();
      const std::size_t n = d + 1;  // weights + intercept
      std::vector<double> gram(n * n, 0.0), rhs(n, 0.0);
      for (const auto& row : data.rows) {
        for (std::size_t i = 0; i < d; ++i) {
          for (std::size_t j = 0; j < d; ++j)
            gram[i * n + j] += row.context[i] * row.context[j];
          gram[i * n + d] += row.context[i];
          gram[d * n + i] += row.context[i];
          rhs[i] += row.context[i] * row.reward;
        }
        gram[d * n + d] += 1.0;
        rhs[d] += row.reward;
      }
      for (std::size_t i = 0; i < d; ++i) gram[i * n + i] += params.ridge_penalty;
      auto sol = detail::solve_linear(std::move(gram), std::move(rhs));
      detail::Ridge r;
      r.weights.assign(sol.begin(), sol.begin() + d);
      r.intercept = sol[d];
      return RewardModel::ridge(std::move(r));
    }
    case RewardModel::Kind::kKnn: {
      if (params.knn_k < 1) throw std::invalid_argument("fit knn: k must be >= 1");
      if (data.rows.size() < static_cast<std::size_t>(params.knn_k))
        throw std::invalid_argument("fit knn: needs at least k rows");
      detail::Knn m;
      m.data = data;
      m.k = params.knn_k;
      return RewardModel::knn(std::move(m));
    }
    case RewardModel::Kind::kNoisyOracle: {
      if (params.oracle_sigma < 0.0)
        throw std::invalid_argument("fit noisy-oracle: negative sigma");
      return RewardModel::noisy_oracle({params.oracle_sigma, params.oracle_seed});
    }
  }
  throw std::logic_error("fit: unknown model kind");
}

/// Predictions for a set of observations, clamped into [floor, 1] so every
/// design strategy's positivity precondition holds.
inline IdValueMap predict_clamped(const RewardModel& model,
                                  std::span<const Observation> observations,
                                  double floor = kPredictionFloor) {
  if (!(floor > 0.0 && floor <= 1.0))
    throw std::invalid_argument("predict_clamped: floor outside (0,1]");
  IdValueMap out;
  for (const auto& obs : observations)
    out[obs.id] = std::clamp(model.predict(obs), floor, 1.0);
  return out;
}

}  // namespace oeb::model

#endif  // OEB_MODEL_HPP
