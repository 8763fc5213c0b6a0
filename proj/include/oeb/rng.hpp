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

#ifndef OEB_RNG_HPP
#define OEB_RNG_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace oeb::rng {

/// SplitMix64 finalizer. Bijective on 64-bit words.
inline constexpr std::uint64_t mix(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Collapses a list of key components (seed, tags, ids, indices) into one
/// stream key. Order-sensitive.
inline std::uint64_t key(std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = 0x853c49e6748fea9bULL;
  for (auto p : parts) h = mix(h ^ p);
  return h;
}

/**
 * Counter-based random stream. The n-th output depends only on (key, n),
 * so streams keyed by (seed, id) are order-independent: drawing for id A
 * never perturbs the values drawn for id B.
 */
class Stream {
 public:
  explicit Stream(std::uint64_t stream_key) noexcept : key_(stream_key) {}
  Stream(std::uint64_t seed, std::initializer_list<std::uint64_t> parts) noexcept
      : key_(mix(seed ^ key(parts))) {}

  std::uint64_t next_u64() noexcept {
    counter_ += 0x9e3779b97f4a7c15ULL;
    return mix(key_ ^ counter_);
  }

  /// Uniform on [0, 1) with 53-bit resolution.
  double next_unit() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform on the open interval (0, 1); zeros are resampled.
  double next_open_unit() noexcept {
    double u = next_unit();
    while (u <= 0.0 || u >= 1.0) u = next_unit();
    return u;
  }

  /// Standard normal via Box-Muller.
  double next_normal() noexcept {
    const double u1 = next_open_unit();
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  /// Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) noexcept {
    // Rejection-free would bias for huge n; n here is always tiny vs 2^64.
    return next_u64() % n;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Domain-separation tags for the derived streams used across the library.
inline constexpr std::uint64_t kTagReward = 0x5245574152440001ULL;
inline constexpr std::uint64_t kTagPareto = 0x50415245544f0002ULL;
inline constexpr std::uint64_t kTagSequential = 0x53455155454e0003ULL;
inline constexpr std::uint64_t kTagCluster = 0x434c555354520004ULL;
inline constexpr std::uint64_t kTagContext = 0x434f4e5445580005ULL;
inline constexpr std::uint64_t kTagWeights = 0x5745494748540006ULL;
inline constexpr std::uint64_t kTagPartition = 0x5041525449540007ULL;
inline constexpr std::uint64_t kTagModelNoise = 0x4d4f444e4f490008ULL;

}  // namespace oeb::rng

#endif  // OEB_RNG_HPP
