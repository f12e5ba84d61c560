// Copyright 2026 The Vitiseg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VITISEG_RNG_HPP_
#define VITISEG_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace vitiseg {

/// Seeded pseudo-random source. All randomness in the toolkit flows through
/// explicit Rng instances; there is no hidden global state. The uniform
/// mapping from raw 64-bit draws is fixed here (rather than relying on
/// std::uniform_real_distribution) so streams are identical across standard
/// library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

  bool coin() { return (next_u64() & 1u) != 0; }

  /// Standard normal via Box-Muller on two uniform draws.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::mt19937_64 engine_;
};

/// splitmix64 finalizer, used to derive well-separated child seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a 64
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Child seed for per-item work: seed = hash(global_seed, item_id, epoch).
inline std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view item_id,
                                 std::uint64_t epoch) {
  return mix_seed(mix_seed(global_seed ^ hash_string(item_id)) ^ epoch);
}

}  // namespace vitiseg

#endif  // VITISEG_RNG_HPP_
