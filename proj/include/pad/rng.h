// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace pad {

// 64-bit finalizer from splitmix64. Used to derive independent stream seeds.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for a sub-stream identified by a path of integers, e.g.
// derive_seed(master, {kStageLabel, context_index}).
inline uint64_t derive_seed(uint64_t master, std::initializer_list<uint64_t> path) {
  uint64_t s = mix64(master);
  for (uint64_t p : path) s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
  return s;
}

// Per-stream random source. Satisfies UniformRandomBitGenerator so it can
// feed the <random> distributions; uniform() is bit-exact across platforms.
class Rng {
 public:
  using result_type = uint64_t;

  explicit Rng(uint64_t seed) : engine_(seed) {}

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace pad
