// Copyright 2026 The akd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "akd/error.hpp"

namespace akd {

// All randomness in the library goes through std::mt19937_64 plus the
// samplers below. std::*_distribution is avoided on purpose: its output is
// not pinned by the standard, these samplers are.
using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  return fnv1a64(s.data(), s.size());
}

/// Derives an independent seed for a named substream, so that e.g. teacher
/// and student initialization never share draws.
inline std::uint64_t substream(std::uint64_t seed, std::string_view tag,
                               std::uint64_t index = 0) {
  return splitmix64(seed ^ splitmix64(fnv1a64(tag) + index));
}

/// Uniform in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_unit(rng);
}

/// Uniform integer in [lo, hi], inclusive. Rejection sampling keeps the
/// result unbiased and reproducible.
inline int uniform_int(Rng& rng, int lo, int hi) {
  if (lo > hi) throw ContractError("uniform_int: empty range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return lo + static_cast<int>(r % span);
}

/// Standard normal via Box-Muller. No cached second value: the generator
/// state alone determines the stream, which keeps serialized RNG state
/// sufficient for bitwise resume.
inline double normal_sample(Rng& rng) {
  const double u1 = 1.0 - uniform_unit(rng);  // (0, 1]
  const double u2 = uniform_unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

/// Fisher-Yates with the in-house integer sampler.
template <typename T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
  for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
    const int j = uniform_int(rng, 0, i);
    std::swap(v[i], v[static_cast<std::size_t>(j)]);
  }
}

inline std::string rng_state_string(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline Rng rng_from_state_string(const std::string& s) {
  Rng rng;
  std::istringstream is(s);
  is >> rng;
  return rng;
}

}  // namespace akd
