// Copyright 2026 The sdlrisk Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sdlrisk/rng.h"

#include <algorithm>
#include <numeric>

namespace sdlrisk {

std::uint64_t MixSeed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t Fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Rng Rng::Substream(std::string_view name) const {
  return Rng(MixSeed(seed_ ^ MixSeed(Fnv1a64(name))));
}

Rng Rng::Substream(std::uint64_t index) const {
  return Rng(MixSeed(seed_ ^ MixSeed(index + 0x632be59bd9b4e019ULL)));
}

std::uint64_t Rng::UniformInt(std::uint64_t n) {
  // Rejection sampling on the top of the range to remove modulo bias.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

std::size_t Rng::Categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  const double u = Uniform() * total;
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = i;
    cumulative += weights[i];
    if (u < cumulative) return i;
  }
  return last_positive;
}

std::vector<std::size_t> Rng::SampleWithoutReplacement(std::size_t n,
                                                       std::size_t k) {
  k = std::min(k, n);
  std::vector<std::size_t> out;
  out.reserve(k);
  if (2 * k > n) {
    // Dense case: selection sampling (Knuth's Algorithm S).
    std::size_t needed = k;
    for (std::size_t i = 0; i < n && needed > 0; ++i) {
      if (UniformInt(n - i) < needed) {
        out.push_back(i);
        --needed;
      }
    }
    return out;
  }
  // Sparse case: partial Fisher-Yates on a lazily materialized permutation.
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + UniformInt(n - i);
    std::swap(perm[i], perm[j]);
    out.push_back(perm[i]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace sdlrisk
