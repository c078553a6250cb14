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

#ifndef SDLRISK_RNG_H_
#define SDLRISK_RNG_H_

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace sdlrisk {

// Seeded random stream. The engine is std::mt19937_64, whose output sequence
// is fixed by the standard; the conversions to doubles and bounded integers
// are done here rather than through <random> distributions, whose results
// differ between standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  // Independent stream derived from this stream's seed and a stage name.
  // Does not advance this stream.
  Rng Substream(std::string_view name) const;
  Rng Substream(std::uint64_t index) const;

  std::uint64_t seed() const { return seed_; }

  std::uint64_t NextU64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double Uniform() { return (engine_() >> 11) * 0x1.0p-53; }

  bool Bernoulli(double p) { return Uniform() < p; }

  // Uniform on {0, ..., n - 1}; n > 0.
  std::uint64_t UniformInt(std::uint64_t n);

  // Index drawn from a discrete distribution by inverse CDF on one uniform.
  // Weights need not be normalized; the last positive-weight index absorbs
  // rounding at the upper end.
  std::size_t Categorical(std::span<const double> weights);

  template <typename T>
  void Shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = UniformInt(i);
      std::swap(values[i - 1], values[j]);
    }
  }

  // k distinct indices from {0, ..., n - 1}, in increasing order.
  std::vector<std::size_t> SampleWithoutReplacement(std::size_t n,
                                                    std::size_t k);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer; used to derive sub-stream seeds.
std::uint64_t MixSeed(std::uint64_t x);

// 64-bit FNV-1a.
std::uint64_t Fnv1a64(std::string_view bytes);

}  // namespace sdlrisk

#endif  // SDLRISK_RNG_H_
