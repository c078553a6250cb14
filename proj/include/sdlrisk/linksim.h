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


#ifndef SDLRISK_LINKSIM_H_
#define SDLRISK_LINKSIM_H_

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "absl/status/statusor.h"
#include "sdlrisk/keyspace.h"
#include "sdlrisk/misclass.h"

namespace sdlrisk {

// Independent binary keys. Bit c of a key is 1 when variable c takes its
// second category.
struct BinaryExperimentConfig {
  std::size_t population_size = 100'000;
  std::size_t sample_size = 2'000;
  std::vector<int> num_variables;  // values of C
  double p = 0.2;                  // Pr(X^c = 2)
  std::vector<double> thetas;      // values of theta1
  int replicates = 10;
  std::uint64_t seed = 0;
};

// C = 5..30 and theta in {0, 0.01, 0.02, 0.05, 0.10}.
BinaryExperimentConfig DefaultBinaryExperimentConfig();

// theta2 = (1 - p) theta1 / p, which keeps Pr(X~^c = 2) = p. Fails when it
// exceeds 1.
absl::StatusOr<double> BinaryTheta2(double p, double theta1);

struct BinaryPopulation {
  std::vector<std::uint64_t> truth;
  std::vector<std::uint64_t> released;
};

// Draws `size` units with `num_variables` bits each. The uniforms driving
// misclassification come from their own sub-stream and are consumed in the
// same order for every theta.
absl::StatusOr<BinaryPopulation> GenerateBinaryPopulation(
    std::size_t size, int num_variables, double p, double theta1,
    std::uint64_t seed);

struct BinaryCurvePoint {
  int num_variables = 0;
  double theta = 0.0;
  double risk_sum = 0.0;        // replicate mean of sum_SU M_jj / F~_j
  double sample_uniques = 0.0;  // replicate mean
  double replicate_sd = 0.0;    // of risk_sum
};

// Each replicate draws one population at the largest C and one sample; the
// keys for smaller C are the low bits, so points share random numbers.
// Points ordered by theta, then C.
absl::StatusOr<std::vector<BinaryCurvePoint>> RunBinaryExperiment(
    const BinaryExperimentConfig& config);

enum class ExternalSampler {
  kUniform,
  // Inclusion weight 1 + (true cell mod 3), drawn without replacement.
  kSkewed,
};

struct LinkageExperimentConfig {
  std::size_t external_size = 0;  // n*
  int replicates = 10'000;
  std::uint64_t seed = 0;
  ExternalSampler sampler = ExternalSampler::kUniform;
};

struct LinkageKeyResult {
  CellIndex cell = 0;
  std::int64_t links = 0;
  std::int64_t correct = 0;
  std::optional<double> phi_hat;  // absent when no links
  double phi_se = 0.0;
  double theory = 0.0;  // M_jj / F~_j with F~_j = sum_k F_k M_jk
  std::optional<double> m_hat;
  double m_se = 0.0;
  double m_theory = 0.0;  // M_jj f_j / n*
  std::optional<double> u_hat;
  double u_se = 0.0;
  double u_theory = 0.0;  // (pi F~_j f_j - pi M_jj f_j) / (n n* - pi n*)
};

struct LinkageResult {
  std::vector<LinkageKeyResult> keys;  // ascending cell
  double p_hat = 0.0;
  double p_se = 0.0;
  double p_theory = 0.0;  // pi / n
  double mean_sample_size = 0.0;
  std::int64_t total_links = 0;
  std::int64_t total_correct = 0;
};

// Per replicate: Bernoulli sample s, misclassification of s, external set
// s* of size n*, then every pair of s x s* is compared on the released key
// against the true key. Counting all pairs gives the expectation of a single
// uniformly drawn pair. Standard errors are ratio-estimator errors over
// replicates.
absl::StatusOr<LinkageResult> RunLinkageExperiment(
    const MicrodataTable& population, const MisclassSpec& misclass,
    const SamplingDesign& design, const LinkageExperimentConfig& config);

void WriteBinaryCurve(std::ostream& out,
                      const std::vector<BinaryCurvePoint>& points,
                      char delimiter = ',');
void WriteLinkageResult(std::ostream& out, const LinkageResult& result,
                        char delimiter = ',');

}  // namespace sdlrisk

#endif  // SDLRISK_LINKSIM_H_
