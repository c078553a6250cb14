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

#ifndef SDLRISK_RISK_H_
#define SDLRISK_RISK_H_

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"
#include "sdlrisk/keyspace.h"
#include "sdlrisk/misclass.h"

namespace sdlrisk {

// Per-record identification-risk measures for a released key value j that a
// target unit B matches, i.e. Pr(the unique matching record is B).
//
//   kExact         [M_jj / (1 - pi_j M_jj)] / sum_k F_k M_jk / (1 - pi_j M_jk)
//   kKnownInSample the same with pi_j = 1 and F replaced by f (intruder knows
//                  that B is in the sample)
//   kGouweleeuw    M_jj f_j / sum_k M_jk f_k
//   kGh            M_jj / F~_j (small pi_j, large population)
//   kSmallDelta26  F_j^-1 (1 - [F~_j - F_j M_jj] / [F_j M_jj / (1 - pi_j M_jj)])
//   kSmallDelta27  [M_jj / (1 - pi_j M_jj)] /
//                  [F_j pi_j M_jj^2 / (1 - pi_j M_jj) + F~_j]
//
// M is in released-given-true orientation (M_jk = Pr(released j | true k)).
// F, F~, f are true population, released population and true sample counts.
// Measures that use F are 0 when F_j = 0: no population unit has key j, so a
// match on j cannot be a correct identification. All values are clipped to
// [0, 1]; kSmallDelta26 can go negative for large perturbation.
enum class RiskFormula {
  kExact,
  kKnownInSample,
  kGouweleeuw,
  kGh,
  kSmallDelta26,
  kSmallDelta27,
};

inline constexpr RiskFormula kAllRiskFormulas[] = {
    RiskFormula::kExact,        RiskFormula::kKnownInSample,
    RiskFormula::kGouweleeuw,   RiskFormula::kGh,
    RiskFormula::kSmallDelta26, RiskFormula::kSmallDelta27,
};

// Stable identifiers used in reports and configuration: "exact",
// "known-in-sample", "gouweleeuw", "gh", "small-delta-2.6", "small-delta-2.7".
std::string_view FormulaId(RiskFormula formula);
absl::StatusOr<RiskFormula> ParseFormulaId(std::string_view id);

inline constexpr std::string_view kTauId = "tau";
inline constexpr std::string_view kTauStarId = "tau-star";
inline constexpr std::string_view kTauCcId = "tau-cc";

// Where F~ comes from for the measures that need it.
enum class ReleasedPopulationSource {
  kObserved,  // a tabulated released population
  kExpected,  // sum_k F_k M_jk from the true population counts
};

struct RiskInputs {
  MisclassSpec misclass;
  SamplingDesign design;
  std::optional<FrequencyTable> population_true;      // F
  std::optional<FrequencyTable> population_released;  // F~
  std::optional<FrequencyTable> sample_true;          // f
  FrequencyTable sample_released;                     // f~
  // Optional record-level truth for the sample: true and released key of
  // each record, aligned. Needed only for tau-cc.
  std::vector<CellIndex> sample_true_keys;
  std::vector<CellIndex> sample_released_keys;

  const KeySpace& keyspace() const { return misclass.keyspace(); }
};

// Source used for F~: observed when supplied, otherwise expected from F.
absl::StatusOr<ReleasedPopulationSource> ReleasedSource(const RiskInputs& in);
absl::StatusOr<double> ReleasedPopulationCount(const RiskInputs& in,
                                               CellIndex cell);

absl::StatusOr<double> RiskExact(CellIndex cell, const RiskInputs& in);
absl::StatusOr<double> RiskKnownInSample(CellIndex cell, const RiskInputs& in);
absl::StatusOr<double> RiskGouweleeuw(CellIndex cell, const RiskInputs& in);
absl::StatusOr<double> RiskGh(CellIndex cell, const RiskInputs& in);
// Unclipped value of the small-delta expansion.
absl::StatusOr<double> RiskSmallDelta26Raw(CellIndex cell,
                                           const RiskInputs& in);
absl::StatusOr<double> RiskSmallDelta26(CellIndex cell, const RiskInputs& in);
absl::StatusOr<double> RiskSmallDelta27(CellIndex cell, const RiskInputs& in);

absl::StatusOr<double> EvaluateRisk(RiskFormula formula, CellIndex cell,
                                    const RiskInputs& in);

// Released-file sample uniques {j : f~_j = 1}, ascending.
std::vector<CellIndex> SampleUniques(const FrequencyTable& sample_released);

struct Aggregate {
  double total = 0.0;
  double proportion = 0.0;  // total / number of sample uniques (0 if none)
  std::size_t sample_uniques = 0;
};

// Sum of the per-record measure over released-file sample uniques, in
// ascending cell order. With kExact this is tau.
absl::StatusOr<Aggregate> AggregateTau(const RiskInputs& in,
                                       RiskFormula formula);

// Sum of 1/F_j over true-sample uniques (f_j = 1): the risk without
// perturbation.
absl::StatusOr<Aggregate> TauStar(const RiskInputs& in);

// Sum of 1/F_j over released-file sample uniques whose record kept its true
// key. Requires record-level truth.
absl::StatusOr<Aggregate> TauCorrectlyClassified(const RiskInputs& in);

struct RiskRecord {
  CellIndex cell = 0;
  std::map<RiskFormula, double> measures;
  bool sample_unique = true;
  std::optional<bool> correctly_classified;
  std::optional<double> small_delta_26_raw;
};

struct RiskReport {
  std::vector<RiskRecord> per_record;
  // Keyed by formula id or by "tau", "tau-star", "tau-cc".
  std::map<std::string, Aggregate> aggregates;
  // Notes on how each aggregate was computed, e.g. the F~ source.
  std::map<std::string, std::string> provenance;
  std::size_t sample_uniques = 0;
  std::size_t small_delta_26_clipped = 0;
  // Filled by the sample-based estimator when requested.
  std::optional<double> estimated_naive;
  std::optional<double> estimated_adjusted;
};

// Evaluates the requested formulas on every sample unique. "tau" is recorded
// whenever kExact is requested; tau-star and tau-cc are added when their
// inputs are present.
absl::StatusOr<RiskReport> BuildRiskReport(
    const RiskInputs& in, std::span<const RiskFormula> formulas);

void WriteRiskRecords(std::ostream& out, const RiskReport& report,
                      const KeySpace& keyspace,
                      std::span<const RiskFormula> formulas,
                      char delimiter = ',');
void WriteRiskSummary(std::ostream& out, const RiskReport& report,
                      char delimiter = ',');

struct OracleEstimate {
  double estimate = 0.0;
  double standard_error = 0.0;
  std::int64_t qualifying = 0;  // replicates with a unique sample match
  std::int64_t correct = 0;     // ... where the match is the target itself
};

// Monte Carlo validator for kExact. Each replicate misclassifies every
// population unit, then includes it with probability pi of its released key.
// For each target key j the target B is the first population record with
// true key j; a replicate qualifies when exactly one sampled record has
// released key j, and counts as correct when that record is B.
absl::StatusOr<std::map<CellIndex, OracleEstimate>> RiskMonteCarloOracle(
    std::span<const CellIndex> targets, const MicrodataTable& population,
    const MisclassSpec& misclass, const SamplingDesign& design,
    std::int64_t replicates, std::uint64_t seed);

}  // namespace sdlrisk

#endif  // SDLRISK_RISK_H_
