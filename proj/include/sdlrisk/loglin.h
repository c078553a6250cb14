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

#ifndef SDLRISK_LOGLIN_H_
#define SDLRISK_LOGLIN_H_

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "Eigen/Core"
#include "absl/status/statusor.h"
#include "sdlrisk/keyspace.h"
#include "sdlrisk/misclass.h"

namespace sdlrisk {

// A model term is a sorted set of key-variable indices: {a} is a main
// effect, {a, b} a two-way interaction.
using ModelTerm = std::vector<std::size_t>;

// Hierarchical log-linear model over the key variables. Main effects are
// always present and every term's sub-terms are added automatically.
class ModelSpec {
 public:
  static absl::StatusOr<ModelSpec> Create(const KeySpace& keyspace,
                                          std::vector<ModelTerm> terms);
  static ModelSpec MainEffects(const KeySpace& keyspace);
  static ModelSpec Saturated(const KeySpace& keyspace);
  // Parses "A", "A*B" style names against the key space.
  static absl::StatusOr<ModelSpec> FromNames(
      const KeySpace& keyspace, const std::vector<std::string>& names);

  const KeySpace& keyspace() const { return keyspace_; }
  // Ordered by size, then lexicographically.
  const std::vector<ModelTerm>& terms() const { return terms_; }
  bool Contains(const ModelTerm& term) const;
  ModelSpec WithTerm(const ModelTerm& term) const;
  // Parameters including the intercept (treatment coding).
  std::size_t NumParameters() const;
  std::string TermName(const ModelTerm& term) const;
  // "A + B + A*B"
  std::string ToString() const;

 private:
  ModelSpec(KeySpace keyspace, std::vector<ModelTerm> terms)
      : keyspace_(std::move(keyspace)), terms_(std::move(terms)) {}

  KeySpace keyspace_;
  std::vector<ModelTerm> terms_;
};

struct FitOptions {
  int max_iterations = 100;
  // Convergence when max |change in linear predictor| / max(1, |eta|) is at
  // most this value.
  double tolerance = 1e-8;
  // Receives the deviance trace, also when the fit fails to converge.
  std::vector<double>* trace_sink = nullptr;
};

struct Coefficient {
  std::string term;    // "(intercept)" or term name
  std::string level;   // category labels joined by '|'
  double estimate = 0.0;
  double standard_error = 0.0;
};

// Poisson log-linear fit with sample mean pi_j * lambda_j, where
// log lambda_j = x_j' beta. lambda_j is the population rate.
class FittedModel {
 public:
  const ModelSpec& spec() const { return spec_; }
  const Eigen::VectorXd& beta() const { return beta_; }
  const std::vector<Coefficient>& coefficients() const { return coefficients_; }
  double deviance() const { return deviance_; }
  std::int64_t degrees_of_freedom() const { return df_; }
  std::size_t num_parameters() const {
    return static_cast<std::size_t>(beta_.size());
  }
  int iterations() const { return iterations_; }
  // Deviance after each IRLS iteration.
  const std::vector<double>& deviance_trace() const { return deviance_trace_; }
  double total_count() const { return total_count_; }

  // lambda-hat_j.
  double PopulationRate(CellIndex cell) const;

 private:
  friend absl::StatusOr<FittedModel> FitPoisson(const FrequencyTable&,
                                                const ModelSpec&,
                                                const SamplingDesign&,
                                                const FitOptions&);
  explicit FittedModel(ModelSpec spec) : spec_(std::move(spec)) {}

  ModelSpec spec_;
  // Column of each term's first parameter and the strides of its
  // non-reference levels.
  std::vector<std::size_t> term_offset_;
  std::vector<std::vector<std::uint64_t>> term_stride_;
  Eigen::VectorXd beta_;
  std::vector<Coefficient> coefficients_;
  double deviance_ = 0.0;
  std::int64_t df_ = 0;
  int iterations_ = 0;
  std::vector<double> deviance_trace_;
  double total_count_ = 0.0;
};

// Maximizes the Poisson likelihood over all cells of the key space by
// iteratively reweighted least squares with step halving, so the deviance
// never increases between iterations. Fails when a term has a zero margin
// (the MLE is on the boundary), when the design does not cover every cell,
// or when the iteration limit is reached.
absl::StatusOr<FittedModel> FitPoisson(const FrequencyTable& counts,
                                       const ModelSpec& spec,
                                       const SamplingDesign& design,
                                       const FitOptions& options = {});

// Lower is better.
struct SearchCriterion {
  std::string name;
  std::function<double(const FittedModel&, const FrequencyTable&,
                       const SamplingDesign&)>
      score;
};

// deviance + log(n) * parameters, n the total sample count. Default.
SearchCriterion BicCriterion();
// deviance + 2 * parameters.
SearchCriterion AicCriterion();
// Standardized distance between the observed number of sample uniques and
// its model expectation sum_j mu_j exp(-mu_j).
SearchCriterion UniquesCriterion();

struct SearchStep {
  std::string added_term;  // empty for the starting model
  double score = 0.0;
};

struct SearchResult {
  ModelSpec spec;
  std::vector<SearchStep> steps;
};

// Starts from all main effects and greedily adds the two-way interaction
// that most lowers the criterion, stopping when no addition lowers it.
// Candidates are tried in lexicographic order and only a strictly better
// score replaces the incumbent, so ties go to the lowest term. Candidates
// that cannot be fitted are skipped.
absl::StatusOr<SearchResult> ForwardSearch(
    const FrequencyTable& counts, const KeySpace& keyspace,
    const SamplingDesign& design,
    const SearchCriterion& criterion = BicCriterion(),
    const FitOptions& options = {});

// E(1 / F~_j | f~_j = 1) = (1 - exp(-mu)) / mu with mu = (1 - pi) lambda,
// the mean of the unsampled remainder. Returns 1 when mu = 0.
double ExpectedInverseCountGivenUnique(double mu);

absl::StatusOr<double> EstimateUniqueRisk(const FittedModel& model,
                                          const SamplingDesign& design,
                                          CellIndex cell);

struct UniqueRiskEstimate {
  CellIndex cell = 0;
  double estimate = 0.0;   // E(1 / F~_j | f~_j = 1)
  double adjusted = 0.0;   // M_jj * estimate
};

struct EstimatedAggregate {
  double naive = 0.0;
  double adjusted = 0.0;
  std::vector<UniqueRiskEstimate> per_record;
};

// Sums over released-file sample uniques, ascending cell order.
absl::StatusOr<EstimatedAggregate> AdjustedAggregate(
    const FittedModel& model, const MisclassSpec& misclass,
    const SamplingDesign& design, const FrequencyTable& sample_released);

// Terms, coefficients, deviance and iteration trace as "key,value" text.
void WriteModelReport(std::ostream& out, const FittedModel& model,
                      char delimiter = ',');

}  // namespace sdlrisk

#endif  // SDLRISK_LOGLIN_H_
