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

#ifndef SDLRISK_PERTURB_H_
#define SDLRISK_PERTURB_H_

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "sdlrisk/keyspace.h"
#include "sdlrisk/misclass.h"

namespace sdlrisk {

// Maps categories of a key variable onto targeting groups, e.g. ethnicity
// onto {"WhiteBritish", "Other"}. Categories missing from the map belong to
// no group and are never perturbed by a targeted plan.
struct TargetingRule {
  std::size_t variable = 0;
  std::map<std::string, std::string> group_of_category;
};

// Returns a copy of `table` whose target_group column is derived from the
// rule. Records of unmapped categories get an empty group label.
absl::StatusOr<MicrodataTable> AssignTargetGroups(const MicrodataTable& table,
                                                  const KeySpace& keyspace,
                                                  const TargetingRule& rule);

enum class SwapMode { kRandom, kTargeted };

struct SwapPlan {
  std::size_t swap_variable = 0;
  SwapMode mode = SwapMode::kRandom;
  // Fraction of records entering the swap pool (random mode).
  double rate = 0.0;
  // Pool fraction per target group (targeted mode).
  std::map<std::string, double> group_rates;
  // Partners must share the control stratum when set.
  bool within_control_strata = false;
  // Diagonal of the induced matrix. Defaults to 1 - rate (random) or
  // 1 - group rate (targeted); override when the design states otherwise.
  std::optional<double> diagonal;
  std::map<std::string, double> group_diagonal;
};

struct SwapPair {
  std::size_t flagged_row = 0;
  std::size_t partner_row = 0;
  CategoryCode flagged_old = 0;  // swap-variable value before the exchange
  CategoryCode partner_old = 0;
};

struct SwapLog {
  std::vector<SwapPair> pairs;
  std::size_t pool_size = 0;
  std::size_t flagged = 0;
  // Flagged records left unswapped because no eligible partner remained.
  std::size_t unswapped_flagged = 0;
};

struct SwapResult {
  MicrodataTable table;
  SwapLog log;
};

// Draws round(rate * n_g) records within each category g of the swap
// variable, flags half of each draw, and pairs every flagged record (in a
// random order) with a uniformly chosen unflagged pool record that has a
// different swap-variable value and has not been paired yet. Paired records
// exchange their swap-variable values.
absl::StatusOr<SwapResult> RandomSwap(const MicrodataTable& table,
                                      const KeySpace& keyspace,
                                      const SwapPlan& plan, std::uint64_t seed);

// The random-swap procedure run separately inside each target group with the
// group's rate. Every label in plan.group_rates must occur in the table.
absl::StatusOr<SwapResult> TargetedSwap(const MicrodataTable& table,
                                        const KeySpace& keyspace,
                                        const SwapPlan& plan,
                                        std::uint64_t seed);

// Dispatches on plan.mode.
absl::StatusOr<SwapResult> ApplySwap(const MicrodataTable& table,
                                     const KeySpace& keyspace,
                                     const SwapPlan& plan, std::uint64_t seed);

// Swap-induced matrix for one variable: `diagonal` on the diagonal and
//   M(j, k) = (1 - diagonal) * n_k / sum_{l != j} n_l
// off it, where n are the category counts of the records subject to the swap.
absl::StatusOr<TransitionMatrix> SwapMisclassMatrix(
    std::span<const std::int64_t> category_counts, double diagonal);

// Induced matrix per group (key "" in random mode), using pre-swap counts of
// the swap variable within each group.
absl::StatusOr<std::map<std::string, TransitionMatrix>> SwapMisclassMatrices(
    const MicrodataTable& table, const KeySpace& keyspace,
    const SwapPlan& plan);

// Invariant PRAM matrix alpha * R + (1 - alpha) * I with R = M Q, where
//   Q(k, j) = M(j, k) p_j / sum_l M(l, k) p_l
// is the Bayes inversion of the base matrix under proportions p. Categories
// with p_j = 0 keep identity rows. The result satisfies p R* = p.
absl::StatusOr<TransitionMatrix> InvariantPramMatrix(
    const TransitionMatrix& base, std::span<const double> proportions,
    double alpha);

struct GroupPram {
  TransitionMatrix base;
  double alpha = 1.0;
};

struct PramPlan {
  std::size_t variable = 0;
  TransitionMatrix base;
  double alpha = 1.0;
  // When non-empty, only records of the listed target groups are perturbed,
  // each group with its own matrix built from that group's proportions.
  std::map<std::string, GroupPram> group_plans;
};

struct PramResult {
  MicrodataTable table;
  // Invariant matrix applied per group (key "" when not targeted).
  std::map<std::string, TransitionMatrix> matrices;
};

// Invariant matrix per group (key "" when not targeted) built from the
// table's proportions. Groups with no records get no matrix.
absl::StatusOr<std::map<std::string, TransitionMatrix>> PramMatrices(
    const MicrodataTable& table, const KeySpace& keyspace,
    const PramPlan& plan);

// Re-draws the plan variable of each affected record from its row of the
// invariant matrix, one uniform per record in record order. Proportions are
// those of the input table (per group when targeted).
absl::StatusOr<PramResult> ApplyPram(const MicrodataTable& table,
                                     const KeySpace& keyspace,
                                     const PramPlan& plan, std::uint64_t seed);

// Misclassification spec for a single perturbed variable whose matrix may
// depend on the target group. With `rule` absent, `by_group` must hold the
// single key "". Groups without a matrix are unperturbed.
absl::StatusOr<MisclassSpec> SingleVariableSpec(
    const KeySpace& keyspace, std::size_t variable,
    const std::map<std::string, TransitionMatrix>& by_group,
    const TargetingRule* rule);

// Audit file: one row per pair with record ids and old/new values.
void WriteSwapLog(std::ostream& out, const SwapLog& log,
                  const MicrodataTable& original, const KeySpace& keyspace,
                  std::size_t swap_variable, char delimiter = ',');

}  // namespace sdlrisk

#endif  // SDLRISK_PERTURB_H_
