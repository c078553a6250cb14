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

#include "sdlrisk/perturb.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "absl/strings/str_cat.h"
#include "sdlrisk/microdata_io.h"
#include "sdlrisk/rng.h"

namespace sdlrisk {
namespace {

absl::Status CheckFraction(double value, std::string_view what) {
  if (!(value >= 0.0 && value <= 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat(std::string(what), " must be in [0, 1], got ", value));
  }
  return absl::OkStatus();
}

// Unflagged pool members still available as partners, bucketed by
// swap-variable value.
struct PartnerBucket {
  std::vector<std::vector<std::size_t>> by_value;
  std::size_t total = 0;
};

// One pass of the pool/flag/pair procedure over `rows` (ascending row
// positions), writing exchanged values into `out`.
void SwapWithin(const MicrodataTable& table, std::span<const std::size_t> rows,
                const KeySpace& keyspace, const SwapPlan& plan, double rate,
                Rng& rng, MicrodataTable& out, SwapLog& log) {
  const std::size_t var = plan.swap_variable;
  const int card = keyspace.cardinality(var);
  std::vector<std::vector<std::size_t>> by_category(card);
  for (std::size_t r : rows) by_category[table.Code(r, var)].push_back(r);

  std::vector<std::size_t> flagged;
  std::map<std::string, PartnerBucket> buckets;
  auto stratum_of = [&](std::size_t r) -> std::string {
    return plan.within_control_strata ? table.ControlStratum(r) : std::string();
  };
  for (int g = 0; g < card; ++g) {
    const auto& members = by_category[g];
    const auto pool_size = static_cast<std::size_t>(
        std::llround(rate * static_cast<double>(members.size())));
    if (pool_size == 0) continue;
    std::vector<std::size_t> picks;
    for (std::size_t idx : rng.SampleWithoutReplacement(members.size(), pool_size)) {
      picks.push_back(members[idx]);
    }
    rng.Shuffle(picks);
    const std::size_t n_flag = pool_size / 2;
    log.pool_size += pool_size;
    for (std::size_t i = 0; i < picks.size(); ++i) {
      if (i < n_flag) {
        flagged.push_back(picks[i]);
      } else {
        auto& bucket = buckets[stratum_of(picks[i])];
        if (bucket.by_value.empty()) bucket.by_value.resize(card);
        bucket.by_value[g].push_back(picks[i]);
        ++bucket.total;
      }
    }
  }
  log.flagged += flagged.size();
  rng.Shuffle(flagged);

  for (std::size_t f : flagged) {
    const CategoryCode value = table.Code(f, var);
    auto it = buckets.find(stratum_of(f));
    if (it == buckets.end()) {
      ++log.unswapped_flagged;
      continue;
    }
    PartnerBucket& bucket = it->second;
    const std::size_t eligible = bucket.total - bucket.by_value[value].size();
    if (eligible == 0) {
      ++log.unswapped_flagged;
      continue;
    }
    std::uint64_t pick = rng.UniformInt(eligible);
    for (int g = 0; g < card; ++g) {
      if (static_cast<CategoryCode>(g) == value) continue;
      auto& members = bucket.by_value[g];
      if (pick >= members.size()) {
        pick -= members.size();
        continue;
      }
      const std::size_t partner = members[pick];
      members[pick] = members.back();
      members.pop_back();
      --bucket.total;
      const CategoryCode partner_value = table.Code(partner, var);
      out.SetCode(f, var, partner_value);
      out.SetCode(partner, var, value);
      log.pairs.push_back({f, partner, value, partner_value});
      break;
    }
  }
}

absl::Status ValidateSwapPlan(const MicrodataTable& table,
                              const KeySpace& keyspace, const SwapPlan& plan) {
  if (plan.swap_variable >= keyspace.num_variables()) {
    return absl::InvalidArgumentError("swap variable index out of range");
  }
  if (auto s = CheckFraction(plan.rate, "swap rate"); !s.ok()) return s;
  for (const auto& [group, rate] : plan.group_rates) {
    if (auto s = CheckFraction(rate, absl::StrCat("swap rate for group '",
                                                  group, "'"));
        !s.ok()) {
      return s;
    }
  }
  if (plan.within_control_strata && !table.has_control_stratum()) {
    return absl::InvalidArgumentError(
        "plan pairs within control strata but the table has no "
        "control_stratum column");
  }
  return absl::OkStatus();
}

std::set<std::string> GroupLabels(const MicrodataTable& table) {
  std::set<std::string> labels;
  for (std::size_t i = 0; i < table.size(); ++i) {
    labels.insert(table.TargetGroup(i));
  }
  return labels;
}

}  // namespace

absl::StatusOr<MicrodataTable> AssignTargetGroups(const MicrodataTable& table,
                                                  const KeySpace& keyspace,
                                                  const TargetingRule& rule) {
  if (rule.variable >= keyspace.num_variables()) {
    return absl::InvalidArgumentError("targeting variable index out of range");
  }
  const auto& var = keyspace.variable(rule.variable);
  std::vector<std::string> group_of_code(var.cardinality());
  for (const auto& [label, group] : rule.group_of_category) {
    auto code = var.CodeOf(label);
    if (!code) {
      return absl::InvalidArgumentError(absl::StrCat(
          "targeting rule names unknown category '", label, "' of '",
          var.name(), "'"));
    }
    group_of_code[*code] = group;
  }
  RecordAnnotations annotations = table.annotations();
  annotations.target_group.clear();
  for (std::size_t i = 0; i < table.size(); ++i) {
    annotations.target_group.push_back(
        group_of_code[table.Code(i, rule.variable)]);
  }
  return MicrodataTable::Create(keyspace, table.codes(), std::move(annotations));
}

absl::StatusOr<SwapResult> RandomSwap(const MicrodataTable& table,
                                      const KeySpace& keyspace,
                                      const SwapPlan& plan,
                                      std::uint64_t seed) {
  if (plan.mode != SwapMode::kRandom) {
    return absl::InvalidArgumentError("RandomSwap needs a random-mode plan");
  }
  if (auto s = ValidateSwapPlan(table, keyspace, plan); !s.ok()) return s;
  if (plan.rate > 0.0) {
    std::set<CategoryCode> observed;
    for (std::size_t i = 0; i < table.size(); ++i) {
      observed.insert(table.Code(i, plan.swap_variable));
    }
    if (observed.size() < 2) {
      return absl::FailedPreconditionError(absl::StrCat(
          "swap variable '", keyspace.variable(plan.swap_variable).name(),
          "' has fewer than 2 observed categories"));
    }
  }
  SwapResult result{table, {}};
  std::vector<std::size_t> rows(table.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  Rng rng(seed);
  SwapWithin(table, rows, keyspace, plan, plan.rate, rng, result.table,
             result.log);
  return result;
}

absl::StatusOr<SwapResult> TargetedSwap(const MicrodataTable& table,
                                        const KeySpace& keyspace,
                                        const SwapPlan& plan,
                                        std::uint64_t seed) {
  if (plan.mode != SwapMode::kTargeted) {
    return absl::InvalidArgumentError("TargetedSwap needs a targeted-mode plan");
  }
  if (!table.has_target_group()) {
    return absl::InvalidArgumentError(
        "targeted swap needs a target_group column");
  }
  if (auto s = ValidateSwapPlan(table, keyspace, plan); !s.ok()) return s;
  const auto labels = GroupLabels(table);
  for (const auto& [group, rate] : plan.group_rates) {
    if (!labels.contains(group)) {
      return absl::InvalidArgumentError(
          absl::StrCat("unknown target group label '", group, "'"));
    }
  }
  SwapResult result{table, {}};
  const Rng root(seed);
  for (const auto& [group, rate] : plan.group_rates) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < table.size(); ++i) {
      if (table.TargetGroup(i) == group) rows.push_back(i);
    }
    Rng rng = root.Substream(group);
    SwapWithin(table, rows, keyspace, plan, rate, rng, result.table,
               result.log);
  }
  return result;
}

absl::StatusOr<SwapResult> ApplySwap(const MicrodataTable& table,
                                     const KeySpace& keyspace,
                                     const SwapPlan& plan,
                                     std::uint64_t seed) {
  return plan.mode == SwapMode::kRandom
             ? RandomSwap(table, keyspace, plan, seed)
             : TargetedSwap(table, keyspace, plan, seed);
}

absl::StatusOr<TransitionMatrix> SwapMisclassMatrix(
    std::span<const std::int64_t> category_counts, double diagonal) {
  if (auto s = CheckFraction(diagonal, "swap matrix diagonal"); !s.ok()) {
    return s;
  }
  const auto size = static_cast<Eigen::Index>(category_counts.size());
  if (size < 2) {
    return absl::InvalidArgumentError("swap matrix needs at least 2 categories");
  }
  std::int64_t total = 0;
  for (std::int64_t n : category_counts) {
    if (n < 0) return absl::InvalidArgumentError("negative category count");
    total += n;
  }
  TransitionMatrix m = TransitionMatrix::Zero(size, size);
  for (Eigen::Index j = 0; j < size; ++j) {
    m(j, j) = diagonal;
    const std::int64_t others = total - category_counts[j];
    if (others == 0) {
      if (diagonal < 1.0) {
        return absl::FailedPreconditionError(absl::StrCat(
            "category ", j + 1,
            " has no other categories to swap with but diagonal ", diagonal,
            " < 1"));
      }
      continue;
    }
    for (Eigen::Index k = 0; k < size; ++k) {
      if (k == j) continue;
      m(j, k) = (1.0 - diagonal) * static_cast<double>(category_counts[k]) /
                static_cast<double>(others);
    }
  }
  return m;
}

absl::StatusOr<std::map<std::string, TransitionMatrix>> SwapMisclassMatrices(
    const MicrodataTable& table, const KeySpace& keyspace,
    const SwapPlan& plan) {
  if (auto s = ValidateSwapPlan(table, keyspace, plan); !s.ok()) return s;
  const int card = keyspace.cardinality(plan.swap_variable);
  std::map<std::string, TransitionMatrix> out;
  auto counts_for = [&](const std::string* group) {
    std::vector<std::int64_t> counts(card, 0);
    for (std::size_t i = 0; i < table.size(); ++i) {
      if (group != nullptr && table.TargetGroup(i) != *group) continue;
      ++counts[table.Code(i, plan.swap_variable)];
    }
    return counts;
  };
  if (plan.mode == SwapMode::kRandom) {
    const auto counts = counts_for(nullptr);
    auto m = SwapMisclassMatrix(counts, plan.diagonal.value_or(1.0 - plan.rate));
    if (!m.ok()) return m.status();
    out.emplace("", std::move(*m));
    return out;
  }
  if (!table.has_target_group()) {
    return absl::InvalidArgumentError(
        "targeted swap needs a target_group column");
  }
  for (const auto& [group, rate] : plan.group_rates) {
    const auto counts = counts_for(&group);
    double diagonal = 1.0 - rate;
    if (auto it = plan.group_diagonal.find(group);
        it != plan.group_diagonal.end()) {
      diagonal = it->second;
    }
    auto m = SwapMisclassMatrix(counts, diagonal);
    if (!m.ok()) {
      return absl::Status(m.status().code(),
                          absl::StrCat("group '", group, "': ",
                                       m.status().message()));
    }
    out.emplace(group, std::move(*m));
  }
  return out;
}

absl::StatusOr<TransitionMatrix> InvariantPramMatrix(
    const TransitionMatrix& base, std::span<const double> proportions,
    double alpha) {
  if (auto s = ValidateRowStochastic(base); !s.ok()) return s;
  if (auto s = CheckFraction(alpha, "alpha"); !s.ok()) return s;
  const Eigen::Index size = base.rows();
  if (static_cast<Eigen::Index>(proportions.size()) != size) {
    return absl::InvalidArgumentError(absl::StrCat(
        "proportion vector has ", proportions.size(), " entries for a ", size,
        "x", size, " matrix"));
  }
  double sum = 0.0;
  for (double p : proportions) {
    if (!(p >= 0.0)) {
      return absl::InvalidArgumentError("proportions must be non-negative");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    return absl::InvalidArgumentError(
        absl::StrCat("proportions sum to ", sum, ", not 1"));
  }

  // Mass arriving in each released category: sum_l M(l, k) p_l.
  Eigen::VectorXd column_mass = Eigen::VectorXd::Zero(size);
  for (Eigen::Index l = 0; l < size; ++l) {
    if (proportions[l] == 0.0) continue;
    column_mass += proportions[l] * base.row(l).transpose();
  }
  for (Eigen::Index k = 0; k < size; ++k) {
    if (proportions[k] > 0.0 && column_mass(k) == 0.0) {
      return absl::FailedPreconditionError(absl::StrCat(
          "category ", k + 1,
          " is observed but no category is perturbed into it; Bayes "
          "inversion is undefined"));
    }
  }
  // Q(k, j) = M(j, k) p_j / column_mass(k).
  TransitionMatrix q = TransitionMatrix::Zero(size, size);
  for (Eigen::Index k = 0; k < size; ++k) {
    if (column_mass(k) == 0.0) continue;
    for (Eigen::Index j = 0; j < size; ++j) {
      q(k, j) = base(j, k) * proportions[j] / column_mass(k);
    }
  }
  TransitionMatrix r = TransitionMatrix::Identity(size, size);
  for (Eigen::Index i = 0; i < size; ++i) {
    if (proportions[i] == 0.0) continue;
    r.row(i) = base.row(i) * q;
  }
  TransitionMatrix blended =
      alpha * r + (1.0 - alpha) * TransitionMatrix::Identity(size, size);
  return blended;
}

absl::StatusOr<std::map<std::string, TransitionMatrix>> PramMatrices(
    const MicrodataTable& table, const KeySpace& keyspace,
    const PramPlan& plan) {
  if (plan.variable >= keyspace.num_variables()) {
    return absl::InvalidArgumentError("PRAM variable index out of range");
  }
  const int card = keyspace.cardinality(plan.variable);
  auto proportions_for = [&](const std::string* group) {
    std::vector<double> p(card, 0.0);
    double n = 0.0;
    for (std::size_t i = 0; i < table.size(); ++i) {
      if (group != nullptr && table.TargetGroup(i) != *group) continue;
      p[table.Code(i, plan.variable)] += 1.0;
      n += 1.0;
    }
    if (n > 0.0) {
      for (double& v : p) v /= n;
    }
    return std::make_pair(p, n);
  };
  auto build = [&](const TransitionMatrix& base, double alpha,
                   const std::string* group)
      -> absl::StatusOr<std::optional<TransitionMatrix>> {
    if (base.rows() != card) {
      return absl::InvalidArgumentError(absl::StrCat(
          "PRAM matrix is ", base.rows(), "x", base.cols(), " but '",
          keyspace.variable(plan.variable).name(), "' has ", card,
          " categories"));
    }
    auto [p, n] = proportions_for(group);
    if (n == 0.0) return std::optional<TransitionMatrix>();
    auto m = InvariantPramMatrix(base, p, alpha);
    if (!m.ok()) return m.status();
    return std::optional<TransitionMatrix>(std::move(*m));
  };

  std::map<std::string, TransitionMatrix> matrices;
  if (plan.group_plans.empty()) {
    auto m = build(plan.base, plan.alpha, nullptr);
    if (!m.ok()) return m.status();
    if (m->has_value()) matrices.emplace("", std::move(**m));
  } else {
    if (!table.has_target_group()) {
      return absl::InvalidArgumentError(
          "targeted PRAM needs a target_group column");
    }
    const auto labels = GroupLabels(table);
    for (const auto& [group, gp] : plan.group_plans) {
      if (!labels.contains(group)) {
        return absl::InvalidArgumentError(
            absl::StrCat("unknown target group label '", group, "'"));
      }
      auto m = build(gp.base, gp.alpha, &group);
      if (!m.ok()) {
        return absl::Status(m.status().code(),
                            absl::StrCat("group '", group, "': ",
                                         m.status().message()));
      }
      if (m->has_value()) matrices.emplace(group, std::move(**m));
    }
  }
  return matrices;
}

absl::StatusOr<PramResult> ApplyPram(const MicrodataTable& table,
                                     const KeySpace& keyspace,
                                     const PramPlan& plan,
                                     std::uint64_t seed) {
  auto matrices = PramMatrices(table, keyspace, plan);
  if (!matrices.ok()) return matrices.status();
  PramResult result{table, std::move(*matrices)};
  Rng rng(seed);
  const bool targeted = !plan.group_plans.empty();
  for (std::size_t i = 0; i < table.size(); ++i) {
    auto it = result.matrices.find(targeted ? table.TargetGroup(i)
                                            : std::string());
    if (it == result.matrices.end()) continue;
    const TransitionMatrix& m = it->second;
    const CategoryCode from = table.Code(i, plan.variable);
    std::span<const double> row(m.data() + from * m.cols(),
                                static_cast<std::size_t>(m.cols()));
    result.table.SetCode(i, plan.variable,
                         static_cast<CategoryCode>(rng.Categorical(row)));
  }
  return result;
}

absl::StatusOr<MisclassSpec> SingleVariableSpec(
    const KeySpace& keyspace, std::size_t variable,
    const std::map<std::string, TransitionMatrix>& by_group,
    const TargetingRule* rule) {
  if (variable >= keyspace.num_variables()) {
    return absl::InvalidArgumentError("perturbed variable index out of range");
  }
  MisclassFactor factor;
  factor.variable = variable;
  if (rule == nullptr) {
    auto it = by_group.find("");
    if (it == by_group.end() || by_group.size() != 1) {
      return absl::InvalidArgumentError(
          "group-specific matrices need a targeting rule");
    }
    factor.matrices.push_back(it->second);
    return MisclassSpec::Create(keyspace, {std::move(factor)});
  }
  if (rule->variable >= keyspace.num_variables()) {
    return absl::InvalidArgumentError("targeting variable index out of range");
  }
  std::map<std::string, std::size_t> index_of_group;
  for (const auto& [group, m] : by_group) {
    index_of_group[group] = factor.matrices.size();
    factor.matrices.push_back(m);
  }
  const int card = keyspace.cardinality(variable);
  const std::size_t identity_index = factor.matrices.size();
  factor.matrices.push_back(TransitionMatrix::Identity(card, card));
  const auto& given = keyspace.variable(rule->variable);
  factor.given_variable = rule->variable;
  factor.matrix_for_category.assign(given.cardinality(), identity_index);
  for (const auto& [label, group] : rule->group_of_category) {
    auto code = given.CodeOf(label);
    if (!code) {
      return absl::InvalidArgumentError(absl::StrCat(
          "targeting rule names unknown category '", label, "' of '",
          given.name(), "'"));
    }
    if (auto it = index_of_group.find(group); it != index_of_group.end()) {
      factor.matrix_for_category[*code] = it->second;
    }
  }
  return MisclassSpec::Create(keyspace, {std::move(factor)});
}

void WriteSwapLog(std::ostream& out, const SwapLog& log,
                  const MicrodataTable& original, const KeySpace& keyspace,
                  std::size_t swap_variable, char delimiter) {
  const auto& labels = keyspace.variable(swap_variable).categories();
  out << "# pool_size=" << log.pool_size << " flagged=" << log.flagged
      << " swapped_pairs=" << log.pairs.size()
      << " unswapped_flagged=" << log.unswapped_flagged << '\n';
  out << "flagged_id" << delimiter << "partner_id" << delimiter
      << "flagged_old" << delimiter << "flagged_new" << delimiter
      << "partner_old" << delimiter << "partner_new" << '\n';
  for (const auto& p : log.pairs) {
    out << EscapeField(original.RecordId(p.flagged_row), delimiter) << delimiter
        << EscapeField(original.RecordId(p.partner_row), delimiter) << delimiter
        << EscapeField(labels[p.flagged_old], delimiter) << delimiter
        << EscapeField(labels[p.partner_old], delimiter) << delimiter
        << EscapeField(labels[p.partner_old], delimiter) << delimiter
        << EscapeField(labels[p.flagged_old], delimiter) << '\n';
  }
}

}  // namespace sdlrisk
