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

#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "gtest/gtest.h"
#include "testing/fixtures.h"

namespace sdlrisk {
namespace {

using ::sdlrisk::testing::MakeKeySpace;

std::vector<int> Marginal(const MicrodataTable& t, std::size_t var, int card) {
  std::vector<int> out(card, 0);
  for (std::size_t i = 0; i < t.size(); ++i) out[t.Code(i, var)]++;
  return out;
}

MicrodataTable HouseholdTable(std::size_t n, Rng& rng) {
  KeySpace ks = MakeKeySpace({6, 3, 2});
  auto effects = testing::DecreasingEffects(ks, 0.3, rng);
  auto t = testing::DrawIndependent(ks, n, effects, rng);
  RecordAnnotations ann;
  for (std::size_t i = 0; i < n; ++i) {
    ann.record_id.push_back("p" + std::to_string(i));
    ann.control_stratum.push_back("h" + std::to_string(i % 3));
  }
  return *MicrodataTable::Create(ks, t.codes(), ann);
}

TEST(TargetGroupsTest, AssignsGroupsFromCategories) {
  KeySpace ks = MakeKeySpace({3, 2});
  auto t = *MicrodataTable::Create(ks, {0, 0, 1, 1, 2, 0});
  TargetingRule rule{0, {{"1", "A"}, {"3", "B"}}};
  auto out = AssignTargetGroups(t, ks, rule);
  ASSERT_TRUE(out.ok());
  EXPECT_EQ(out->TargetGroup(0), "A");
  EXPECT_EQ(out->TargetGroup(1), "");
  EXPECT_EQ(out->TargetGroup(2), "B");
  rule.group_of_category["9"] = "C";
  EXPECT_FALSE(AssignTargetGroups(t, ks, rule).ok());
}

TEST(RandomSwapTest, ConservesMarginalsAndOtherColumns) {
  Rng rng(1);
  for (double rate : {0.05, 0.1, 0.2, 0.5, 1.0}) {
    auto t = HouseholdTable(3000, rng);
    KeySpace ks = MakeKeySpace({6, 3, 2});
    SwapPlan plan;
    plan.swap_variable = 0;
    plan.rate = rate;
    auto r = RandomSwap(t, ks, plan, 77);
    ASSERT_TRUE(r.ok()) << r.status();
    EXPECT_EQ(Marginal(r->table, 0, 6), Marginal(t, 0, 6));
    for (std::size_t i = 0; i < t.size(); ++i) {
      ASSERT_EQ(r->table.Code(i, 1), t.Code(i, 1));
      ASSERT_EQ(r->table.Code(i, 2), t.Code(i, 2));
    }
    EXPECT_EQ(r->table.annotations().record_id, t.annotations().record_id);
    // Every pair exchanges two distinct values.
    std::set<std::size_t> touched;
    for (const auto& p : r->log.pairs) {
      EXPECT_NE(p.flagged_old, p.partner_old);
      EXPECT_EQ(r->table.Code(p.flagged_row, 0), p.partner_old);
      EXPECT_EQ(r->table.Code(p.partner_row, 0), p.flagged_old);
      EXPECT_TRUE(touched.insert(p.flagged_row).second);
      EXPECT_TRUE(touched.insert(p.partner_row).second);
    }
    EXPECT_EQ(r->log.pairs.size() + r->log.unswapped_flagged, r->log.flagged);
  }
}

TEST(RandomSwapTest, PoolSizeIsRoundedPerCategory) {
  KeySpace ks = MakeKeySpace({2});
  std::vector<CategoryCode> codes(30, 0);
  codes.resize(50, 1);
  auto t = *MicrodataTable::Create(ks, codes);
  SwapPlan plan;
  plan.rate = 0.1;
  auto r = *RandomSwap(t, ks, plan, 3);
  EXPECT_EQ(r.log.pool_size, 3u + 2u);
  EXPECT_EQ(r.log.flagged, 1u + 1u);
}

TEST(RandomSwapTest, WithinStrataPartnersShareStratum) {
  Rng rng(2);
  auto t = HouseholdTable(2000, rng);
  KeySpace ks = MakeKeySpace({6, 3, 2});
  SwapPlan plan;
  plan.rate = 0.3;
  plan.within_control_strata = true;
  auto r = *RandomSwap(t, ks, plan, 5);
  ASSERT_FALSE(r.log.pairs.empty());
  for (const auto& p : r.log.pairs) {
    EXPECT_EQ(t.ControlStratum(p.flagged_row), t.ControlStratum(p.partner_row));
  }
  EXPECT_EQ(Marginal(r.table, 0, 6), Marginal(t, 0, 6));
}

TEST(RandomSwapTest, RejectsBadPlans) {
  KeySpace ks = MakeKeySpace({3});
  auto t = *MicrodataTable::Create(ks, {0, 1, 2});
  SwapPlan plan;
  plan.rate = 1.5;
  EXPECT_FALSE(RandomSwap(t, ks, plan, 1).ok());
  plan.rate = 0.5;
  plan.within_control_strata = true;
  EXPECT_FALSE(RandomSwap(t, ks, plan, 1).ok());
  auto single = *MicrodataTable::Create(ks, {1, 1, 1});
  plan.within_control_strata = false;
  EXPECT_EQ(RandomSwap(single, ks, plan, 1).status().code(),
            absl::StatusCode::kFailedPrecondition);
}

TEST(RandomSwapTest, DeterministicForSeed) {
  Rng rng(3);
  auto t = HouseholdTable(1000, rng);
  KeySpace ks = MakeKeySpace({6, 3, 2});
  SwapPlan plan;
  plan.rate = 0.2;
  auto a = *RandomSwap(t, ks, plan, 9);
  auto b = *RandomSwap(t, ks, plan, 9);
  EXPECT_EQ(a.table.codes(), b.table.codes());
  auto c = *RandomSwap(t, ks, plan, 10);
  EXPECT_NE(a.table.codes(), c.table.codes());
}

TEST(TargetedSwapTest, OnlyTargetedGroupsChange) {
  Rng rng(4);
  KeySpace ks = MakeKeySpace({6, 3, 2});
  auto base = HouseholdTable(4000, rng);
  auto t = *AssignTargetGroups(base, ks, {1, {{"1", "WB"}, {"3", "Other"}}});
  SwapPlan plan;
  plan.mode = SwapMode::kTargeted;
  plan.group_rates = {{"WB", 0.05}, {"Other", 0.5}};
  auto r = TargetedSwap(t, ks, plan, 6);
  ASSERT_TRUE(r.ok()) << r.status();
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t.TargetGroup(i).empty()) {
      ASSERT_EQ(r->table.Code(i, 0), t.Code(i, 0));
    }
  }
  for (const auto& p : r->log.pairs) {
    EXPECT_EQ(t.TargetGroup(p.flagged_row), t.TargetGroup(p.partner_row));
  }
  EXPECT_EQ(Marginal(r->table, 0, 6), Marginal(t, 0, 6));

  plan.group_rates["Missing"] = 0.1;
  EXPECT_FALSE(TargetedSwap(t, ks, plan, 6).ok());
  EXPECT_FALSE(TargetedSwap(base, ks, plan, 6).ok());
}

TEST(SwapMatrixTest, OffDiagonalProportionalToCounts) {
  const std::vector<std::int64_t> counts = {10, 30, 60};
  auto m = *SwapMisclassMatrix(counts, 0.9);
  EXPECT_DOUBLE_EQ(m(0, 0), 0.9);
  EXPECT_NEAR(m(0, 1), 0.1 * 30 / 90, 1e-15);
  EXPECT_NEAR(m(2, 0), 0.1 * 10 / 40, 1e-15);
  EXPECT_TRUE(ValidateRowStochastic(m).ok());
  const std::vector<std::int64_t> lonely = {5, 0};
  EXPECT_FALSE(SwapMisclassMatrix(lonely, 0.9).ok());
  EXPECT_TRUE(SwapMisclassMatrix(lonely, 1.0).ok());
}

TEST(SwapMatrixTest, PlanMatricesUsePlanDiagonal) {
  Rng rng(5);
  KeySpace ks = MakeKeySpace({6, 3, 2});
  auto t = HouseholdTable(500, rng);
  SwapPlan plan;
  plan.rate = 0.2;
  auto m = *SwapMisclassMatrices(t, ks, plan);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_DOUBLE_EQ(m.at("")(3, 3), 0.8);
  plan.diagonal = 0.95;
  EXPECT_DOUBLE_EQ(SwapMisclassMatrices(t, ks, plan)->at("")(3, 3), 0.95);
}

// Independent construction: R = M Q with Q from Bayes' rule written out
// entry by entry.
TransitionMatrix OracleInvariant(const TransitionMatrix& m,
                                 const std::vector<double>& p, double alpha) {
  const int n = static_cast<int>(m.rows());
  TransitionMatrix r = TransitionMatrix::Identity(n, n);
  for (int i = 0; i < n; ++i) {
    if (p[i] == 0.0) continue;
    for (int j = 0; j < n; ++j) {
      double v = 0.0;
      for (int k = 0; k < n; ++k) {
        double denom = 0.0;
        for (int l = 0; l < n; ++l) denom += m(l, k) * p[l];
        if (denom > 0.0) v += m(i, k) * m(j, k) * p[j] / denom;
      }
      r(i, j) = v;
    }
  }
  return alpha * r + (1 - alpha) * TransitionMatrix::Identity(n, n);
}

TEST(InvariantPramTest, MatchesOracleAndPreservesProportions) {
  Rng rng(6);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + static_cast<int>(rng.UniformInt(9));
    std::vector<double> p(n);
    double sum = 0.0;
    for (double& v : p) sum += (v = rng.Uniform() < 0.15 ? 0.0 : rng.Uniform());
    if (sum == 0.0) continue;
    for (double& v : p) v /= sum;
    auto base = *UniformOffDiagonalMatrix(n, 0.5 + 0.5 * rng.Uniform());
    const double alpha = rng.Uniform();
    auto got = *InvariantPramMatrix(base, p, alpha);
    auto want = OracleInvariant(base, p, alpha);
    EXPECT_LT((got - want).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_TRUE(ValidateRowStochastic(got).ok());
    Eigen::RowVectorXd pv = Eigen::Map<Eigen::RowVectorXd>(p.data(), n);
    EXPECT_LT((pv * got - pv).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(InvariantPramTest, AlphaZeroIsIdentity) {
  const std::vector<double> p = {0.2, 0.3, 0.5};
  auto m = *InvariantPramMatrix(*UniformOffDiagonalMatrix(3, 0.6), p, 0.0);
  EXPECT_TRUE(m.isApprox(TransitionMatrix::Identity(3, 3)));
}

TEST(InvariantPramTest, RejectsBadInputs) {
  auto base = *UniformOffDiagonalMatrix(3, 0.8);
  EXPECT_FALSE(InvariantPramMatrix(base, std::vector<double>{0.5, 0.5}, 0.5).ok());
  EXPECT_FALSE(
      InvariantPramMatrix(base, std::vector<double>{0.5, 0.6, 0.1}, 0.5).ok());
  EXPECT_FALSE(
      InvariantPramMatrix(base, std::vector<double>{0.5, 0.5, 0.0}, 1.5).ok());
  TransitionMatrix stuck(2, 2);
  stuck << 1.0, 0.0, 1.0, 0.0;
  EXPECT_EQ(InvariantPramMatrix(stuck, std::vector<double>{0.5, 0.5}, 1.0)
                .status()
                .code(),
            absl::StatusCode::kFailedPrecondition);
}

TEST(ApplyPramTest, TargetedGroupsUseTheirOwnMatrices) {
  Rng rng(7);
  KeySpace ks = MakeKeySpace({6, 3, 2});
  auto base = HouseholdTable(3000, rng);
  auto t = *AssignTargetGroups(base, ks, {1, {{"1", "A"}, {"2", "B"}}});
  PramPlan plan;
  plan.variable = 0;
  plan.group_plans["A"] = {*UniformOffDiagonalMatrix(6, 0.9), 0.55};
  plan.group_plans["B"] = {*UniformOffDiagonalMatrix(6, 0.25), 0.85};
  auto r = ApplyPram(t, ks, plan, 8);
  ASSERT_TRUE(r.ok()) << r.status();
  EXPECT_EQ(r->matrices.size(), 2u);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t.TargetGroup(i).empty()) ASSERT_EQ(r->table.Code(i, 0), t.Code(i, 0));
    ASSERT_EQ(r->table.Code(i, 1), t.Code(i, 1));
  }
  auto again = *ApplyPram(t, ks, plan, 8);
  EXPECT_EQ(again.table.codes(), r->table.codes());
  EXPECT_FALSE(ApplyPram(base, ks, plan, 8).ok());
}

TEST(SingleVariableSpecTest, UnmappedCategoriesAreIdentity) {
  KeySpace ks = MakeKeySpace({3, 2});
  std::map<std::string, TransitionMatrix> by_group = {
      {"G", *UniformOffDiagonalMatrix(3, 0.7)}};
  TargetingRule rule{1, {{"2", "G"}}};
  auto spec = SingleVariableSpec(ks, 0, by_group, &rule);
  ASSERT_TRUE(spec.ok()) << spec.status();
  const std::vector<CategoryCode> in_group = {0, 1};
  const std::vector<CategoryCode> out_group = {0, 0};
  EXPECT_DOUBLE_EQ(spec->DiagonalEntry(*ks.Encode(in_group)), 0.7);
  EXPECT_DOUBLE_EQ(spec->DiagonalEntry(*ks.Encode(out_group)), 1.0);
  EXPECT_FALSE(SingleVariableSpec(ks, 0, by_group, nullptr).ok());
  std::map<std::string, TransitionMatrix> plain = {
      {"", *UniformOffDiagonalMatrix(3, 0.7)}};
  EXPECT_TRUE(SingleVariableSpec(ks, 0, plain, nullptr).ok());
}

TEST(SwapLogTest, WritesOneRowPerPair) {
  KeySpace ks = MakeKeySpace({3});
  auto t = *MicrodataTable::Create(ks, {0, 1, 2, 0, 1, 2, 0, 1});
  SwapPlan plan;
  plan.rate = 1.0;
  auto r = *RandomSwap(t, ks, plan, 1);
  std::ostringstream out;
  WriteSwapLog(out, r.log, t, ks, 0);
  std::string line;
  std::istringstream in(out.str());
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 2 + static_cast<int>(r.log.pairs.size()));
}

}  // namespace
}  // namespace sdlrisk
