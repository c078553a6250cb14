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


#include "sdlrisk/utility.h"

#include <cmath>
#include <map>
#include <sstream>
#include <vector>

#include "gtest/gtest.h"
#include "sdlrisk/perturb.h"
#include "testing/fixtures.h"

namespace sdlrisk {
namespace {

TwoWayTable Make(std::size_t r, std::size_t c, std::vector<double> counts) {
  return *TwoWayTable::Create("A", "B", r, c, std::move(counts));
}

TwoWayTable RandomTable(Rng& rng, std::size_t r, std::size_t c) {
  std::vector<double> counts(r * c);
  for (double& d : counts) d = 1.0 + static_cast<double>(rng.UniformInt(40));
  return Make(r, c, counts);
}

TEST(TwoWayTableTest, ValidatesShapeAndCounts) {
  EXPECT_FALSE(TwoWayTable::Create("A", "B", 1, 2, {1, 2}).ok());
  EXPECT_FALSE(TwoWayTable::Create("A", "B", 2, 2, {1, 2, 3}).ok());
  EXPECT_FALSE(TwoWayTable::Create("A", "B", 2, 2, {1, 2, 3, -1}).ok());
  auto t = Make(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.at(1, 0), 4.0);
  EXPECT_EQ(t.total(), 21.0);
}

TEST(TwoWayTableTest, FromMicrodataCrossTabulates) {
  KeySpace ks = testing::MakeKeySpace({2, 3});
  auto m = *MicrodataTable::Create(ks, {0, 0, 0, 2, 1, 2, 1, 2});
  auto t = TwoWayTable::FromMicrodata(m, ks, 1, 0);
  ASSERT_TRUE(t.ok());
  EXPECT_EQ(t->rows(), 3u);
  EXPECT_EQ(t->at(2, 1), 2.0);
  EXPECT_EQ(t->row_name(), "V1");
  EXPECT_FALSE(TwoWayTable::FromMicrodata(m, ks, 1, 1).ok());
}

TEST(RaadTest, HandFixture) {
  auto orig = Make(2, 2, {4, 4, 4, 4});
  auto pert = Make(2, 2, {2, 6, 6, 2});
  EXPECT_DOUBLE_EQ(*Raad(orig, pert), 50.0);
  EXPECT_FALSE(Raad(orig, Make(2, 3, {1, 1, 1, 1, 1, 1})).ok());
  EXPECT_FALSE(Raad(Make(2, 2, {0, 0, 0, 0}), orig).ok());
}

TEST(UtilityIdentityTest, SelfComparisonIsNeutral) {
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    auto t = RandomTable(rng, 2 + rng.UniformInt(5), 2 + rng.UniformInt(5));
    EXPECT_EQ(*Raad(t, t), 100.0);
    EXPECT_EQ(Rcv(t, t)->value, 0.0);
    for (std::size_t c = 0; c < t.columns(); ++c) {
      EXPECT_EQ(*Bvr(t, t, c), 0.0);
    }
  }
}

TEST(RaadTest, InvariantUnderJointPermutation) {
  Rng rng(2);
  auto a = RandomTable(rng, 3, 4);
  auto b = RandomTable(rng, 3, 4);
  const std::vector<std::size_t> rp = {2, 0, 1}, cp = {3, 1, 0, 2};
  auto permute = [&](const TwoWayTable& t) {
    std::vector<double> out(12);
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t c = 0; c < 4; ++c) out[r * 4 + c] = t.at(rp[r], cp[c]);
    }
    return Make(3, 4, out);
  };
  EXPECT_NEAR(*Raad(a, b), *Raad(permute(a), permute(b)), 1e-12);
}

// Chi-square written out for a 2x2 table.
double CramersV2x2(double a, double b, double c, double d) {
  const double n = a + b + c + d;
  const double num = n * (a * d - b * c) * (a * d - b * c);
  const double chi2 = num / ((a + b) * (c + d) * (a + c) * (b + d));
  return std::sqrt(chi2);
}

TEST(RcvTest, SignFixtureShowsAttenuation) {
  auto orig = Make(2, 2, {10, 0, 0, 10});
  auto pert = Make(2, 2, {9, 1, 1, 9});
  auto rcv = Rcv(orig, pert);
  ASSERT_TRUE(rcv.ok());
  EXPECT_LT(rcv->value, 0.0);
  const double want =
      100.0 * (CramersV2x2(9, 1, 1, 9) - CramersV2x2(10, 0, 0, 10)) /
      CramersV2x2(10, 0, 0, 10);
  EXPECT_NEAR(rcv->value, want, 1e-9);
  EXPECT_NEAR(*CramersV(orig), std::sqrt(20.0), 1e-12);
}

TEST(RcvTest, ScaleConsistent) {
  Rng rng(3);
  auto a = RandomTable(rng, 3, 3);
  auto b = RandomTable(rng, 3, 3);
  auto scale = [](const TwoWayTable& t, double k) {
    auto c = t.counts();
    for (double& d : c) d *= k;
    return Make(t.rows(), t.columns(), c);
  };
  EXPECT_NEAR(Rcv(a, b)->value, Rcv(scale(a, 7), scale(b, 7))->value, 1e-9);
}

TEST(RcvTest, DropsDoublyEmptyLinesAndWarnsOnOneSided) {
  auto orig = Make(3, 2, {5, 1, 0, 0, 2, 6});
  auto pert = Make(3, 2, {4, 2, 0, 0, 3, 5});
  auto r = *Rcv(orig, pert);
  EXPECT_EQ(r.dropped_rows, 1u);
  EXPECT_TRUE(r.warnings.empty());
  auto one_sided = Make(3, 2, {4, 2, 1, 0, 3, 5});
  auto w = *Rcv(orig, one_sided);
  EXPECT_EQ(w.dropped_rows, 0u);
  EXPECT_EQ(w.warnings.size(), 1u);
  EXPECT_FALSE(Rcv(Make(2, 2, {1, 1, 1, 1}), Make(2, 2, {1, 2, 3, 4})).ok());
  EXPECT_FALSE(Rcv(Make(2, 2, {1, 1, 0, 0}), Make(2, 2, {1, 2, 0, 0})).ok());
}

TEST(BvrTest, HandFixtureQuadrupledVariance) {
  auto orig = Make(3, 2, {4, 6, 5, 5, 6, 4});
  auto pert = Make(3, 2, {3, 7, 5, 5, 7, 3});
  EXPECT_NEAR(*BetweenRowVariance(orig, 0), 0.01, 1e-15);
  EXPECT_NEAR(*Bvr(orig, pert, 0), 300.0, 1e-9);
  EXPECT_FALSE(Bvr(orig, pert, 2).ok());
  EXPECT_FALSE(Bvr(Make(2, 2, {1, 1, 1, 1}), Make(2, 2, {1, 2, 2, 1}), 0).ok());
}

TEST(BvrTest, InvariantUnderRowPermutation) {
  Rng rng(4);
  auto a = RandomTable(rng, 4, 3);
  auto b = RandomTable(rng, 4, 3);
  const std::vector<std::size_t> rp = {3, 1, 0, 2};
  auto permute = [&](const TwoWayTable& t) {
    std::vector<double> out(12);
    for (std::size_t r = 0; r < 4; ++r) {
      for (std::size_t c = 0; c < 3; ++c) out[r * 3 + c] = t.at(rp[r], c);
    }
    return Make(4, 3, out);
  };
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_NEAR(*Bvr(a, b, c), *Bvr(permute(a), permute(b), c), 1e-9);
  }
}

TEST(BvrTest, UnmovedGroupHasZeroBvr) {
  Rng rng(5);
  KeySpace ks = testing::MakeKeySpace({5, 3});
  auto effects = testing::DecreasingEffects(ks, 0.2, rng);
  auto pop = testing::DrawIndependent(ks, 5000, effects, rng);
  auto grouped = *AssignTargetGroups(pop, ks, {1, {{"3", "Other"}}});
  SwapPlan plan;
  plan.mode = SwapMode::kTargeted;
  plan.group_rates = {{"Other", 0.4}};
  auto swapped = *TargetedSwap(grouped, ks, plan, 11);
  ASSERT_FALSE(swapped.log.pairs.empty());
  // Area by ethnicity; column 0 is the group that is never moved.
  auto orig = *TwoWayTable::FromMicrodata(grouped, ks, 0, 1);
  auto pert = *TwoWayTable::FromMicrodata(swapped.table, ks, 0, 1);
  EXPECT_EQ(*Bvr(orig, pert, 0), 0.0);
}

TEST(RiskUtilityMapTest, ParetoFrontier) {
  std::vector<MapRun> runs = {
      {"R10", 320.0, 90.0, -2.0, std::nullopt},
      {"T10", 150.0, 90.0, -1.0, std::nullopt},
      {"R20", 300.0, 85.0, std::nullopt, std::nullopt},
      {"T20", 80.0, 80.0, std::nullopt, std::nullopt},
  };
  auto points = RiskUtilityMap(runs);
  ASSERT_TRUE(points.ok());
  std::map<std::string, bool> frontier;
  for (const auto& p : *points) frontier[p.label] = p.on_frontier;
  EXPECT_TRUE(frontier["T10"]);
  EXPECT_TRUE(frontier["T20"]);
  EXPECT_FALSE(frontier["R10"]);
  EXPECT_FALSE(frontier["R20"]);
  EXPECT_DOUBLE_EQ((*points)[1].loss, 10.0);
  runs.push_back(runs[0]);
  EXPECT_FALSE(RiskUtilityMap(runs).ok());
  EXPECT_FALSE(RiskUtilityMap({}).ok());
}

TEST(WritersTest, HeadersAndBlankOptionalFields) {
  std::ostringstream a, b;
  UtilityMeasures m;
  m.table = "A*B";
  m.raad = 90;
  m.rcv = -3;
  WriteUtilityMeasures(a, {m});
  EXPECT_EQ(a.str(), "table,raad,rcv,bvr_column,bvr\nA*B,90,-3,,\n");
  WriteRiskUtilityMap(b, *RiskUtilityMap({{"X", 1.5, 99, std::nullopt,
                                           std::nullopt}}));
  EXPECT_EQ(b.str(), "label,tau,loss,raad,rcv,bvr,frontier\nX,1.5,1,99,,,1\n");
}

}  // namespace
}  // namespace sdlrisk
