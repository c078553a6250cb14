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


#include "sdlrisk/linksim.h"

#include <bit>
#include <cmath>
#include <sstream>
#include <vector>

#include "gtest/gtest.h"
#include "testing/fixtures.h"

namespace sdlrisk {
namespace {

TEST(BinaryThetaTest, KeepsMarginalInvariant) {
  for (double p : {0.1, 0.2, 0.5}) {
    for (double t1 : {0.0, 0.01, 0.05, 0.1}) {
      const double t2 = *BinaryTheta2(p, t1);
      // Mass leaving category 1 equals mass entering it.
      EXPECT_NEAR((1 - p) * t1, p * t2, 1e-15);
    }
  }
  EXPECT_FALSE(BinaryTheta2(0.0, 0.1).ok());
  EXPECT_FALSE(BinaryTheta2(0.2, 0.3).ok());
  EXPECT_FALSE(BinaryTheta2(0.2, -0.1).ok());
}

TEST(BinaryPopulationTest, MarginalsAndFlipRates) {
  const std::size_t n = 200000;
  auto pop = GenerateBinaryPopulation(n, 3, 0.2, 0.05, 9);
  ASSERT_TRUE(pop.ok());
  const double t2 = *BinaryTheta2(0.2, 0.05);
  for (int c = 0; c < 3; ++c) {
    const std::uint64_t bit = std::uint64_t{1} << c;
    double ones_truth = 0, ones_rel = 0, from1 = 0, flip1 = 0, from2 = 0,
           flip2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool t = pop->truth[i] & bit, r = pop->released[i] & bit;
      ones_truth += t;
      ones_rel += r;
      if (t) {
        ++from2;
        flip2 += !r;
      } else {
        ++from1;
        flip1 += r;
      }
    }
    const double sd = std::sqrt(0.2 * 0.8 / n);
    EXPECT_NEAR(ones_truth / n, 0.2, 4 * sd);
    EXPECT_NEAR(ones_rel / n, 0.2, 5 * sd);
    EXPECT_NEAR(flip1 / from1, 0.05, 4 * std::sqrt(0.05 * 0.95 / from1));
    EXPECT_NEAR(flip2 / from2, t2, 4 * std::sqrt(t2 * (1 - t2) / from2));
  }
  EXPECT_FALSE(GenerateBinaryPopulation(10, 0, 0.2, 0.0, 1).ok());
  EXPECT_FALSE(GenerateBinaryPopulation(10, 64, 0.2, 0.0, 1).ok());
}

TEST(BinaryPopulationTest, ThetaZeroLeavesKeysUnchanged) {
  auto pop = *GenerateBinaryPopulation(1000, 10, 0.3, 0.0, 4);
  EXPECT_EQ(pop.truth, pop.released);
}

BinaryExperimentConfig SmallConfig() {
  BinaryExperimentConfig config;
  config.population_size = 5000;
  config.sample_size = 300;
  config.num_variables = {3, 5, 8, 12};
  config.thetas = {0.0, 0.05};
  config.replicates = 3;
  config.seed = 17;
  return config;
}

TEST(BinaryExperimentTest, ShapeAndBasicProperties) {
  auto points = RunBinaryExperiment(SmallConfig());
  ASSERT_TRUE(points.ok()) << points.status();
  ASSERT_EQ(points->size(), 8u);
  double prev_su = -1;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& p = (*points)[i];
    EXPECT_EQ(p.theta, 0.0);
    // Without misclassification each unique contributes 1 / F_j <= 1.
    EXPECT_LE(p.risk_sum, p.sample_uniques);
    EXPECT_GE(p.sample_uniques, prev_su);
    prev_su = p.sample_uniques;
    EXPECT_GE(p.replicate_sd, 0.0);
  }
  auto again = *RunBinaryExperiment(SmallConfig());
  for (std::size_t i = 0; i < again.size(); ++i) {
    EXPECT_EQ(again[i].risk_sum, (*points)[i].risk_sum);
  }
}

TEST(BinaryExperimentTest, ThetaZeroMatchesDirectCount) {
  BinaryExperimentConfig config = SmallConfig();
  config.thetas = {0.0};
  config.num_variables = {4};
  config.replicates = 1;
  // With sample == population every sample unique has F_j = 1.
  config.sample_size = config.population_size;
  auto points = *RunBinaryExperiment(config);
  EXPECT_EQ(points[0].risk_sum, points[0].sample_uniques);
}

TEST(BinaryExperimentTest, RejectsBadConfigs) {
  auto config = SmallConfig();
  config.sample_size = config.population_size + 1;
  EXPECT_FALSE(RunBinaryExperiment(config).ok());
  config = SmallConfig();
  config.thetas = {0.5};
  EXPECT_FALSE(RunBinaryExperiment(config).ok());
  config = SmallConfig();
  config.num_variables = {};
  EXPECT_FALSE(RunBinaryExperiment(config).ok());
}

TEST(DefaultConfigTest, CoversStudyGrid) {
  auto c = DefaultBinaryExperimentConfig();
  EXPECT_EQ(c.num_variables.front(), 5);
  EXPECT_EQ(c.num_variables.back(), 30);
  EXPECT_EQ(c.population_size, 100000u);
  EXPECT_EQ(c.sample_size, 2000u);
  EXPECT_EQ(c.p, 0.2);
}

struct Toy {
  KeySpace ks;
  MicrodataTable pop;
  MisclassSpec spec;
};

Toy MakeToy() {
  KeySpace ks = testing::MakeKeySpace({2, 4});
  Rng rng(3);
  auto effects = testing::DecreasingEffects(ks, 0.3, rng);
  auto pop = testing::DrawIndependent(ks, 120, effects, rng);
  MisclassFactor f;
  f.variable = 1;
  f.matrices = {*UniformOffDiagonalMatrix(4, 0.8)};
  auto spec = *MisclassSpec::Create(ks, {f});
  return {ks, pop, spec};
}

TEST(LinkageExperimentTest, AgreesWithTheory) {
  Toy toy = MakeToy();
  auto design = *SamplingDesign::Global(0.2);
  LinkageExperimentConfig config;
  config.external_size = 60;
  config.replicates = 2000;
  config.seed = 5;
  auto result = RunLinkageExperiment(toy.pop, toy.spec, design, config);
  ASSERT_TRUE(result.ok()) << result.status();
  for (const auto& k : result->keys) {
    if (k.links < 100) continue;
    ASSERT_TRUE(k.phi_hat.has_value());
    EXPECT_NEAR(*k.phi_hat, k.theory, 4 * k.phi_se + 1e-12);
    EXPECT_NEAR(*k.m_hat, k.m_theory, 4 * k.m_se + 1e-12);
  }
  EXPECT_NEAR(result->p_hat, result->p_theory, 4 * result->p_se);
  EXPECT_NEAR(result->mean_sample_size, 24.0, 1.0);
}

TEST(LinkageExperimentTest, IdentityMatchesInverseCount) {
  Toy toy = MakeToy();
  toy.spec = MisclassSpec::Identity(toy.ks);
  auto design = *SamplingDesign::Global(0.3);
  LinkageExperimentConfig config;
  config.external_size = 120;
  config.replicates = 200;
  auto result = *RunLinkageExperiment(toy.pop, toy.spec, design, config);
  auto F = testing::CountsByCell(toy.ks, toy.pop);
  for (const auto& k : result.keys) {
    EXPECT_DOUBLE_EQ(k.theory, 1.0 / F[k.cell]);
    // Full external file: every link on key j is one of F_j candidates.
    if (k.links > 0) EXPECT_NEAR(*k.phi_hat, 1.0 / F[k.cell], 1e-12);
  }
}

TEST(LinkageExperimentTest, SkewedSamplerStillRuns) {
  Toy toy = MakeToy();
  auto design = *SamplingDesign::Global(0.2);
  LinkageExperimentConfig config;
  config.external_size = 50;
  config.replicates = 50;
  config.sampler = ExternalSampler::kSkewed;
  auto a = RunLinkageExperiment(toy.pop, toy.spec, design, config);
  ASSERT_TRUE(a.ok());
  auto b = *RunLinkageExperiment(toy.pop, toy.spec, design, config);
  EXPECT_EQ(a->total_links, b.total_links);
  config.external_size = 0;
  EXPECT_FALSE(RunLinkageExperiment(toy.pop, toy.spec, design, config).ok());
  config.external_size = 500;
  EXPECT_FALSE(RunLinkageExperiment(toy.pop, toy.spec, design, config).ok());
}

TEST(WritersTest, CurveAndLinkageHeaders) {
  std::ostringstream curve;
  WriteBinaryCurve(curve, {{5, 0.0, 12.5, 20, 1.25}});
  EXPECT_EQ(curve.str(),
            "C,theta,risk_sum,n_sample_uniques,replicate_sd\n5,0,12.5,20,1.25\n");
  LinkageResult r;
  r.keys.push_back({});
  std::ostringstream link;
  WriteLinkageResult(link, r);
  EXPECT_NE(link.str().find("1,0,0,NA,"), std::string::npos);
  EXPECT_NE(link.str().find("# p_hat="), std::string::npos);
}

}  // namespace
}  // namespace sdlrisk
