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


#include "sdlrisk/risk.h"

#include <cmath>
#include <sstream>
#include <vector>

#include "gtest/gtest.h"
#include "sdlrisk/perturb.h"
#include "testing/fixtures.h"

namespace sdlrisk {
namespace {

using ::sdlrisk::testing::DenseComposite;
using ::sdlrisk::testing::MakeKeySpace;

struct Scenario {
  KeySpace ks;
  MicrodataTable population;
  MicrodataTable sample_true;
  MicrodataTable sample_released;
  RiskInputs inputs;
};

Scenario BuildScenario(std::uint64_t seed, double diagonal, double pi,
                       std::size_t n = 3000) {
  Rng rng(seed);
  KeySpace ks = MakeKeySpace({4, 3, 5});
  auto effects = testing::DecreasingEffects(ks, 0.5, rng);
  auto pop = testing::DrawIndependent(ks, n, effects, rng);
  MisclassFactor f;
  f.variable = 2;
  f.matrices = {*UniformOffDiagonalMatrix(5, diagonal)};
  auto spec = *MisclassSpec::Create(ks, {f});
  auto design = *SamplingDesign::Global(pi);
  auto sample = *BernoulliSample(pop, ks, design, rng.Substream("s").seed());
  auto released = MisclassifyTable(sample, spec, rng.Substream("m").seed());
  RiskInputs in{spec,
                design,
                *Tabulate(pop, ks, CountRole::kPopulationTrue),
                std::nullopt,
                *Tabulate(sample, ks, CountRole::kSampleTrue),
                *Tabulate(released, ks, CountRole::kSamplePerturbed),
                {},
                {}};
  for (std::size_t i = 0; i < sample.size(); ++i) {
    in.sample_true_keys.push_back(sample.Key(ks, i));
    in.sample_released_keys.push_back(released.Key(ks, i));
  }
  return {ks, pop, sample, released, in};
}

// Direct evaluation of the exact measure from a dense composite.
double OracleExact(const Eigen::MatrixXd& m, const std::vector<double>& F,
                   double pi, CellIndex j) {
  if (F[j] == 0.0 || m(j, j) == 0.0) return 0.0;
  double denom = 0.0;
  for (std::size_t k = 0; k < F.size(); ++k) {
    denom += F[k] * m(j, k) / (1.0 - pi * m(j, k));
  }
  return (m(j, j) / (1.0 - pi * m(j, j))) / denom;
}

TEST(FormulaIdTest, RoundTrips) {
  for (RiskFormula f : kAllRiskFormulas) {
    EXPECT_EQ(*ParseFormulaId(FormulaId(f)), f);
  }
  EXPECT_FALSE(ParseFormulaId("nope").ok());
}

TEST(RiskExactTest, MatchesDenseOracle) {
  for (std::uint64_t seed : {1, 2, 3}) {
    auto sc = BuildScenario(seed, 0.8, 0.1);
    auto dense = DenseComposite(sc.inputs.misclass);
    auto F = testing::CountsByCell(sc.ks, sc.population);
    for (CellIndex j = 0; j < sc.ks.num_cells(); ++j) {
      auto got = RiskExact(j, sc.inputs);
      ASSERT_TRUE(got.ok());
      EXPECT_NEAR(*got, OracleExact(dense, F, 0.1, j), 1e-13);
    }
  }
}

TEST(RiskExactTest, IdentityGivesInverseCountExactly) {
  auto sc = BuildScenario(4, 1.0, 0.3);
  sc.inputs.misclass = MisclassSpec::Identity(sc.ks);
  auto F = testing::CountsByCell(sc.ks, sc.population);
  for (CellIndex j = 0; j < sc.ks.num_cells(); ++j) {
    if (F[j] == 0.0) continue;
    EXPECT_EQ(*RiskExact(j, sc.inputs), 1.0 / F[j]);
  }
}

TEST(RiskExactTest, ZeroPopulationCountIsZeroRisk) {
  auto sc = BuildScenario(5, 0.8, 0.1, 200);
  auto F = testing::CountsByCell(sc.ks, sc.population);
  for (CellIndex j = 0; j < sc.ks.num_cells(); ++j) {
    if (F[j] == 0.0) EXPECT_EQ(*RiskExact(j, sc.inputs), 0.0);
  }
}

TEST(RiskExactTest, FullSamplingUsesLimit) {
  auto sc = BuildScenario(6, 1.0, 1.0, 500);
  sc.inputs.misclass = MisclassSpec::Identity(sc.ks);
  auto F = testing::CountsByCell(sc.ks, sc.population);
  for (CellIndex j = 0; j < sc.ks.num_cells(); ++j) {
    if (F[j] > 0) EXPECT_EQ(*RiskExact(j, sc.inputs), 1.0 / F[j]);
  }
}

TEST(RiskExactTest, NeedsPopulationCounts) {
  auto sc = BuildScenario(7, 0.9, 0.1, 200);
  sc.inputs.population_true.reset();
  EXPECT_EQ(RiskExact(0, sc.inputs).status().code(),
            absl::StatusCode::kFailedPrecondition);
}

TEST(RiskExactTest, BoundedByOne) {
  auto sc = BuildScenario(8, 0.6, 0.5, 300);
  for (CellIndex j = 0; j < sc.ks.num_cells(); ++j) {
    const double v = *RiskExact(j, sc.inputs);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(ApproximationsTest, MatchWrittenFormulas) {
  auto sc = BuildScenario(9, 0.85, 0.05);
  auto dense = DenseComposite(sc.inputs.misclass);
  auto F = testing::CountsByCell(sc.ks, sc.population);
  Eigen::VectorXd Fv = Eigen::Map<Eigen::VectorXd>(F.data(), F.size());
  Eigen::VectorXd Ft = dense * Fv;
  const double pi = 0.05;
  for (CellIndex j = 0; j < sc.ks.num_cells(); ++j) {
    if (F[j] == 0.0) continue;
    const double mjj = dense(j, j);
    EXPECT_NEAR(*RiskGh(j, sc.inputs), std::min(1.0, mjj / Ft(j)), 1e-12);
    const double d26 =
        (1.0 - (Ft(j) - F[j] * mjj) / (F[j] * mjj / (1 - pi * mjj))) / F[j];
    EXPECT_NEAR(*RiskSmallDelta26Raw(j, sc.inputs), d26, 1e-12);
    const double d27 =
        (mjj / (1 - pi * mjj)) /
        (F[j] * pi * mjj * mjj / (1 - pi * mjj) + Ft(j));
    EXPECT_NEAR(*RiskSmallDelta27(j, sc.inputs), d27, 1e-12);
  }
}

TEST(ApproximationsTest, ObservedReleasedCountsTakePrecedence) {
  auto sc = BuildScenario(10, 0.9, 0.05);
  auto released_pop = MisclassifyTable(sc.population, sc.inputs.misclass, 3);
  sc.inputs.population_released =
      *Tabulate(released_pop, sc.ks, CountRole::kPopulationPerturbed);
  EXPECT_EQ(*ReleasedSource(sc.inputs), ReleasedPopulationSource::kObserved);
  for (CellIndex j = 0; j < sc.ks.num_cells(); ++j) {
    const double ft = double(sc.inputs.population_released->Count(j));
    EXPECT_EQ(*ReleasedPopulationCount(sc.inputs, j), ft);
  }
  sc.inputs.population_released.reset();
  EXPECT_EQ(*ReleasedSource(sc.inputs), ReleasedPopulationSource::kExpected);
  sc.inputs.population_true.reset();
  EXPECT_FALSE(ReleasedSource(sc.inputs).ok());
}

TEST(ApproximationsTest, ConvergeToExactAsPerturbationVanishes) {
  double prev = 1.0;
  for (double diag : {0.9, 0.99, 0.999}) {
    auto sc = BuildScenario(11, diag, 0.01, 20000);
    const double exact = AggregateTau(sc.inputs, RiskFormula::kExact)->total;
    const double d27 =
        AggregateTau(sc.inputs, RiskFormula::kSmallDelta27)->total;
    const double err = std::abs(d27 / exact - 1.0);
    EXPECT_LE(err, prev);
    prev = err;
  }
  EXPECT_LT(prev, 1e-4);
}

TEST(KnownInSampleTest, UsesSampleCountsWithFullInclusion) {
  auto sc = BuildScenario(12, 0.8, 0.1);
  auto dense = DenseComposite(sc.inputs.misclass);
  auto f = testing::CountsByCell(sc.ks, sc.sample_true);
  for (CellIndex j = 0; j < sc.ks.num_cells(); ++j) {
    EXPECT_NEAR(*RiskKnownInSample(j, sc.inputs), OracleExact(dense, f, 1.0, j),
                1e-13);
  }
}

TEST(GouweleeuwTest, MatchesWrittenFormula) {
  auto sc = BuildScenario(13, 0.8, 0.1);
  auto dense = DenseComposite(sc.inputs.misclass);
  auto f = testing::CountsByCell(sc.ks, sc.sample_true);
  for (CellIndex j : SampleUniques(sc.inputs.sample_released)) {
    double denom = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) denom += dense(j, k) * f[k];
    EXPECT_NEAR(*RiskGouweleeuw(j, sc.inputs),
                std::min(1.0, dense(j, j) * f[j] / denom), 1e-13);
  }
}

TEST(AggregateTest, SumsOverReleasedUniques) {
  auto sc = BuildScenario(14, 0.8, 0.1);
  auto agg = *AggregateTau(sc.inputs, RiskFormula::kExact);
  double sum = 0.0;
  std::size_t su = 0;
  for (const auto& [cell, count] : sc.inputs.sample_released.entries()) {
    if (count != 1) continue;
    sum += *RiskExact(cell, sc.inputs);
    ++su;
  }
  EXPECT_EQ(agg.sample_uniques, su);
  EXPECT_NEAR(agg.total, sum, 1e-12);
  EXPECT_NEAR(agg.proportion, sum / su, 1e-12);
}

TEST(AggregateTest, IdentityTauEqualsTauStar) {
  auto sc = BuildScenario(15, 1.0, 0.1);
  sc.inputs.misclass = MisclassSpec::Identity(sc.ks);
  sc.inputs.sample_released = *Tabulate(sc.sample_true, sc.ks,
                                        CountRole::kSamplePerturbed);
  auto tau = *AggregateTau(sc.inputs, RiskFormula::kExact);
  auto star = *TauStar(sc.inputs);
  EXPECT_EQ(tau.total, star.total);
  EXPECT_EQ(tau.sample_uniques, star.sample_uniques);
}

TEST(AggregateTest, TauCcCountsOnlyCorrectlyClassifiedUniques) {
  auto sc = BuildScenario(16, 0.7, 0.1);
  auto cc = *TauCorrectlyClassified(sc.inputs);
  auto F = testing::CountsByCell(sc.ks, sc.population);
  double want = 0.0;
  for (CellIndex j : SampleUniques(sc.inputs.sample_released)) {
    for (std::size_t i = 0; i < sc.inputs.sample_released_keys.size(); ++i) {
      if (sc.inputs.sample_released_keys[i] != j) continue;
      if (sc.inputs.sample_true_keys[i] == j && F[j] > 0) want += 1.0 / F[j];
    }
  }
  EXPECT_NEAR(cc.total, want, 1e-12);
  sc.inputs.sample_true_keys.clear();
  EXPECT_FALSE(TauCorrectlyClassified(sc.inputs).ok());
}

TEST(RiskReportTest, IncludesRequestedMeasuresAndWritesTables) {
  auto sc = BuildScenario(17, 0.5, 0.1);
  const std::vector<RiskFormula> formulas = {
      RiskFormula::kExact, RiskFormula::kGh, RiskFormula::kSmallDelta26};
  auto report = BuildRiskReport(sc.inputs, formulas);
  ASSERT_TRUE(report.ok()) << report.status();
  EXPECT_TRUE(report->aggregates.contains("tau"));
  EXPECT_TRUE(report->aggregates.contains("tau-star"));
  EXPECT_TRUE(report->aggregates.contains("tau-cc"));
  EXPECT_TRUE(report->aggregates.contains("gh"));
  EXPECT_EQ(report->aggregates.at("tau").total,
            report->aggregates.at("exact").total);
  EXPECT_EQ(report->per_record.size(), report->sample_uniques);
  for (const auto& r : report->per_record) {
    EXPECT_TRUE(r.correctly_classified.has_value());
    EXPECT_GE(r.measures.at(RiskFormula::kSmallDelta26), 0.0);
  }
  std::ostringstream records, summary;
  WriteRiskRecords(records, *report, sc.ks, formulas);
  WriteRiskSummary(summary, *report);
  EXPECT_EQ(records.str().substr(0, records.str().find('\n')),
            "cell,key,correctly_classified,exact,gh,small-delta-2.6,"
            "small-delta-2.6-raw");
  EXPECT_NE(summary.str().find("# released-population: expected"),
            std::string::npos);
}

TEST(OracleTest, AgreesWithExactOnTinyPopulation) {
  KeySpace ks = MakeKeySpace({2, 2});
  auto pop = *MicrodataTable::Create(ks, {0, 0, 0, 1, 0, 1, 1, 0, 1, 1, 1, 1,
                                          1, 1});
  MisclassFactor f;
  f.variable = 1;
  f.matrices = {*UniformOffDiagonalMatrix(2, 0.8)};
  auto spec = *MisclassSpec::Create(ks, {f});
  auto design = *SamplingDesign::Global(0.4);
  const std::vector<CellIndex> targets = {0, 1, 2, 3};
  auto est = RiskMonteCarloOracle(targets, pop, spec, design, 20000, 3);
  ASSERT_TRUE(est.ok()) << est.status();
  RiskInputs in{spec, design, *Tabulate(pop, ks, CountRole::kPopulationTrue),
                std::nullopt, std::nullopt, FrequencyTable(), {}, {}};
  for (CellIndex j : targets) {
    const auto& e = est->at(j);
    EXPECT_NEAR(e.estimate, *RiskExact(j, in), 4 * e.standard_error + 1e-9);
  }
  const std::vector<CellIndex> absent = {5};
  EXPECT_FALSE(
      RiskMonteCarloOracle(absent, pop, spec, design, 10, 1).ok());
}

}  // namespace
}  // namespace sdlrisk
