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

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "absl/strings/str_cat.h"
#include "sdlrisk/microdata_io.h"
#include "sdlrisk/report_format.h"
#include "sdlrisk/rng.h"

namespace sdlrisk {
namespace {

double Clip01(double v) { return std::clamp(v, 0.0, 1.0); }

absl::Status Missing(std::string_view what, RiskFormula formula) {
  return absl::FailedPreconditionError(absl::StrCat(
      "formula '", std::string(FormulaId(formula)), "' needs ",
      std::string(what)));
}

// [M_jj / (1 - pi M_jj)] / sum_k c_k M_jk / (1 - pi M_jk) over the support
// of `counts`. When pi M_jj = 1 the ratio is taken in the limit, which is
// 1 / c_j provided no other cell also has pi M_jk = 1.
absl::StatusOr<double> MatchRatio(CellIndex j, double pi,
                                  const FrequencyTable& counts,
                                  const MisclassSpec& misclass,
                                  RiskFormula formula) {
  const std::int64_t c_j = counts.Count(j);
  if (c_j == 0) return 0.0;
  const double m_jj = misclass.DiagonalEntry(j);
  if (m_jj == 0.0) return 0.0;
  const bool diagonal_degenerate = pi * m_jj >= 1.0;
  const double w_j = m_jj / (1.0 - pi * m_jj);
  // Weights are taken relative to the diagonal term, which then contributes
  // exactly c_j; without misclassification the result is exactly 1 / c_j.
  double denominator = 0.0;
  for (const auto& [k, c_k] : counts.entries()) {
    const double m_jk = misclass.CompositeEntry(j, k);
    if (m_jk == 0.0) continue;
    if (pi * m_jk >= 1.0) {
      if (k == j) continue;
      return absl::FailedPreconditionError(absl::StrCat(
          "formula '", std::string(FormulaId(formula)),
          "': degenerate denominator, pi * M(", ExternalCellLabel(j), ",",
          ExternalCellLabel(k), ") = 1"));
    }
    if (diagonal_degenerate) continue;
    const double w_k = k == j ? w_j : m_jk / (1.0 - pi * m_jk);
    denominator += static_cast<double>(c_k) * (w_k / w_j);
  }
  if (diagonal_degenerate) return 1.0 / static_cast<double>(c_j);
  return 1.0 / denominator;
}

}  // namespace

std::string_view FormulaId(RiskFormula formula) {
  switch (formula) {
    case RiskFormula::kExact:
      return "exact";
    case RiskFormula::kKnownInSample:
      return "known-in-sample";
    case RiskFormula::kGouweleeuw:
      return "gouweleeuw";
    case RiskFormula::kGh:
      return "gh";
    case RiskFormula::kSmallDelta26:
      return "small-delta-2.6";
    case RiskFormula::kSmallDelta27:
      return "small-delta-2.7";
  }
  return "unknown";
}

absl::StatusOr<RiskFormula> ParseFormulaId(std::string_view id) {
  for (RiskFormula f : kAllRiskFormulas) {
    if (FormulaId(f) == id) return f;
  }
  return absl::InvalidArgumentError(
      absl::StrCat("unknown risk formula '", std::string(id), "'"));
}

absl::StatusOr<ReleasedPopulationSource> ReleasedSource(const RiskInputs& in) {
  if (in.population_released) return ReleasedPopulationSource::kObserved;
  if (in.population_true) return ReleasedPopulationSource::kExpected;
  return absl::FailedPreconditionError(
      "released population counts are unavailable: supply them or the true "
      "population counts");
}

absl::StatusOr<double> ReleasedPopulationCount(const RiskInputs& in,
                                               CellIndex cell) {
  auto source = ReleasedSource(in);
  if (!source.ok()) return source.status();
  if (*source == ReleasedPopulationSource::kObserved) {
    return static_cast<double>(in.population_released->Count(cell));
  }
  return ExpectedReleasedCount(in.misclass, *in.population_true, cell);
}

absl::StatusOr<double> RiskExact(CellIndex cell, const RiskInputs& in) {
  if (!in.population_true) {
    return Missing("true population counts F", RiskFormula::kExact);
  }
  auto pi = in.design.PiOrError(cell);
  if (!pi.ok()) return pi.status();
  return MatchRatio(cell, *pi, *in.population_true, in.misclass,
                    RiskFormula::kExact);
}

absl::StatusOr<double> RiskKnownInSample(CellIndex cell, const RiskInputs& in) {
  if (!in.sample_true) {
    return Missing("true sample counts f", RiskFormula::kKnownInSample);
  }
  return MatchRatio(cell, 1.0, *in.sample_true, in.misclass,
                    RiskFormula::kKnownInSample);
}

absl::StatusOr<double> RiskGouweleeuw(CellIndex cell, const RiskInputs& in) {
  if (!in.sample_true) {
    return Missing("true sample counts f", RiskFormula::kGouweleeuw);
  }
  const auto& f = *in.sample_true;
  const double numerator =
      in.misclass.DiagonalEntry(cell) * static_cast<double>(f.Count(cell));
  const double denominator = ExpectedReleasedCount(in.misclass, f, cell);
  if (denominator == 0.0) {
    return absl::FailedPreconditionError(absl::StrCat(
        "formula 'gouweleeuw': no sample mass maps into cell ",
        ExternalCellLabel(cell)));
  }
  return Clip01(numerator / denominator);
}

absl::StatusOr<double> RiskGh(CellIndex cell, const RiskInputs& in) {
  auto released = ReleasedPopulationCount(in, cell);
  if (!released.ok()) return released.status();
  if (*released <= 0.0) {
    return absl::FailedPreconditionError(absl::StrCat(
        "formula 'gh': released population count is 0 at cell ",
        ExternalCellLabel(cell), "; inputs are inconsistent"));
  }
  return Clip01(in.misclass.DiagonalEntry(cell) / *released);
}

absl::StatusOr<double> RiskSmallDelta26Raw(CellIndex cell,
                                           const RiskInputs& in) {
  if (!in.population_true) {
    return Missing("true population counts F", RiskFormula::kSmallDelta26);
  }
  const auto f_pop = static_cast<double>(in.population_true->Count(cell));
  if (f_pop == 0.0) return 0.0;
  auto pi = in.design.PiOrError(cell);
  if (!pi.ok()) return pi.status();
  auto released = ReleasedPopulationCount(in, cell);
  if (!released.ok()) return released.status();
  const double m_jj = in.misclass.DiagonalEntry(cell);
  if (m_jj == 0.0) return 0.0;
  if (*pi * m_jj >= 1.0) return 1.0 / f_pop;
  const double inflow = *released - f_pop * m_jj;
  const double scale = f_pop * m_jj / (1.0 - *pi * m_jj);
  return (1.0 - inflow / scale) / f_pop;
}

absl::StatusOr<double> RiskSmallDelta26(CellIndex cell, const RiskInputs& in) {
  auto raw = RiskSmallDelta26Raw(cell, in);
  if (!raw.ok()) return raw.status();
  return Clip01(*raw);
}

absl::StatusOr<double> RiskSmallDelta27(CellIndex cell, const RiskInputs& in) {
  if (!in.population_true) {
    return Missing("true population counts F", RiskFormula::kSmallDelta27);
  }
  const auto f_pop = static_cast<double>(in.population_true->Count(cell));
  if (f_pop == 0.0) return 0.0;
  auto pi = in.design.PiOrError(cell);
  if (!pi.ok()) return pi.status();
  auto released = ReleasedPopulationCount(in, cell);
  if (!released.ok()) return released.status();
  const double m_jj = in.misclass.DiagonalEntry(cell);
  // Numerator and denominator multiplied through by (1 - pi M_jj).
  const double denominator =
      f_pop * *pi * m_jj * m_jj + *released * (1.0 - *pi * m_jj);
  if (denominator <= 0.0) {
    return absl::FailedPreconditionError(absl::StrCat(
        "formula 'small-delta-2.7': zero denominator at cell ",
        ExternalCellLabel(cell)));
  }
  return Clip01(m_jj / denominator);
}

absl::StatusOr<double> EvaluateRisk(RiskFormula formula, CellIndex cell,
                                    const RiskInputs& in) {
  switch (formula) {
    case RiskFormula::kExact:
      return RiskExact(cell, in);
    case RiskFormula::kKnownInSample:
      return RiskKnownInSample(cell, in);
    case RiskFormula::kGouweleeuw:
      return RiskGouweleeuw(cell, in);
    case RiskFormula::kGh:
      return RiskGh(cell, in);
    case RiskFormula::kSmallDelta26:
      return RiskSmallDelta26(cell, in);
    case RiskFormula::kSmallDelta27:
      return RiskSmallDelta27(cell, in);
  }
  return absl::InternalError("unhandled formula");
}

std::vector<CellIndex> SampleUniques(const FrequencyTable& sample_released) {
  std::vector<CellIndex> out;
  for (const auto& [cell, count] : sample_released.entries()) {
    if (count == 1) out.push_back(cell);
  }
  return out;
}

absl::StatusOr<Aggregate> AggregateTau(const RiskInputs& in,
                                       RiskFormula formula) {
  Aggregate agg;
  for (CellIndex cell : SampleUniques(in.sample_released)) {
    auto v = EvaluateRisk(formula, cell, in);
    if (!v.ok()) return v.status();
    agg.total += *v;
    ++agg.sample_uniques;
  }
  if (agg.sample_uniques > 0) {
    agg.proportion = agg.total / static_cast<double>(agg.sample_uniques);
  }
  return agg;
}

absl::StatusOr<Aggregate> TauStar(const RiskInputs& in) {
  if (!in.population_true || !in.sample_true) {
    return absl::FailedPreconditionError(
        "tau-star needs true population and true sample counts");
  }
  Aggregate agg;
  for (CellIndex cell : SampleUniques(*in.sample_true)) {
    const std::int64_t f_pop = in.population_true->Count(cell);
    if (f_pop == 0) {
      return absl::FailedPreconditionError(absl::StrCat(
          "tau-star: sample key ", ExternalCellLabel(cell),
          " is absent from the population"));
    }
    agg.total += 1.0 / static_cast<double>(f_pop);
    ++agg.sample_uniques;
  }
  if (agg.sample_uniques > 0) {
    agg.proportion = agg.total / static_cast<double>(agg.sample_uniques);
  }
  return agg;
}

absl::StatusOr<Aggregate> TauCorrectlyClassified(const RiskInputs& in) {
  if (!in.population_true) {
    return absl::FailedPreconditionError("tau-cc needs true population counts");
  }
  if (in.sample_true_keys.empty() ||
      in.sample_true_keys.size() != in.sample_released_keys.size()) {
    return absl::FailedPreconditionError(
        "tau-cc needs record-level true and released sample keys");
  }
  std::unordered_map<CellIndex, CellIndex> truth_of_released;
  for (std::size_t i = 0; i < in.sample_released_keys.size(); ++i) {
    truth_of_released[in.sample_released_keys[i]] = in.sample_true_keys[i];
  }
  Aggregate agg;
  for (CellIndex cell : SampleUniques(in.sample_released)) {
    ++agg.sample_uniques;
    auto it = truth_of_released.find(cell);
    if (it == truth_of_released.end() || it->second != cell) continue;
    const std::int64_t f_pop = in.population_true->Count(cell);
    if (f_pop > 0) agg.total += 1.0 / static_cast<double>(f_pop);
  }
  if (agg.sample_uniques > 0) {
    agg.proportion = agg.total / static_cast<double>(agg.sample_uniques);
  }
  return agg;
}

absl::StatusOr<RiskReport> BuildRiskReport(
    const RiskInputs& in, std::span<const RiskFormula> formulas) {
  RiskReport report;
  const auto uniques = SampleUniques(in.sample_released);
  report.sample_uniques = uniques.size();

  std::unordered_map<CellIndex, CellIndex> truth_of_released;
  const bool have_truth = !in.sample_true_keys.empty() &&
                          in.sample_true_keys.size() ==
                              in.sample_released_keys.size();
  if (have_truth) {
    for (std::size_t i = 0; i < in.sample_released_keys.size(); ++i) {
      truth_of_released[in.sample_released_keys[i]] = in.sample_true_keys[i];
    }
  }

  std::map<RiskFormula, Aggregate> sums;
  for (CellIndex cell : uniques) {
    RiskRecord record;
    record.cell = cell;
    if (have_truth) {
      auto it = truth_of_released.find(cell);
      record.correctly_classified =
          it != truth_of_released.end() && it->second == cell;
    }
    for (RiskFormula f : formulas) {
      auto v = EvaluateRisk(f, cell, in);
      if (!v.ok()) return v.status();
      record.measures[f] = *v;
      sums[f].total += *v;
      ++sums[f].sample_uniques;
      if (f == RiskFormula::kSmallDelta26) {
        auto raw = RiskSmallDelta26Raw(cell, in);
        if (!raw.ok()) return raw.status();
        record.small_delta_26_raw = *raw;
        if (*raw < 0.0 || *raw > 1.0) ++report.small_delta_26_clipped;
      }
    }
    report.per_record.push_back(std::move(record));
  }
  for (RiskFormula f : formulas) {
    Aggregate agg = sums[f];
    agg.sample_uniques = uniques.size();
    if (!uniques.empty()) {
      agg.proportion = agg.total / static_cast<double>(uniques.size());
    }
    report.aggregates[std::string(FormulaId(f))] = agg;
    if (f == RiskFormula::kExact) report.aggregates[std::string(kTauId)] = agg;
  }

  const bool uses_released = std::any_of(
      formulas.begin(), formulas.end(), [](RiskFormula f) {
        return f == RiskFormula::kGh || f == RiskFormula::kSmallDelta26 ||
               f == RiskFormula::kSmallDelta27;
      });
  if (uses_released) {
    auto source = ReleasedSource(in);
    if (source.ok()) {
      report.provenance["released-population"] =
          *source == ReleasedPopulationSource::kObserved
              ? "observed released population counts"
              : "expected counts sum_k F_k M_jk";
    }
  }
  if (in.population_true && in.sample_true) {
    auto tau_star = TauStar(in);
    if (!tau_star.ok()) return tau_star.status();
    report.aggregates[std::string(kTauStarId)] = *tau_star;
  }
  if (in.population_true && have_truth) {
    auto tau_cc = TauCorrectlyClassified(in);
    if (!tau_cc.ok()) return tau_cc.status();
    report.aggregates[std::string(kTauCcId)] = *tau_cc;
  }
  return report;
}

void WriteRiskRecords(std::ostream& out, const RiskReport& report,
                      const KeySpace& keyspace,
                      std::span<const RiskFormula> formulas, char delimiter) {
  out << "cell" << delimiter << "key" << delimiter << "correctly_classified";
  for (RiskFormula f : formulas) out << delimiter << FormulaId(f);
  const bool has_26 = std::find(formulas.begin(), formulas.end(),
                                RiskFormula::kSmallDelta26) != formulas.end();
  if (has_26) out << delimiter << "small-delta-2.6-raw";
  out << '\n';
  for (const auto& r : report.per_record) {
    out << ExternalCellLabel(r.cell) << delimiter
        << EscapeField(keyspace.CellLabel(r.cell), delimiter) << delimiter;
    if (r.correctly_classified) {
      out << (*r.correctly_classified ? "1" : "0");
    } else {
      out << "NA";
    }
    for (RiskFormula f : formulas) out << delimiter << Num(r.measures.at(f));
    if (has_26) out << delimiter << Num(r.small_delta_26_raw.value_or(0.0));
    out << '\n';
  }
}

void WriteRiskSummary(std::ostream& out, const RiskReport& report,
                      char delimiter) {
  out << "measure" << delimiter << "total" << delimiter << "proportion"
      << delimiter << "sample_uniques" << '\n';
  for (const auto& [id, agg] : report.aggregates) {
    out << id << delimiter << Num(agg.total) << delimiter
        << Num(agg.proportion) << delimiter << agg.sample_uniques << '\n';
  }
  const double su = static_cast<double>(report.sample_uniques);
  auto put_estimate = [&](std::string_view id, std::optional<double> v) {
    if (!v) return;
    out << id << delimiter << Num(*v) << delimiter
        << Num(su > 0 ? *v / su : 0.0) << delimiter << report.sample_uniques
        << '\n';
  };
  put_estimate("estimated-naive", report.estimated_naive);
  put_estimate("estimated-adjusted", report.estimated_adjusted);
  for (const auto& [key, note] : report.provenance) {
    out << "# " << key << ": " << note << '\n';
  }
  if (report.small_delta_26_clipped > 0) {
    out << "# small-delta-2.6 clipped to [0,1] for "
        << report.small_delta_26_clipped << " records\n";
  }
}

absl::StatusOr<std::map<CellIndex, OracleEstimate>> RiskMonteCarloOracle(
    std::span<const CellIndex> targets, const MicrodataTable& population,
    const MisclassSpec& misclass, const SamplingDesign& design,
    std::int64_t replicates, std::uint64_t seed) {
  const KeySpace& keyspace = misclass.keyspace();
  if (replicates <= 0) {
    return absl::InvalidArgumentError("replicates must be positive");
  }
  const std::size_t n_units = population.size();
  std::vector<CellIndex> true_keys(n_units);
  for (std::size_t i = 0; i < n_units; ++i) {
    true_keys[i] = population.Key(keyspace, i);
  }
  std::map<CellIndex, std::size_t> target_unit;
  for (CellIndex j : targets) {
    auto it = std::find(true_keys.begin(), true_keys.end(), j);
    if (it == true_keys.end()) {
      return absl::InvalidArgumentError(absl::StrCat(
          "no population unit has key ", ExternalCellLabel(j)));
    }
    target_unit[j] = static_cast<std::size_t>(it - true_keys.begin());
  }
  // Inclusion probability per released cell, looked up once.
  std::unordered_map<CellIndex, double> pi_cache;
  auto pi_of = [&](CellIndex cell) -> absl::StatusOr<double> {
    if (auto it = pi_cache.find(cell); it != pi_cache.end()) return it->second;
    auto pi = design.PiOrError(cell);
    if (!pi.ok()) return pi.status();
    pi_cache.emplace(cell, *pi);
    return *pi;
  };

  std::map<CellIndex, OracleEstimate> results;
  for (const auto& [j, unit] : target_unit) results[j];
  std::unordered_map<CellIndex, std::int64_t> match_count;
  std::unordered_map<CellIndex, std::size_t> match_unit;
  std::vector<CategoryCode> released(keyspace.num_variables());
  Rng rng(seed);
  for (std::int64_t rep = 0; rep < replicates; ++rep) {
    for (auto& [j, c] : match_count) c = 0;
    for (std::size_t a = 0; a < n_units; ++a) {
      misclass.Misclassify(population.Record(a), released, rng);
      const CellIndex cell = keyspace.EncodeUnchecked(released);
      auto pi = pi_of(cell);
      if (!pi.ok()) return pi.status();
      if (!rng.Bernoulli(*pi)) continue;
      if (!target_unit.contains(cell)) continue;
      if (match_count[cell]++ == 0) match_unit[cell] = a;
    }
    for (auto& [j, est] : results) {
      auto it = match_count.find(j);
      if (it == match_count.end() || it->second != 1) continue;
      ++est.qualifying;
      if (match_unit[j] == target_unit[j]) ++est.correct;
    }
  }
  for (auto& [j, est] : results) {
    if (est.qualifying == 0) {
      return absl::FailedPreconditionError(absl::StrCat(
          "no replicate produced a unique sample match for cell ",
          ExternalCellLabel(j)));
    }
    const double q = static_cast<double>(est.qualifying);
    est.estimate = static_cast<double>(est.correct) / q;
    est.standard_error = std::sqrt(est.estimate * (1.0 - est.estimate) / q);
  }
  return results;
}

}  // namespace sdlrisk
