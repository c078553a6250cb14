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

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>

#include "absl/strings/str_cat.h"
#include "sdlrisk/report_format.h"
#include "sdlrisk/rng.h"

namespace sdlrisk {
namespace {

// Ratio estimator sum(y) / sum(x) over replicates with its linearized
// standard error.
struct RatioSums {
  double y = 0.0, x = 0.0, yy = 0.0, xx = 0.0, xy = 0.0;

  void Add(double yi, double xi) {
    y += yi;
    x += xi;
    yy += yi * yi;
    xx += xi * xi;
    xy += xi * yi;
  }
  std::optional<double> Ratio() const {
    if (x <= 0.0) return std::nullopt;
    return y / x;
  }
  double StandardError(int replicates) const {
    if (x <= 0.0 || replicates < 2) return 0.0;
    const double r = y / x;
    const double ss = std::max(0.0, yy - 2.0 * r * xy + r * r * xx);
    const double x_bar = x / replicates;
    return std::sqrt(ss / (static_cast<double>(replicates) * (replicates - 1))) /
           x_bar;
  }
};

std::vector<std::size_t> SkewedExternalSample(
    const std::vector<CellIndex>& keys, std::size_t size, Rng& rng) {
  std::vector<std::pair<double, std::size_t>> scored(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const double w = 1.0 + static_cast<double>(keys[i] % 3);
    double u = rng.Uniform();
    if (u <= 0.0) u = 0x1.0p-53;
    scored[i] = {std::log(u) / w, i};
  }
  std::partial_sort(scored.begin(), scored.begin() + size, scored.end(),
                    [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<std::size_t> rows(size);
  for (std::size_t i = 0; i < size; ++i) rows[i] = scored[i].second;
  std::sort(rows.begin(), rows.end());
  return rows;
}

}  // namespace

BinaryExperimentConfig DefaultBinaryExperimentConfig() {
  BinaryExperimentConfig config;
  for (int c = 5; c <= 30; ++c) config.num_variables.push_back(c);
  config.thetas = {0.0, 0.01, 0.02, 0.05, 0.10};
  return config;
}

absl::StatusOr<double> BinaryTheta2(double p, double theta1) {
  if (!(p > 0.0 && p < 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("p must be in (0, 1), got ", p));
  }
  if (!(theta1 >= 0.0 && theta1 <= 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("theta must be in [0, 1], got ", theta1));
  }
  const double theta2 = (1.0 - p) * theta1 / p;
  if (theta2 > 1.0) {
    return absl::InvalidArgumentError(absl::StrCat(
        "theta ", theta1, " exceeds p / (1 - p) = ", p / (1.0 - p),
        "; theta2 would be ", theta2));
  }
  return theta2;
}

absl::StatusOr<BinaryPopulation> GenerateBinaryPopulation(
    std::size_t size, int num_variables, double p, double theta1,
    std::uint64_t seed) {
  auto theta2 = BinaryTheta2(p, theta1);
  if (!theta2.ok()) return theta2.status();
  if (num_variables < 1 || num_variables > 63) {
    return absl::InvalidArgumentError(
        absl::StrCat("number of binary variables must be in 1..63, got ",
                     num_variables));
  }
  const Rng root(seed);
  Rng truth_rng = root.Substream("truth");
  Rng noise_rng = root.Substream("noise");
  BinaryPopulation pop;
  pop.truth.resize(size);
  pop.released.resize(size);
  for (std::size_t i = 0; i < size; ++i) {
    std::uint64_t key = 0;
    for (int c = 0; c < num_variables; ++c) {
      if (truth_rng.Uniform() < p) key |= std::uint64_t{1} << c;
    }
    pop.truth[i] = key;
  }
  for (std::size_t i = 0; i < size; ++i) {
    std::uint64_t key = pop.truth[i];
    for (int c = 0; c < num_variables; ++c) {
      const std::uint64_t bit = std::uint64_t{1} << c;
      const double u = noise_rng.Uniform();
      if (u < ((key & bit) ? *theta2 : theta1)) key ^= bit;
    }
    pop.released[i] = key;
  }
  return pop;
}

absl::StatusOr<std::vector<BinaryCurvePoint>> RunBinaryExperiment(
    const BinaryExperimentConfig& config) {
  if (config.sample_size < 1 ||
      config.sample_size > config.population_size) {
    return absl::InvalidArgumentError(
        "sample size must be in 1..population size");
  }
  if (config.num_variables.empty() || config.thetas.empty()) {
    return absl::InvalidArgumentError(
        "binary experiment needs at least one C and one theta");
  }
  if (config.replicates < 1) {
    return absl::InvalidArgumentError("replicates must be at least 1");
  }
  int max_c = 0;
  for (int c : config.num_variables) {
    if (c < 1 || c > 63) {
      return absl::InvalidArgumentError(
          absl::StrCat("C must be in 1..63, got ", c));
    }
    max_c = std::max(max_c, c);
  }
  std::vector<double> theta2(config.thetas.size());
  for (std::size_t t = 0; t < config.thetas.size(); ++t) {
    auto th2 = BinaryTheta2(config.p, config.thetas[t]);
    if (!th2.ok()) return th2.status();
    theta2[t] = *th2;
  }

  const std::size_t num_c = config.num_variables.size();
  // risk[t][c][r], uniques[t][c][r]
  std::vector<std::vector<std::vector<double>>> risk(
      config.thetas.size(),
      std::vector<std::vector<double>>(num_c,
                                       std::vector<double>(config.replicates)));
  auto uniques = risk;

  const Rng replicates_rng = Rng(config.seed).Substream("replicate");
  std::vector<std::uint64_t> pop_keys(config.population_size);
  std::vector<std::uint64_t> sample_keys(config.sample_size);
  for (int r = 0; r < config.replicates; ++r) {
    const Rng rep = replicates_rng.Substream(static_cast<std::uint64_t>(r));
    Rng sample_rng = rep.Substream("sample");
    const auto rows = sample_rng.SampleWithoutReplacement(
        config.population_size, config.sample_size);
    const std::uint64_t pop_seed = rep.Substream("population").seed();
    for (std::size_t t = 0; t < config.thetas.size(); ++t) {
      auto pop = GenerateBinaryPopulation(config.population_size, max_c,
                                          config.p, config.thetas[t], pop_seed);
      if (!pop.ok()) return pop.status();
      const double keep1 = 1.0 - config.thetas[t];
      const double keep2 = 1.0 - theta2[t];
      for (std::size_t ci = 0; ci < num_c; ++ci) {
        const int c = config.num_variables[ci];
        const std::uint64_t mask =
            c == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << c) - 1;
        for (std::size_t i = 0; i < pop_keys.size(); ++i) {
          pop_keys[i] = pop->released[i] & mask;
        }
        for (std::size_t i = 0; i < rows.size(); ++i) {
          sample_keys[i] = pop->released[rows[i]] & mask;
        }
        std::sort(pop_keys.begin(), pop_keys.end());
        std::sort(sample_keys.begin(), sample_keys.end());
        double sum = 0.0;
        std::size_t su = 0;
        for (std::size_t i = 0; i < sample_keys.size(); ++i) {
          const bool unique =
              (i == 0 || sample_keys[i - 1] != sample_keys[i]) &&
              (i + 1 == sample_keys.size() || sample_keys[i + 1] != sample_keys[i]);
          if (!unique) continue;
          const std::uint64_t key = sample_keys[i];
          const auto range =
              std::equal_range(pop_keys.begin(), pop_keys.end(), key);
          const double f_tilde = static_cast<double>(range.second - range.first);
          const int m = std::popcount(key);
          const double m_jj = std::pow(keep1, c - m) * std::pow(keep2, m);
          sum += m_jj / f_tilde;
          ++su;
        }
        risk[t][ci][r] = sum;
        uniques[t][ci][r] = static_cast<double>(su);
      }
    }
  }

  std::vector<BinaryCurvePoint> points;
  for (std::size_t t = 0; t < config.thetas.size(); ++t) {
    for (std::size_t ci = 0; ci < num_c; ++ci) {
      BinaryCurvePoint point;
      point.num_variables = config.num_variables[ci];
      point.theta = config.thetas[t];
      const auto& values = risk[t][ci];
      double mean = 0.0, mean_su = 0.0;
      for (int r = 0; r < config.replicates; ++r) {
        mean += values[r];
        mean_su += uniques[t][ci][r];
      }
      mean /= config.replicates;
      mean_su /= config.replicates;
      double ss = 0.0;
      for (double v : values) ss += (v - mean) * (v - mean);
      point.risk_sum = mean;
      point.sample_uniques = mean_su;
      point.replicate_sd =
          config.replicates > 1 ? std::sqrt(ss / (config.replicates - 1)) : 0.0;
      points.push_back(point);
    }
  }
  return points;
}

absl::StatusOr<LinkageResult> RunLinkageExperiment(
    const MicrodataTable& population, const MisclassSpec& misclass,
    const SamplingDesign& design, const LinkageExperimentConfig& config) {
  const KeySpace& keyspace = misclass.keyspace();
  const std::size_t n_pop = population.size();
  if (population.width() != keyspace.num_variables()) {
    return absl::InvalidArgumentError(
        "population width does not match the key space");
  }
  if (config.external_size < 1 || config.external_size > n_pop) {
    return absl::InvalidArgumentError(absl::StrCat(
        "external set size ", config.external_size, " must be in 1..",
        n_pop));
  }
  if (config.replicates < 1) {
    return absl::InvalidArgumentError("replicates must be at least 1");
  }
  std::vector<CellIndex> keys(n_pop);
  std::vector<double> pis(n_pop);
  double mean_pi = 0.0;
  for (std::size_t i = 0; i < n_pop; ++i) {
    keys[i] = population.Key(keyspace, i);
    auto pi = design.PiOrError(keys[i]);
    if (!pi.ok()) return pi.status();
    pis[i] = *pi;
    mean_pi += *pi;
  }
  mean_pi /= static_cast<double>(n_pop);
  auto truth_counts = Tabulate(population, keyspace, CountRole::kPopulationTrue);
  if (!truth_counts.ok()) return truth_counts.status();

  struct KeySums {
    RatioSums phi;  // correct / links
    RatioSums m;    // correct / matched pairs
    RatioSums u;    // (links - correct) / unmatched pairs
    double external = 0.0;  // sum of f_j over replicates
    std::int64_t links = 0;
    std::int64_t correct = 0;
  };
  std::map<CellIndex, KeySums> sums;
  for (const auto& [cell, count] : truth_counts->entries()) sums[cell];
  RatioSums p_sums;
  double total_sample = 0.0;
  double u_theory_den = 0.0;

  const Rng root(config.seed);
  std::vector<CategoryCode> released_codes(keyspace.num_variables());
  std::vector<char> in_external(n_pop);
  std::map<CellIndex, std::int64_t> sample_count, external_count, correct;
  for (int r = 0; r < config.replicates; ++r) {
    const Rng rep = root.Substream(static_cast<std::uint64_t>(r));
    Rng sample_rng = rep.Substream("sample");
    Rng misclass_rng = rep.Substream("misclass");
    Rng external_rng = rep.Substream("external");

    const auto external =
        config.sampler == ExternalSampler::kUniform
            ? external_rng.SampleWithoutReplacement(n_pop, config.external_size)
            : SkewedExternalSample(keys, config.external_size, external_rng);
    std::fill(in_external.begin(), in_external.end(), 0);
    external_count.clear();
    for (std::size_t b : external) {
      in_external[b] = 1;
      ++external_count[keys[b]];
    }

    sample_count.clear();
    correct.clear();
    std::int64_t sample_size = 0;
    std::int64_t matched = 0;
    for (std::size_t i = 0; i < n_pop; ++i) {
      if (!(sample_rng.Uniform() < pis[i])) continue;
      misclass.Misclassify(population.Record(i), released_codes, misclass_rng);
      const CellIndex released = keyspace.EncodeUnchecked(released_codes);
      ++sample_count[released];
      ++sample_size;
      if (in_external[i]) {
        ++matched;
        if (released == keys[i]) ++correct[released];
      }
    }
    const double n_star = static_cast<double>(config.external_size);
    const double pairs = static_cast<double>(sample_size) * n_star;
    p_sums.Add(static_cast<double>(matched), pairs);
    total_sample += static_cast<double>(sample_size);
    u_theory_den += static_cast<double>(sample_size) * n_star - mean_pi * n_star;

    for (auto& [cell, s] : sums) {
      const auto ext = external_count.find(cell);
      const double f_star = ext == external_count.end() ? 0.0 : ext->second;
      const auto smp = sample_count.find(cell);
      const double n_j = smp == sample_count.end() ? 0.0 : smp->second;
      const auto cor = correct.find(cell);
      const double c_j = cor == correct.end() ? 0.0 : cor->second;
      const double links = n_j * f_star;
      s.phi.Add(c_j, links);
      s.m.Add(c_j, static_cast<double>(matched));
      s.u.Add(links - c_j, pairs - static_cast<double>(matched));
      s.external += f_star;
      s.links += static_cast<std::int64_t>(links);
      s.correct += static_cast<std::int64_t>(c_j);
    }
  }

  LinkageResult result;
  const int reps = config.replicates;
  result.mean_sample_size = total_sample / reps;
  result.p_hat = p_sums.Ratio().value_or(0.0);
  result.p_se = p_sums.StandardError(reps);
  result.p_theory =
      result.mean_sample_size > 0.0 ? mean_pi / result.mean_sample_size : 0.0;
  const double n_star = static_cast<double>(config.external_size);
  for (const auto& [cell, s] : sums) {
    LinkageKeyResult key;
    key.cell = cell;
    key.links = s.links;
    key.correct = s.correct;
    key.phi_hat = s.phi.Ratio();
    key.phi_se = s.phi.StandardError(reps);
    const double m_jj = misclass.DiagonalEntry(cell);
    const double f_tilde = ExpectedReleasedCount(misclass, *truth_counts, cell);
    key.theory = f_tilde > 0.0 ? m_jj / f_tilde : 0.0;
    key.m_hat = s.m.Ratio();
    key.m_se = s.m.StandardError(reps);
    const double mean_f = s.external / reps;
    key.m_theory = m_jj * mean_f / n_star;
    key.u_hat = s.u.Ratio();
    key.u_se = s.u.StandardError(reps);
    const double pi_j = design.Pi(cell);
    key.u_theory = u_theory_den > 0.0
                       ? pi_j * (f_tilde - m_jj) * s.external / u_theory_den
                       : 0.0;
    result.total_links += s.links;
    result.total_correct += s.correct;
    result.keys.push_back(key);
  }
  return result;
}

void WriteBinaryCurve(std::ostream& out,
                      const std::vector<BinaryCurvePoint>& points,
                      char delimiter) {
  out << "C" << delimiter << "theta" << delimiter << "risk_sum" << delimiter
      << "n_sample_uniques" << delimiter << "replicate_sd" << '\n';
  for (const auto& p : points) {
    out << p.num_variables << delimiter << Num(p.theta) << delimiter
        << Num(p.risk_sum) << delimiter << Num(p.sample_uniques) << delimiter
        << Num(p.replicate_sd) << '\n';
  }
}

void WriteLinkageResult(std::ostream& out, const LinkageResult& result,
                        char delimiter) {
  out << "key" << delimiter << "links" << delimiter << "correct" << delimiter
      << "phi_hat" << delimiter << "se" << delimiter << "theory" << delimiter
      << "m_hat" << delimiter << "m_se" << delimiter << "m_theory" << delimiter
      << "u_hat" << delimiter << "u_se" << delimiter << "u_theory" << '\n';
  auto opt = [](const std::optional<double>& v) {
    return v ? Num(*v) : std::string("NA");
  };
  for (const auto& k : result.keys) {
    out << ExternalCellLabel(k.cell) << delimiter << k.links << delimiter
        << k.correct << delimiter << opt(k.phi_hat) << delimiter
        << Num(k.phi_se) << delimiter << Num(k.theory) << delimiter
        << opt(k.m_hat) << delimiter << Num(k.m_se) << delimiter
        << Num(k.m_theory) << delimiter << opt(k.u_hat) << delimiter
        << Num(k.u_se) << delimiter << Num(k.u_theory) << '\n';
  }
  out << "# p_hat=" << Num(result.p_hat) << " se=" << Num(result.p_se)
      << " theory=" << Num(result.p_theory)
      << " mean_sample_size=" << Num(result.mean_sample_size) << '\n';
}

}  // namespace sdlrisk
