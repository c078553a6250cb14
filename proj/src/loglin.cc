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

#include "sdlrisk/loglin.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "Eigen/Cholesky"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "sdlrisk/report_format.h"
#include "sdlrisk/risk.h"

namespace sdlrisk {
namespace {

constexpr std::uint64_t kMaxFitCells = 50'000'000;

bool TermLess(const ModelTerm& a, const ModelTerm& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

void AddSubsets(const ModelTerm& term, std::set<ModelTerm>& out) {
  const std::size_t m = term.size();
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << m); ++mask) {
    ModelTerm sub;
    for (std::size_t i = 0; i < m; ++i) {
      if (mask & (std::uint64_t{1} << i)) sub.push_back(term[i]);
    }
    out.insert(std::move(sub));
  }
}

// Fills `columns` (size terms + 1) with the active design columns of a cell:
// the intercept and, per term, the parameter of the cell's level when every
// component is a non-reference category, else -1.
void ActiveColumns(const KeySpace& keyspace, const std::vector<ModelTerm>& terms,
                   const std::vector<std::size_t>& offsets,
                   const std::vector<std::vector<std::uint64_t>>& strides,
                   CellIndex cell, std::int32_t* columns) {
  columns[0] = 0;
  for (std::size_t t = 0; t < terms.size(); ++t) {
    std::uint64_t index = 0;
    bool active = true;
    for (std::size_t i = 0; i < terms[t].size(); ++i) {
      const CategoryCode code = keyspace.Component(cell, terms[t][i]);
      if (code == 0) {
        active = false;
        break;
      }
      index += (code - 1) * strides[t][i];
    }
    columns[t + 1] =
        active ? static_cast<std::int32_t>(offsets[t] + index) : -1;
  }
}

double PoissonDeviance(const std::vector<double>& y,
                       const std::vector<double>& mu) {
  double dev = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    if (y[j] > 0.0) {
      dev += 2.0 * (y[j] * std::log(y[j] / mu[j]) - (y[j] - mu[j]));
    } else {
      dev += 2.0 * mu[j];
    }
  }
  return dev;
}

}  // namespace

absl::StatusOr<ModelSpec> ModelSpec::Create(const KeySpace& keyspace,
                                            std::vector<ModelTerm> terms) {
  std::set<ModelTerm> closed;
  for (std::size_t v = 0; v < keyspace.num_variables(); ++v) {
    closed.insert({v});
  }
  for (auto& term : terms) {
    if (term.empty()) return absl::InvalidArgumentError("empty model term");
    std::sort(term.begin(), term.end());
    if (std::adjacent_find(term.begin(), term.end()) != term.end()) {
      return absl::InvalidArgumentError("model term repeats a variable");
    }
    if (term.back() >= keyspace.num_variables()) {
      return absl::InvalidArgumentError("model term variable out of range");
    }
    if (term.size() > 20) {
      return absl::InvalidArgumentError("model term has too many variables");
    }
    AddSubsets(term, closed);
  }
  std::vector<ModelTerm> sorted(closed.begin(), closed.end());
  std::sort(sorted.begin(), sorted.end(), TermLess);
  return ModelSpec(keyspace, std::move(sorted));
}

ModelSpec ModelSpec::MainEffects(const KeySpace& keyspace) {
  return *Create(keyspace, {});
}

ModelSpec ModelSpec::Saturated(const KeySpace& keyspace) {
  ModelTerm all(keyspace.num_variables());
  for (std::size_t v = 0; v < all.size(); ++v) all[v] = v;
  return *Create(keyspace, {all});
}

absl::StatusOr<ModelSpec> ModelSpec::FromNames(
    const KeySpace& keyspace, const std::vector<std::string>& names) {
  std::vector<ModelTerm> terms;
  for (const auto& name : names) {
    ModelTerm term;
    for (const std::string& part :
         std::vector<std::string>(absl::StrSplit(name, '*'))) {
      auto idx = keyspace.VariableIndex(part);
      if (!idx) {
        return absl::InvalidArgumentError(absl::StrCat(
            "model term '", name, "' names unknown variable '", part, "'"));
      }
      term.push_back(*idx);
    }
    terms.push_back(std::move(term));
  }
  return Create(keyspace, std::move(terms));
}

bool ModelSpec::Contains(const ModelTerm& term) const {
  ModelTerm sorted = term;
  std::sort(sorted.begin(), sorted.end());
  return std::find(terms_.begin(), terms_.end(), sorted) != terms_.end();
}

ModelSpec ModelSpec::WithTerm(const ModelTerm& term) const {
  auto terms = terms_;
  terms.push_back(term);
  return *Create(keyspace_, std::move(terms));
}

std::size_t ModelSpec::NumParameters() const {
  std::size_t p = 1;
  for (const auto& term : terms_) {
    std::size_t block = 1;
    for (std::size_t v : term) block *= keyspace_.cardinality(v) - 1;
    p += block;
  }
  return p;
}

std::string ModelSpec::TermName(const ModelTerm& term) const {
  std::vector<std::string> names;
  for (std::size_t v : term) names.push_back(keyspace_.variable(v).name());
  return absl::StrJoin(names, "*");
}

std::string ModelSpec::ToString() const {
  std::vector<std::string> names;
  for (const auto& term : terms_) names.push_back(TermName(term));
  return absl::StrJoin(names, " + ");
}

double FittedModel::PopulationRate(CellIndex cell) const {
  const auto& terms = spec_.terms();
  std::vector<std::int32_t> columns(terms.size() + 1);
  ActiveColumns(spec_.keyspace(), terms, term_offset_, term_stride_, cell,
                columns.data());
  double eta = 0.0;
  for (std::int32_t c : columns) {
    if (c >= 0) eta += beta_(c);
  }
  return std::exp(eta);
}

absl::StatusOr<FittedModel> FitPoisson(const FrequencyTable& counts,
                                       const ModelSpec& spec,
                                       const SamplingDesign& design,
                                       const FitOptions& options) {
  const KeySpace& keyspace = spec.keyspace();
  const std::uint64_t num_cells = keyspace.num_cells();
  if (num_cells > kMaxFitCells) {
    return absl::InvalidArgumentError(absl::StrCat(
        "key space has ", num_cells, " cells; the fitter enumerates at most ",
        kMaxFitCells));
  }
  const auto& terms = spec.terms();
  FittedModel model(spec);
  model.total_count_ = static_cast<double>(counts.total());

  std::size_t p = 1;
  for (const auto& term : terms) {
    model.term_offset_.push_back(p);
    std::vector<std::uint64_t> strides(term.size());
    std::uint64_t stride = 1;
    for (std::size_t i = term.size(); i-- > 0;) {
      strides[i] = stride;
      stride *= keyspace.cardinality(term[i]) - 1;
    }
    model.term_stride_.push_back(std::move(strides));
    p += stride;
  }

  std::vector<double> y(num_cells, 0.0);
  for (const auto& [cell, count] : counts.entries()) {
    if (cell >= num_cells) {
      return absl::OutOfRangeError(absl::StrCat(
          "count for cell ", ExternalCellLabel(cell), " outside the key space"));
    }
    y[cell] = static_cast<double>(count);
  }

  // A zero margin for any level of a term puts the MLE on the boundary.
  for (const auto& term : terms) {
    std::vector<std::uint64_t> strides(term.size());
    std::uint64_t levels = 1;
    for (std::size_t i = term.size(); i-- > 0;) {
      strides[i] = levels;
      levels *= keyspace.cardinality(term[i]);
    }
    std::vector<double> margin(levels, 0.0);
    for (const auto& [cell, count] : counts.entries()) {
      std::uint64_t idx = 0;
      for (std::size_t i = 0; i < term.size(); ++i) {
        idx += keyspace.Component(cell, term[i]) * strides[i];
      }
      margin[idx] += static_cast<double>(count);
    }
    for (std::uint64_t idx = 0; idx < levels; ++idx) {
      if (margin[idx] > 0.0) continue;
      std::vector<std::string> labels;
      for (std::size_t i = 0; i < term.size(); ++i) {
        const auto code = (idx / strides[i]) % keyspace.cardinality(term[i]);
        labels.push_back(keyspace.variable(term[i]).categories()[code]);
      }
      return absl::FailedPreconditionError(absl::StrCat(
          "degenerate design: zero margin for term ", spec.TermName(term),
          " at level ", absl::StrJoin(labels, "|")));
    }
  }

  std::vector<double> offset(num_cells);
  for (CellIndex j = 0; j < num_cells; ++j) {
    auto pi = design.PiOrError(j);
    if (!pi.ok()) return pi.status();
    offset[j] = std::log(*pi);
  }

  const std::size_t width = terms.size() + 1;
  std::vector<std::int32_t> active(num_cells * width);
  for (CellIndex j = 0; j < num_cells; ++j) {
    ActiveColumns(keyspace, terms, model.term_offset_, model.term_stride_, j,
                  &active[j * width]);
  }

  auto accumulate = [&](const std::vector<double>& eta,
                        const std::vector<double>& mu, Eigen::MatrixXd& xtwx,
                        Eigen::VectorXd* xtwz) {
    xtwx.setZero(p, p);
    if (xtwz) xtwz->setZero(p);
    for (CellIndex j = 0; j < num_cells; ++j) {
      const double w = mu[j];
      const std::int32_t* cols = &active[j * width];
      if (xtwz) {
        const double z = (eta[j] - offset[j]) + (y[j] - mu[j]) / mu[j];
        for (std::size_t a = 0; a < width; ++a) {
          if (cols[a] >= 0) (*xtwz)(cols[a]) += w * z;
        }
      }
      for (std::size_t a = 0; a < width; ++a) {
        if (cols[a] < 0) continue;
        for (std::size_t b = a; b < width; ++b) {
          if (cols[b] >= 0) xtwx(cols[a], cols[b]) += w;
        }
      }
    }
    xtwx.triangularView<Eigen::StrictlyLower>() = xtwx.transpose();
  };
  auto predict = [&](const Eigen::VectorXd& beta, std::vector<double>& eta,
                     std::vector<double>& mu) {
    for (CellIndex j = 0; j < num_cells; ++j) {
      double e = offset[j];
      const std::int32_t* cols = &active[j * width];
      for (std::size_t a = 0; a < width; ++a) {
        if (cols[a] >= 0) e += beta(cols[a]);
      }
      eta[j] = e;
      mu[j] = std::exp(e);
    }
  };

  std::vector<double> mu(num_cells), eta(num_cells);
  for (CellIndex j = 0; j < num_cells; ++j) {
    mu[j] = y[j] + 0.1;
    eta[j] = std::log(mu[j]);
  }
  Eigen::MatrixXd xtwx(p, p);
  Eigen::VectorXd xtwz(p);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  std::vector<double> eta_new(num_cells), mu_new(num_cells);
  double deviance = std::numeric_limits<double>::infinity();
  bool converged = false;
  int iter = 0;
  for (; iter < options.max_iterations && !converged; ++iter) {
    accumulate(eta, mu, xtwx, &xtwz);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(xtwx);
    if (ldlt.info() != Eigen::Success) {
      return absl::InternalError("IRLS normal equations are singular");
    }
    Eigen::VectorXd beta_new = ldlt.solve(xtwz);
    predict(beta_new, eta_new, mu_new);
    double dev_new = PoissonDeviance(y, mu_new);
    // Step halving keeps the deviance non-increasing.
    for (int halving = 0;
         iter > 0 && !(dev_new <= deviance) && halving < 40; ++halving) {
      beta_new = 0.5 * (beta_new + beta);
      predict(beta_new, eta_new, mu_new);
      dev_new = PoissonDeviance(y, mu_new);
    }
    if (iter > 0 && !(dev_new <= deviance)) {
      beta_new = beta;
      predict(beta_new, eta_new, mu_new);
      dev_new = deviance;
    }
    double max_change = 0.0;
    for (CellIndex j = 0; j < num_cells; ++j) {
      const double change =
          std::abs(eta_new[j] - eta[j]) / std::max(1.0, std::abs(eta[j]));
      max_change = std::max(max_change, change);
    }
    converged = iter > 0 && max_change <= options.tolerance;
    beta = std::move(beta_new);
    std::swap(eta, eta_new);
    std::swap(mu, mu_new);
    deviance = dev_new;
    model.deviance_trace_.push_back(deviance);
  }
  if (options.trace_sink) *options.trace_sink = model.deviance_trace_;
  if (!converged) {
    return absl::ResourceExhaustedError(absl::StrCat(
        "IRLS did not converge in ", options.max_iterations,
        " iterations; last deviance ", deviance));
  }

  accumulate(eta, mu, xtwx, nullptr);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(xtwx);
  const Eigen::MatrixXd covariance =
      ldlt.solve(Eigen::MatrixXd::Identity(p, p));

  model.beta_ = beta;
  model.deviance_ = deviance;
  model.iterations_ = iter;
  model.df_ = static_cast<std::int64_t>(num_cells) - static_cast<std::int64_t>(p);
  model.coefficients_.push_back(
      {"(intercept)", "", beta(0), std::sqrt(std::max(0.0, covariance(0, 0)))});
  for (std::size_t t = 0; t < terms.size(); ++t) {
    const auto& term = terms[t];
    std::uint64_t block = 1;
    for (std::size_t v : term) block *= keyspace.cardinality(v) - 1;
    for (std::uint64_t idx = 0; idx < block; ++idx) {
      std::vector<std::string> labels;
      for (std::size_t i = 0; i < term.size(); ++i) {
        const auto code =
            1 + (idx / model.term_stride_[t][i]) %
                    (keyspace.cardinality(term[i]) - 1);
        labels.push_back(keyspace.variable(term[i]).categories()[code]);
      }
      const std::size_t col = model.term_offset_[t] + idx;
      model.coefficients_.push_back(
          {spec.TermName(term), absl::StrJoin(labels, "|"), beta(col),
           std::sqrt(std::max(0.0, covariance(col, col)))});
    }
  }
  return model;
}

SearchCriterion BicCriterion() {
  return {"bic", [](const FittedModel& m, const FrequencyTable& counts,
                    const SamplingDesign&) {
            const double n = std::max<double>(1.0, counts.total());
            return m.deviance() +
                   std::log(n) * static_cast<double>(m.num_parameters());
          }};
}

SearchCriterion AicCriterion() {
  return {"aic", [](const FittedModel& m, const FrequencyTable&,
                    const SamplingDesign&) {
            return m.deviance() + 2.0 * static_cast<double>(m.num_parameters());
          }};
}

SearchCriterion UniquesCriterion() {
  return {"uniques", [](const FittedModel& m, const FrequencyTable& counts,
                        const SamplingDesign& design) {
            const auto& keyspace = m.spec().keyspace();
            double expected = 0.0;
            double variance = 0.0;
            for (CellIndex j = 0; j < keyspace.num_cells(); ++j) {
              const double mu = design.Pi(j) * m.PopulationRate(j);
              const double p1 = mu * std::exp(-mu);
              expected += p1;
              variance += p1 * (1.0 - p1);
            }
            double observed = 0.0;
            for (const auto& [cell, count] : counts.entries()) {
              if (count == 1) observed += 1.0;
            }
            return std::abs(observed - expected) /
                   std::sqrt(std::max(variance, 1e-12));
          }};
}

absl::StatusOr<SearchResult> ForwardSearch(const FrequencyTable& counts,
                                           const KeySpace& keyspace,
                                           const SamplingDesign& design,
                                           const SearchCriterion& criterion,
                                           const FitOptions& options) {
  ModelSpec current = ModelSpec::MainEffects(keyspace);
  auto fitted = FitPoisson(counts, current, design, options);
  if (!fitted.ok()) return fitted.status();
  double best = criterion.score(*fitted, counts, design);
  SearchResult result{current, {{"", best}}};
  const std::size_t c = keyspace.num_variables();
  while (true) {
    std::optional<ModelTerm> best_term;
    for (std::size_t a = 0; a < c; ++a) {
      for (std::size_t b = a + 1; b < c; ++b) {
        const ModelTerm term{a, b};
        if (current.Contains(term)) continue;
        auto candidate = FitPoisson(counts, current.WithTerm(term), design,
                                    options);
        if (!candidate.ok()) continue;
        const double score = criterion.score(*candidate, counts, design);
        if (score < best) {
          best = score;
          best_term = term;
        }
      }
    }
    if (!best_term) break;
    current = current.WithTerm(*best_term);
    result.steps.push_back({current.TermName(*best_term), best});
  }
  result.spec = current;
  return result;
}

double ExpectedInverseCountGivenUnique(double mu) {
  if (mu <= 0.0) return 1.0;
  return -std::expm1(-mu) / mu;
}

absl::StatusOr<double> EstimateUniqueRisk(const FittedModel& model,
                                          const SamplingDesign& design,
                                          CellIndex cell) {
  auto pi = design.PiOrError(cell);
  if (!pi.ok()) return pi.status();
  const double mu = (1.0 - *pi) * model.PopulationRate(cell);
  return ExpectedInverseCountGivenUnique(mu);
}

absl::StatusOr<EstimatedAggregate> AdjustedAggregate(
    const FittedModel& model, const MisclassSpec& misclass,
    const SamplingDesign& design, const FrequencyTable& sample_released) {
  EstimatedAggregate out;
  for (CellIndex cell : SampleUniques(sample_released)) {
    auto estimate = EstimateUniqueRisk(model, design, cell);
    if (!estimate.ok()) return estimate.status();
    const double adjusted = misclass.DiagonalEntry(cell) * *estimate;
    out.naive += *estimate;
    out.adjusted += adjusted;
    out.per_record.push_back({cell, *estimate, adjusted});
  }
  return out;
}

void WriteModelReport(std::ostream& out, const FittedModel& model,
                      char delimiter) {
  out << "item" << delimiter << "level" << delimiter << "estimate" << delimiter
      << "standard_error" << '\n';
  out << "model" << delimiter << '"' << model.spec().ToString() << '"'
      << delimiter << delimiter << '\n';
  out << "deviance" << delimiter << delimiter << Num(model.deviance())
      << delimiter << '\n';
  out << "df" << delimiter << delimiter << model.degrees_of_freedom()
      << delimiter << '\n';
  out << "iterations" << delimiter << delimiter << model.iterations()
      << delimiter << '\n';
  for (std::size_t i = 0; i < model.deviance_trace().size(); ++i) {
    out << "deviance_trace" << delimiter << i + 1 << delimiter
        << Num(model.deviance_trace()[i]) << delimiter << '\n';
  }
  for (const auto& c : model.coefficients()) {
    out << '"' << c.term << '"' << delimiter << '"' << c.level << '"'
        << delimiter << Num(c.estimate) << delimiter << Num(c.standard_error)
        << '\n';
  }
}

}  // namespace sdlrisk
