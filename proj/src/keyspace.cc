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

#include "sdlrisk/keyspace.h"

#include <algorithm>
#include <limits>
#include <unordered_map>
#include <unordered_set>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "sdlrisk/rng.h"

namespace sdlrisk {

absl::StatusOr<CategoricalVariable> CategoricalVariable::Create(
    std::string name, std::vector<std::string> categories) {
  if (name.empty()) {
    return absl::InvalidArgumentError("variable name must not be empty");
  }
  if (categories.size() < 2) {
    return absl::InvalidArgumentError(absl::StrCat(
        "variable '", name, "' needs at least 2 categories, got ",
        categories.size()));
  }
  std::unordered_set<std::string> seen;
  for (const auto& label : categories) {
    if (!seen.insert(label).second) {
      return absl::InvalidArgumentError(absl::StrCat(
          "variable '", name, "' has duplicate category label '", label, "'"));
    }
  }
  return CategoricalVariable(std::move(name), std::move(categories));
}

absl::StatusOr<CategoricalVariable> CategoricalVariable::WithNumericLabels(
    std::string name, int cardinality) {
  std::vector<std::string> labels;
  for (int i = 1; i <= cardinality; ++i) labels.push_back(absl::StrCat(i));
  return Create(std::move(name), std::move(labels));
}

std::optional<CategoryCode> CategoricalVariable::CodeOf(
    std::string_view label) const {
  for (std::size_t i = 0; i < categories_.size(); ++i) {
    if (categories_[i] == label) return static_cast<CategoryCode>(i);
  }
  return std::nullopt;
}

KeySpace::KeySpace(std::vector<CategoricalVariable> variables)
    : variables_(std::move(variables)), strides_(variables_.size()) {
  std::uint64_t stride = 1;
  for (std::size_t i = variables_.size(); i-- > 0;) {
    strides_[i] = stride;
    stride *= static_cast<std::uint64_t>(variables_[i].cardinality());
  }
  num_cells_ = stride;
}

absl::StatusOr<KeySpace> KeySpace::Create(
    std::vector<CategoricalVariable> variables) {
  if (variables.empty()) {
    return absl::InvalidArgumentError("key space needs at least one variable");
  }
  std::unordered_set<std::string> names;
  std::uint64_t cells = 1;
  for (const auto& v : variables) {
    if (!names.insert(v.name()).second) {
      return absl::InvalidArgumentError(
          absl::StrCat("duplicate variable name '", v.name(), "'"));
    }
    const auto card = static_cast<std::uint64_t>(v.cardinality());
    if (cells > std::numeric_limits<std::uint64_t>::max() / card) {
      return absl::InvalidArgumentError(
          "number of key cells overflows 64 bits");
    }
    cells *= card;
  }
  return KeySpace(std::move(variables));
}

std::optional<std::size_t> KeySpace::VariableIndex(
    std::string_view name) const {
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    if (variables_[i].name() == name) return i;
  }
  return std::nullopt;
}

absl::StatusOr<CellIndex> KeySpace::Encode(
    std::span<const CategoryCode> codes) const {
  if (codes.size() != variables_.size()) {
    return absl::InvalidArgumentError(
        absl::StrCat("expected ", variables_.size(), " key values, got ",
                     codes.size()));
  }
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] >= static_cast<CategoryCode>(variables_[i].cardinality())) {
      return absl::OutOfRangeError(absl::StrCat(
          "category code ", codes[i], " out of range for variable '",
          variables_[i].name(), "'"));
    }
  }
  return EncodeUnchecked(codes);
}

CellIndex KeySpace::EncodeUnchecked(std::span<const CategoryCode> codes) const {
  CellIndex cell = 0;
  for (std::size_t i = 0; i < codes.size(); ++i) cell += codes[i] * strides_[i];
  return cell;
}

std::vector<CategoryCode> KeySpace::Decode(CellIndex cell) const {
  std::vector<CategoryCode> codes(variables_.size());
  for (std::size_t i = 0; i < codes.size(); ++i) codes[i] = Component(cell, i);
  return codes;
}

std::string KeySpace::CellLabel(CellIndex cell) const {
  std::vector<std::string> parts;
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    parts.push_back(variables_[i].categories()[Component(cell, i)]);
  }
  return absl::StrJoin(parts, "|");
}

absl::StatusOr<MicrodataTable> MicrodataTable::Create(
    const KeySpace& keyspace, std::vector<CategoryCode> codes,
    RecordAnnotations annotations) {
  const std::size_t width = keyspace.num_variables();
  if (codes.size() % width != 0) {
    return absl::InvalidArgumentError(
        "code vector length is not a multiple of the number of key variables");
  }
  const std::size_t rows = codes.size() / width;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t v = 0; v < width; ++v) {
      if (codes[r * width + v] >=
          static_cast<CategoryCode>(keyspace.cardinality(v))) {
        return absl::OutOfRangeError(absl::StrCat(
            "record ", r + 1, ": code ", codes[r * width + v],
            " out of range for variable '", keyspace.variable(v).name(), "'"));
      }
    }
  }
  auto check_column = [rows](const std::vector<std::string>& column,
                             std::string_view name) -> absl::Status {
    if (!column.empty() && column.size() != rows) {
      return absl::InvalidArgumentError(absl::StrCat(
          std::string(name), " column has ", column.size(), " entries for ", rows,
          " records"));
    }
    return absl::OkStatus();
  };
  if (auto s = check_column(annotations.record_id, "record_id"); !s.ok()) {
    return s;
  }
  if (auto s = check_column(annotations.target_group, "target_group");
      !s.ok()) {
    return s;
  }
  if (auto s = check_column(annotations.control_stratum, "control_stratum");
      !s.ok()) {
    return s;
  }
  MicrodataTable table;
  table.width_ = width;
  table.codes_ = std::move(codes);
  table.annotations_ = std::move(annotations);
  return table;
}

std::string MicrodataTable::RecordId(std::size_t i) const {
  if (has_record_id()) return annotations_.record_id[i];
  return absl::StrCat(i + 1);
}

MicrodataTable MicrodataTable::Subset(std::span<const std::size_t> rows) const {
  MicrodataTable out;
  out.width_ = width_;
  out.codes_.reserve(rows.size() * width_);
  auto pick = [&rows](const std::vector<std::string>& from,
                      std::vector<std::string>& to) {
    if (from.empty()) return;
    to.reserve(rows.size());
    for (std::size_t r : rows) to.push_back(from[r]);
  };
  for (std::size_t r : rows) {
    auto rec = Record(r);
    out.codes_.insert(out.codes_.end(), rec.begin(), rec.end());
  }
  pick(annotations_.record_id, out.annotations_.record_id);
  pick(annotations_.target_group, out.annotations_.target_group);
  pick(annotations_.control_stratum, out.annotations_.control_stratum);
  return out;
}

std::string_view CountRoleName(CountRole role) {
  switch (role) {
    case CountRole::kSampleTrue:
      return "sample-true";
    case CountRole::kSamplePerturbed:
      return "sample-perturbed";
    case CountRole::kPopulationTrue:
      return "population-true";
    case CountRole::kPopulationPerturbed:
      return "population-perturbed";
  }
  return "unknown";
}

absl::StatusOr<FrequencyTable> FrequencyTable::FromEntries(
    CountRole role, std::vector<Entry> entries) {
  std::sort(entries.begin(), entries.end());
  FrequencyTable table;
  table.role_ = role;
  for (const auto& [cell, count] : entries) {
    if (count < 0) {
      return absl::InvalidArgumentError(
          absl::StrCat("negative count ", count, " for cell ",
                       ExternalCellLabel(cell)));
    }
    if (count == 0) continue;
    if (!table.entries_.empty() && table.entries_.back().first == cell) {
      table.entries_.back().second += count;
    } else {
      table.entries_.emplace_back(cell, count);
    }
    table.total_ += count;
  }
  return table;
}

std::int64_t FrequencyTable::Count(CellIndex cell) const {
  auto it = std::lower_bound(
      entries_.begin(), entries_.end(), cell,
      [](const Entry& e, CellIndex c) { return e.first < c; });
  if (it == entries_.end() || it->first != cell) return 0;
  return it->second;
}

absl::StatusOr<FrequencyTable> Tabulate(const MicrodataTable& table,
                                        const KeySpace& keyspace,
                                        CountRole role) {
  if (!table.empty() && table.width() != keyspace.num_variables()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "table has ", table.width(), " key columns, key space has ",
        keyspace.num_variables()));
  }
  std::unordered_map<CellIndex, std::int64_t> counts;
  for (std::size_t i = 0; i < table.size(); ++i) {
    auto cell = keyspace.Encode(table.Record(i));
    if (!cell.ok()) {
      return absl::OutOfRangeError(absl::StrCat(
          "record ", table.RecordId(i), ": ", cell.status().message()));
    }
    ++counts[*cell];
  }
  return FrequencyTable::FromEntries(
      role, std::vector<FrequencyTable::Entry>(counts.begin(), counts.end()));
}

absl::StatusOr<SamplingDesign> SamplingDesign::Global(double pi) {
  if (!(pi > 0.0 && pi <= 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("inclusion probability must be in (0, 1], got ", pi));
  }
  SamplingDesign design;
  design.global_ = pi;
  return design;
}

absl::StatusOr<SamplingDesign> SamplingDesign::PerCell(
    std::vector<std::pair<CellIndex, double>> pis) {
  std::sort(pis.begin(), pis.end());
  for (std::size_t i = 0; i < pis.size(); ++i) {
    if (!(pis[i].second > 0.0 && pis[i].second <= 1.0)) {
      return absl::InvalidArgumentError(absl::StrCat(
          "inclusion probability for cell ", ExternalCellLabel(pis[i].first),
          " must be in (0, 1], got ", pis[i].second));
    }
    if (i > 0 && pis[i].first == pis[i - 1].first) {
      return absl::InvalidArgumentError(absl::StrCat(
          "duplicate inclusion probability for cell ",
          ExternalCellLabel(pis[i].first)));
    }
  }
  SamplingDesign design;
  design.per_cell_ = std::move(pis);
  return design;
}

bool SamplingDesign::Covers(CellIndex cell) const {
  if (global_) return true;
  return std::binary_search(
      per_cell_.begin(), per_cell_.end(), std::pair<CellIndex, double>{cell, 0},
      [](const auto& a, const auto& b) { return a.first < b.first; });
}

double SamplingDesign::Pi(CellIndex cell) const {
  if (global_) return *global_;
  auto it = std::lower_bound(
      per_cell_.begin(), per_cell_.end(), cell,
      [](const auto& e, CellIndex c) { return e.first < c; });
  return it->second;
}

absl::StatusOr<double> SamplingDesign::PiOrError(CellIndex cell) const {
  if (!Covers(cell)) {
    return absl::NotFoundError(absl::StrCat(
        "no inclusion probability for cell ", ExternalCellLabel(cell)));
  }
  return Pi(cell);
}

absl::StatusOr<MicrodataTable> BernoulliSample(const MicrodataTable& population,
                                               const KeySpace& keyspace,
                                               const SamplingDesign& design,
                                               std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < population.size(); ++i) {
    const CellIndex cell = population.Key(keyspace, i);
    auto pi = design.PiOrError(cell);
    if (!pi.ok()) return pi.status();
    if (rng.Bernoulli(*pi)) kept.push_back(i);
  }
  return population.Subset(kept);
}

}  // namespace sdlrisk
