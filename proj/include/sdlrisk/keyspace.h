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

#ifndef SDLRISK_KEYSPACE_H_
#define SDLRISK_KEYSPACE_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace sdlrisk {

// Cells and categories are 0-based in the C++ API. Files and reports use
// 1-based cell labels (see ExternalCellLabel).
using CellIndex = std::uint64_t;
using CategoryCode = std::uint32_t;

inline std::uint64_t ExternalCellLabel(CellIndex cell) { return cell + 1; }

class CategoricalVariable {
 public:
  // Requires at least two categories with unique labels.
  static absl::StatusOr<CategoricalVariable> Create(
      std::string name, std::vector<std::string> categories);

  // Variable with categories labelled "1", ..., "cardinality".
  static absl::StatusOr<CategoricalVariable> WithNumericLabels(
      std::string name, int cardinality);

  const std::string& name() const { return name_; }
  const std::vector<std::string>& categories() const { return categories_; }
  int cardinality() const { return static_cast<int>(categories_.size()); }
  std::optional<CategoryCode> CodeOf(std::string_view label) const;

 private:
  CategoricalVariable(std::string name, std::vector<std::string> categories)
      : name_(std::move(name)), categories_(std::move(categories)) {}

  std::string name_;
  std::vector<std::string> categories_;
};

// Cross-classification of the key variables. Cells are enumerated in
// mixed-radix order with the first variable most significant.
class KeySpace {
 public:
  static absl::StatusOr<KeySpace> Create(
      std::vector<CategoricalVariable> variables);

  std::size_t num_variables() const { return variables_.size(); }
  const CategoricalVariable& variable(std::size_t i) const {
    return variables_[i];
  }
  const std::vector<CategoricalVariable>& variables() const {
    return variables_;
  }
  std::uint64_t num_cells() const { return num_cells_; }
  int cardinality(std::size_t i) const { return variables_[i].cardinality(); }

  std::optional<std::size_t> VariableIndex(std::string_view name) const;

  absl::StatusOr<CellIndex> Encode(std::span<const CategoryCode> codes) const;
  // Caller guarantees codes.size() == num_variables() and codes in range.
  CellIndex EncodeUnchecked(std::span<const CategoryCode> codes) const;
  std::vector<CategoryCode> Decode(CellIndex cell) const;
  CategoryCode Component(CellIndex cell, std::size_t variable) const {
    return static_cast<CategoryCode>((cell / strides_[variable]) %
                                     variables_[variable].cardinality());
  }
  bool Contains(CellIndex cell) const { return cell < num_cells_; }

  // "label1|label2|..." for reports.
  std::string CellLabel(CellIndex cell) const;

 private:
  explicit KeySpace(std::vector<CategoricalVariable> variables);

  std::vector<CategoricalVariable> variables_;
  std::vector<std::uint64_t> strides_;
  std::uint64_t num_cells_ = 1;
};

// Record-level key data. Codes are stored row-major, one row per record.
// The optional columns are either empty or have one entry per record.
struct RecordAnnotations {
  std::vector<std::string> record_id;
  std::vector<std::string> target_group;
  std::vector<std::string> control_stratum;
};

class MicrodataTable {
 public:
  MicrodataTable() = default;

  static absl::StatusOr<MicrodataTable> Create(
      const KeySpace& keyspace, std::vector<CategoryCode> codes,
      RecordAnnotations annotations = {});

  std::size_t size() const { return width_ == 0 ? 0 : codes_.size() / width_; }
  bool empty() const { return size() == 0; }
  std::size_t width() const { return width_; }

  std::span<const CategoryCode> Record(std::size_t i) const {
    return {codes_.data() + i * width_, width_};
  }
  CategoryCode Code(std::size_t i, std::size_t variable) const {
    return codes_[i * width_ + variable];
  }
  // Unchecked; callers keep codes inside the keyspace.
  void SetCode(std::size_t i, std::size_t variable, CategoryCode code) {
    codes_[i * width_ + variable] = code;
  }
  const std::vector<CategoryCode>& codes() const { return codes_; }

  bool has_record_id() const { return !annotations_.record_id.empty(); }
  bool has_target_group() const { return !annotations_.target_group.empty(); }
  bool has_control_stratum() const {
    return !annotations_.control_stratum.empty();
  }
  // Supplied identifier, or the 1-based row number when none was supplied.
  std::string RecordId(std::size_t i) const;
  const std::string& TargetGroup(std::size_t i) const {
    return annotations_.target_group[i];
  }
  const std::string& ControlStratum(std::size_t i) const {
    return annotations_.control_stratum[i];
  }
  const RecordAnnotations& annotations() const { return annotations_; }

  CellIndex Key(const KeySpace& keyspace, std::size_t i) const {
    return keyspace.EncodeUnchecked(Record(i));
  }

  // Rows at the given positions, annotations included.
  MicrodataTable Subset(std::span<const std::size_t> rows) const;

 private:
  std::size_t width_ = 0;
  std::vector<CategoryCode> codes_;
  RecordAnnotations annotations_;
};

enum class CountRole {
  kSampleTrue,
  kSamplePerturbed,
  kPopulationTrue,
  kPopulationPerturbed,
};

std::string_view CountRoleName(CountRole role);

// Sparse cell counts. Entries are kept sorted by cell with zero counts
// removed, so iteration order is deterministic.
class FrequencyTable {
 public:
  using Entry = std::pair<CellIndex, std::int64_t>;

  FrequencyTable() = default;

  // Duplicate cells are summed; negative counts are rejected.
  static absl::StatusOr<FrequencyTable> FromEntries(CountRole role,
                                                    std::vector<Entry> entries);

  CountRole role() const { return role_; }
  std::int64_t total() const { return total_; }
  std::int64_t Count(CellIndex cell) const;
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t support_size() const { return entries_.size(); }

 private:
  CountRole role_ = CountRole::kSampleTrue;
  std::int64_t total_ = 0;
  std::vector<Entry> entries_;
};

absl::StatusOr<FrequencyTable> Tabulate(const MicrodataTable& table,
                                        const KeySpace& keyspace,
                                        CountRole role);

// Inclusion probabilities, either one global value or per cell.
class SamplingDesign {
 public:
  static absl::StatusOr<SamplingDesign> Global(double pi);
  static absl::StatusOr<SamplingDesign> PerCell(
      std::vector<std::pair<CellIndex, double>> pis);

  bool is_global() const { return global_.has_value(); }
  bool Covers(CellIndex cell) const;
  // Precondition: Covers(cell).
  double Pi(CellIndex cell) const;
  absl::StatusOr<double> PiOrError(CellIndex cell) const;

 private:
  std::optional<double> global_;
  std::vector<std::pair<CellIndex, double>> per_cell_;  // sorted by cell
};

// Keeps each record independently with probability pi of its key. Records
// are visited in order, one uniform draw each.
absl::StatusOr<MicrodataTable> BernoulliSample(const MicrodataTable& population,
                                               const KeySpace& keyspace,
                                               const SamplingDesign& design,
                                               std::uint64_t seed);

}  // namespace sdlrisk

#endif  // SDLRISK_KEYSPACE_H_
