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


#ifndef SDLRISK_UTILITY_H_
#define SDLRISK_UTILITY_H_

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "sdlrisk/keyspace.h"

namespace sdlrisk {

// Dense R x C frequency grid, row-major.
class TwoWayTable {
 public:
  static absl::StatusOr<TwoWayTable> Create(std::string row_name,
                                            std::string column_name,
                                            std::size_t rows,
                                            std::size_t columns,
                                            std::vector<double> counts);
  // Cross-tabulates two key variables of a microdata table over all their
  // categories.
  static absl::StatusOr<TwoWayTable> FromMicrodata(const MicrodataTable& table,
                                                   const KeySpace& keyspace,
                                                   std::size_t row_variable,
                                                   std::size_t column_variable);

  const std::string& row_name() const { return row_name_; }
  const std::string& column_name() const { return column_name_; }
  std::size_t rows() const { return rows_; }
  std::size_t columns() const { return columns_; }
  double at(std::size_t r, std::size_t c) const {
    return counts_[r * columns_ + c];
  }
  double total() const;
  const std::vector<double>& counts() const { return counts_; }

 private:
  TwoWayTable(std::string row_name, std::string column_name, std::size_t rows,
              std::size_t columns, std::vector<double> counts)
      : row_name_(std::move(row_name)),
        column_name_(std::move(column_name)),
        rows_(rows),
        columns_(columns),
        counts_(std::move(counts)) {}

  std::string row_name_;
  std::string column_name_;
  std::size_t rows_ = 0;
  std::size_t columns_ = 0;
  std::vector<double> counts_;
};

// 100 (D_avg - AAD) / D_avg. 100 means no change.
absl::StatusOr<double> Raad(const TwoWayTable& orig, const TwoWayTable& pert);

// sqrt(chi2 / min(R - 1, C - 1)), without a 1/n factor.
absl::StatusOr<double> CramersV(const TwoWayTable& table);

struct RcvResult {
  double value = 0.0;
  std::size_t dropped_rows = 0;
  std::size_t dropped_columns = 0;
  // Lines with a zero margin in only one table; their cells are skipped in
  // that table's chi-square.
  std::vector<std::string> warnings;
};

// 100 (CV(pert) - CV(orig)) / CV(orig). Rows and columns that are zero in
// both tables are dropped first.
absl::StatusOr<RcvResult> Rcv(const TwoWayTable& orig, const TwoWayTable& pert);

// Between-row variance of the column-c row proportions.
absl::StatusOr<double> BetweenRowVariance(const TwoWayTable& table,
                                          std::size_t column);

// 100 (BV(pert) - BV(orig)) / BV(orig).
absl::StatusOr<double> Bvr(const TwoWayTable& orig, const TwoWayTable& pert,
                           std::size_t column);

struct UtilityMeasures {
  std::string table;  // "row*column"
  double raad = 0.0;
  double rcv = 0.0;
  std::optional<double> bvr;
  std::optional<std::size_t> bvr_column;
  std::vector<std::string> warnings;
};

absl::StatusOr<UtilityMeasures> MeasureUtility(
    const TwoWayTable& orig, const TwoWayTable& pert,
    std::optional<std::size_t> bvr_column = std::nullopt);

struct MapRun {
  std::string label;  // e.g. "T10S"
  double risk = 0.0;  // tau
  double raad = 0.0;
  std::optional<double> rcv;
  std::optional<double> bvr;
};

struct RiskUtilityPoint {
  std::string label;
  double risk = 0.0;
  double loss = 0.0;  // 100 - RAAD
  double raad = 0.0;
  std::optional<double> rcv;
  std::optional<double> bvr;
  bool on_frontier = false;
};

// Points in input order. A point is on the frontier when no other point is
// at most as bad on both risk and loss and strictly better on one.
absl::StatusOr<std::vector<RiskUtilityPoint>> RiskUtilityMap(
    const std::vector<MapRun>& runs);

void WriteUtilityMeasures(std::ostream& out,
                          const std::vector<UtilityMeasures>& measures,
                          char delimiter = ',');
void WriteRiskUtilityMap(std::ostream& out,
                         const std::vector<RiskUtilityPoint>& points,
                         char delimiter = ',');

}  // namespace sdlrisk

#endif  // SDLRISK_UTILITY_H_
