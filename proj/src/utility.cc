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

#include <algorithm>
#include <cmath>
#include <set>

#include "absl/strings/str_cat.h"
#include "sdlrisk/report_format.h"

namespace sdlrisk {
namespace {

absl::Status SameShape(const TwoWayTable& a, const TwoWayTable& b) {
  if (a.rows() != b.rows() || a.columns() != b.columns()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "tables differ in shape: ", a.rows(), "x", a.columns(), " vs ",
        b.rows(), "x", b.columns()));
  }
  return absl::OkStatus();
}

std::vector<double> RowSums(const TwoWayTable& t) {
  std::vector<double> sums(t.rows(), 0.0);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.columns(); ++c) sums[r] += t.at(r, c);
  }
  return sums;
}

std::vector<double> ColumnSums(const TwoWayTable& t) {
  std::vector<double> sums(t.columns(), 0.0);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.columns(); ++c) sums[c] += t.at(r, c);
  }
  return sums;
}

// Pearson chi-square over the kept lines. Cells with zero expected count
// contribute nothing.
double ChiSquare(const TwoWayTable& t, const std::vector<std::size_t>& rows,
                 const std::vector<std::size_t>& cols) {
  std::vector<double> rs(rows.size(), 0.0), cs(cols.size(), 0.0);
  double n = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const double d = t.at(rows[i], cols[k]);
      rs[i] += d;
      cs[k] += d;
      n += d;
    }
  }
  if (n <= 0.0) return 0.0;
  double chi2 = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const double e = rs[i] * cs[k] / n;
      if (e <= 0.0) continue;
      const double diff = t.at(rows[i], cols[k]) - e;
      chi2 += diff * diff / e;
    }
  }
  return chi2;
}

std::vector<std::size_t> AllLines(std::size_t n) {
  std::vector<std::size_t> lines(n);
  for (std::size_t i = 0; i < n; ++i) lines[i] = i;
  return lines;
}

}  // namespace

absl::StatusOr<TwoWayTable> TwoWayTable::Create(std::string row_name,
                                                std::string column_name,
                                                std::size_t rows,
                                                std::size_t columns,
                                                std::vector<double> counts) {
  if (rows < 2 || columns < 2) {
    return absl::InvalidArgumentError("two-way table needs at least 2x2 cells");
  }
  if (counts.size() != rows * columns) {
    return absl::InvalidArgumentError(absl::StrCat(
        "two-way table has ", counts.size(), " counts for ", rows, "x",
        columns, " cells"));
  }
  for (double d : counts) {
    if (!(d >= 0.0) || !std::isfinite(d)) {
      return absl::InvalidArgumentError("two-way table counts must be >= 0");
    }
  }
  return TwoWayTable(std::move(row_name), std::move(column_name), rows,
                     columns, std::move(counts));
}

absl::StatusOr<TwoWayTable> TwoWayTable::FromMicrodata(
    const MicrodataTable& table, const KeySpace& keyspace,
    std::size_t row_variable, std::size_t column_variable) {
  if (row_variable >= keyspace.num_variables() ||
      column_variable >= keyspace.num_variables()) {
    return absl::InvalidArgumentError("two-way table variable out of range");
  }
  if (row_variable == column_variable) {
    return absl::InvalidArgumentError(
        "two-way table needs two distinct variables");
  }
  const std::size_t rows = keyspace.cardinality(row_variable);
  const std::size_t cols = keyspace.cardinality(column_variable);
  std::vector<double> counts(rows * cols, 0.0);
  for (std::size_t i = 0; i < table.size(); ++i) {
    counts[table.Code(i, row_variable) * cols +
           table.Code(i, column_variable)] += 1.0;
  }
  return Create(keyspace.variable(row_variable).name(),
                keyspace.variable(column_variable).name(), rows, cols,
                std::move(counts));
}

double TwoWayTable::total() const {
  double sum = 0.0;
  for (double d : counts_) sum += d;
  return sum;
}

absl::StatusOr<double> Raad(const TwoWayTable& orig, const TwoWayTable& pert) {
  if (auto s = SameShape(orig, pert); !s.ok()) return s;
  const double cells = static_cast<double>(orig.rows() * orig.columns());
  const double d_avg = orig.total() / cells;
  if (d_avg <= 0.0) {
    return absl::InvalidArgumentError("RAAD undefined: original table is empty");
  }
  double abs_diff = 0.0;
  for (std::size_t i = 0; i < orig.counts().size(); ++i) {
    abs_diff += std::abs(pert.counts()[i] - orig.counts()[i]);
  }
  const double aad = abs_diff / cells;
  return 100.0 * ((d_avg - aad) / d_avg);
}

absl::StatusOr<double> CramersV(const TwoWayTable& table) {
  const auto rows = AllLines(table.rows());
  const auto cols = AllLines(table.columns());
  const double dim =
      static_cast<double>(std::min(table.rows(), table.columns()) - 1);
  return std::sqrt(ChiSquare(table, rows, cols) / dim);
}

absl::StatusOr<RcvResult> Rcv(const TwoWayTable& orig,
                              const TwoWayTable& pert) {
  if (auto s = SameShape(orig, pert); !s.ok()) return s;
  RcvResult result;
  const auto orig_rows = RowSums(orig), pert_rows = RowSums(pert);
  const auto orig_cols = ColumnSums(orig), pert_cols = ColumnSums(pert);
  auto keep = [&](const std::vector<double>& a, const std::vector<double>& b,
                  std::string_view kind, std::size_t* dropped) {
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] == 0.0 && b[i] == 0.0) {
        ++*dropped;
        continue;
      }
      if (a[i] == 0.0 || b[i] == 0.0) {
        result.warnings.push_back(absl::StrCat(
            std::string(kind), " ", i + 1, " is zero in the ",
            a[i] == 0.0 ? "original" : "perturbed",
            " table only; chi-square rests on a small margin"));
      }
      kept.push_back(i);
    }
    return kept;
  };
  const auto rows = keep(orig_rows, pert_rows, "row", &result.dropped_rows);
  const auto cols =
      keep(orig_cols, pert_cols, "column", &result.dropped_columns);
  if (rows.size() < 2 || cols.size() < 2) {
    return absl::InvalidArgumentError(
        "RCV undefined: fewer than two non-empty rows or columns");
  }
  const double dim = static_cast<double>(std::min(rows.size(), cols.size()) - 1);
  const double cv_orig = std::sqrt(ChiSquare(orig, rows, cols) / dim);
  const double cv_pert = std::sqrt(ChiSquare(pert, rows, cols) / dim);
  if (cv_orig == 0.0) {
    return absl::InvalidArgumentError(
        "RCV undefined: original table shows perfect independence");
  }
  result.value = 100.0 * (cv_pert - cv_orig) / cv_orig;
  return result;
}

absl::StatusOr<double> BetweenRowVariance(const TwoWayTable& table,
                                          std::size_t column) {
  if (column >= table.columns()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "BVR column ", column + 1, " out of range 1..", table.columns()));
  }
  const auto row_sums = RowSums(table);
  double col_total = 0.0;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    if (row_sums[r] <= 0.0) {
      return absl::InvalidArgumentError(
          absl::StrCat("BVR undefined: row ", r + 1, " has zero total"));
    }
    col_total += table.at(r, column);
  }
  const double overall = col_total / table.total();
  double bv = 0.0;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const double diff = table.at(r, column) / row_sums[r] - overall;
    bv += diff * diff;
  }
  return bv / static_cast<double>(table.rows() - 1);
}

absl::StatusOr<double> Bvr(const TwoWayTable& orig, const TwoWayTable& pert,
                           std::size_t column) {
  if (auto s = SameShape(orig, pert); !s.ok()) return s;
  auto bv_orig = BetweenRowVariance(orig, column);
  if (!bv_orig.ok()) return bv_orig.status();
  auto bv_pert = BetweenRowVariance(pert, column);
  if (!bv_pert.ok()) return bv_pert.status();
  if (*bv_orig == 0.0) {
    return absl::InvalidArgumentError(
        "BVR undefined: no between-row variation in the original table");
  }
  return 100.0 * (*bv_pert - *bv_orig) / *bv_orig;
}

absl::StatusOr<UtilityMeasures> MeasureUtility(
    const TwoWayTable& orig, const TwoWayTable& pert,
    std::optional<std::size_t> bvr_column) {
  UtilityMeasures m;
  m.table = absl::StrCat(orig.row_name(), "*", orig.column_name());
  auto raad = Raad(orig, pert);
  if (!raad.ok()) return raad.status();
  m.raad = *raad;
  auto rcv = Rcv(orig, pert);
  if (!rcv.ok()) return rcv.status();
  m.rcv = rcv->value;
  m.warnings = rcv->warnings;
  if (bvr_column) {
    auto bvr = Bvr(orig, pert, *bvr_column);
    if (!bvr.ok()) return bvr.status();
    m.bvr = *bvr;
    m.bvr_column = bvr_column;
  }
  return m;
}

absl::StatusOr<std::vector<RiskUtilityPoint>> RiskUtilityMap(
    const std::vector<MapRun>& runs) {
  if (runs.empty()) return absl::InvalidArgumentError("risk-utility map: no runs");
  std::set<std::string> labels;
  std::vector<RiskUtilityPoint> points;
  for (const auto& run : runs) {
    if (!labels.insert(run.label).second) {
      return absl::InvalidArgumentError(
          absl::StrCat("duplicate map label '", run.label, "'"));
    }
    points.push_back({run.label, run.risk, 100.0 - run.raad, run.raad,
                      run.rcv, run.bvr, false});
  }
  for (auto& p : points) {
    p.on_frontier = std::none_of(
        points.begin(), points.end(), [&p](const RiskUtilityPoint& q) {
          return q.risk <= p.risk && q.loss <= p.loss &&
                 (q.risk < p.risk || q.loss < p.loss);
        });
  }
  return points;
}

void WriteUtilityMeasures(std::ostream& out,
                          const std::vector<UtilityMeasures>& measures,
                          char delimiter) {
  out << "table" << delimiter << "raad" << delimiter << "rcv" << delimiter
      << "bvr_column" << delimiter << "bvr" << '\n';
  for (const auto& m : measures) {
    out << m.table << delimiter << Num(m.raad) << delimiter << Num(m.rcv)
        << delimiter;
    if (m.bvr_column) out << *m.bvr_column + 1;
    out << delimiter;
    if (m.bvr) out << Num(*m.bvr);
    out << '\n';
  }
}

void WriteRiskUtilityMap(std::ostream& out,
                         const std::vector<RiskUtilityPoint>& points,
                         char delimiter) {
  out << "label" << delimiter << "tau" << delimiter << "loss" << delimiter
      << "raad" << delimiter << "rcv" << delimiter << "bvr" << delimiter
      << "frontier" << '\n';
  for (const auto& p : points) {
    out << p.label << delimiter << Num(p.risk) << delimiter << Num(p.loss)
        << delimiter << Num(p.raad) << delimiter;
    if (p.rcv) out << Num(*p.rcv);
    out << delimiter;
    if (p.bvr) out << Num(*p.bvr);
    out << delimiter << (p.on_frontier ? 1 : 0) << '\n';
  }
}

}  // namespace sdlrisk
