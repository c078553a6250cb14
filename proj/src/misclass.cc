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

#include "sdlrisk/misclass.h"

#include <algorithm>
#include <cmath>

#include "absl/strings/str_cat.h"

namespace sdlrisk {

absl::Status ValidateRowStochastic(const TransitionMatrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    return absl::InvalidArgumentError(absl::StrCat(
        "transition matrix must be square and non-empty, got ", m.rows(), "x",
        m.cols()));
  }
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    double sum = 0.0;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      if (!(v >= 0.0 && v <= 1.0)) {
        return absl::InvalidArgumentError(absl::StrCat(
            "transition matrix entry (", r + 1, ",", c + 1, ") = ", v,
            " is outside [0, 1]"));
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > kStochasticTolerance) {
      return absl::InvalidArgumentError(absl::StrCat(
          "transition matrix row ", r + 1, " sums to ", sum, ", not 1"));
    }
  }
  return absl::OkStatus();
}

absl::StatusOr<MisclassSpec> MisclassSpec::Create(
    const KeySpace& keyspace, std::vector<MisclassFactor> factors) {
  std::sort(factors.begin(), factors.end(),
            [](const auto& a, const auto& b) { return a.variable < b.variable; });
  MisclassSpec spec = Identity(keyspace);
  for (std::size_t i = 0; i < factors.size(); ++i) {
    const auto& f = factors[i];
    if (f.variable >= keyspace.num_variables()) {
      return absl::InvalidArgumentError(
          absl::StrCat("misclassification factor for unknown variable index ",
                       f.variable));
    }
    const auto& name = keyspace.variable(f.variable).name();
    if (i > 0 && factors[i - 1].variable == f.variable) {
      return absl::InvalidArgumentError(absl::StrCat(
          "variable '", name, "' has more than one misclassification factor"));
    }
    if (f.matrices.empty()) {
      return absl::InvalidArgumentError(
          absl::StrCat("variable '", name, "' has no transition matrix"));
    }
    const int card = keyspace.cardinality(f.variable);
    for (const auto& m : f.matrices) {
      if (m.rows() != card || m.cols() != card) {
        return absl::InvalidArgumentError(absl::StrCat(
            "transition matrix for '", name, "' is ", m.rows(), "x", m.cols(),
            ", expected ", card, "x", card));
      }
      if (auto s = ValidateRowStochastic(m); !s.ok()) {
        return absl::InvalidArgumentError(
            absl::StrCat("variable '", name, "': ", s.message()));
      }
    }
    if (f.given_variable) {
      const std::size_t g = *f.given_variable;
      if (g >= keyspace.num_variables() || g == f.variable) {
        return absl::InvalidArgumentError(absl::StrCat(
            "variable '", name, "' has an invalid conditioning variable"));
      }
      if (f.matrix_for_category.size() !=
          static_cast<std::size_t>(keyspace.cardinality(g))) {
        return absl::InvalidArgumentError(absl::StrCat(
            "variable '", name, "': conditioning map must cover all ",
            keyspace.cardinality(g), " categories of '",
            keyspace.variable(g).name(), "'"));
      }
      for (std::size_t idx : f.matrix_for_category) {
        if (idx >= f.matrices.size()) {
          return absl::InvalidArgumentError(absl::StrCat(
              "variable '", name, "': conditioning map references matrix ",
              idx, " of ", f.matrices.size()));
        }
      }
    } else if (f.matrices.size() != 1) {
      return absl::InvalidArgumentError(absl::StrCat(
          "variable '", name,
          "' has several matrices but no conditioning variable"));
    }
  }
  spec.factors_ = std::move(factors);
  for (std::size_t i = 0; i < spec.factors_.size(); ++i) {
    spec.factor_of_variable_[spec.factors_[i].variable] = static_cast<int>(i);
  }
  return spec;
}

MisclassSpec MisclassSpec::Identity(const KeySpace& keyspace) {
  MisclassSpec spec(keyspace);
  spec.factor_of_variable_.assign(keyspace.num_variables(), -1);
  return spec;
}

const TransitionMatrix* MisclassSpec::MatrixForCodes(
    const MisclassFactor& factor, std::span<const CategoryCode> truth) const {
  if (!factor.given_variable) return &factor.matrices.front();
  return &factor.matrices[factor.matrix_for_category[truth[*factor.given_variable]]];
}

const TransitionMatrix* MisclassSpec::MatrixFor(std::size_t variable,
                                                CellIndex truth) const {
  const int idx = factor_of_variable_[variable];
  if (idx < 0) return nullptr;
  const auto& factor = factors_[idx];
  if (!factor.given_variable) return &factor.matrices.front();
  const CategoryCode given = keyspace_.Component(truth, *factor.given_variable);
  return &factor.matrices[factor.matrix_for_category[given]];
}

double MisclassSpec::CompositeEntry(CellIndex observed, CellIndex truth) const {
  double product = 1.0;
  for (std::size_t v = 0; v < keyspace_.num_variables(); ++v) {
    const CategoryCode obs = keyspace_.Component(observed, v);
    const CategoryCode tru = keyspace_.Component(truth, v);
    const TransitionMatrix* m = MatrixFor(v, truth);
    if (m == nullptr) {
      if (obs != tru) return 0.0;
      continue;
    }
    product *= (*m)(tru, obs);
    if (product == 0.0) return 0.0;
  }
  return product;
}

void MisclassSpec::Misclassify(std::span<const CategoryCode> truth,
                               std::span<CategoryCode> released,
                               Rng& rng) const {
  std::copy(truth.begin(), truth.end(), released.begin());
  for (const auto& factor : factors_) {
    const TransitionMatrix& m = *MatrixForCodes(factor, truth);
    const Eigen::Index row = truth[factor.variable];
    std::span<const double> weights(m.data() + row * m.cols(),
                                    static_cast<std::size_t>(m.cols()));
    released[factor.variable] =
        static_cast<CategoryCode>(rng.Categorical(weights));
  }
}

double ExpectedReleasedCount(const MisclassSpec& spec,
                             const FrequencyTable& truth_counts,
                             CellIndex observed) {
  double total = 0.0;
  for (const auto& [cell, count] : truth_counts.entries()) {
    const double m = spec.CompositeEntry(observed, cell);
    if (m > 0.0) total += static_cast<double>(count) * m;
  }
  return total;
}

MicrodataTable MisclassifyTable(const MicrodataTable& table,
                                const MisclassSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  MicrodataTable out = table;
  std::vector<CategoryCode> released(table.width());
  for (std::size_t i = 0; i < table.size(); ++i) {
    spec.Misclassify(table.Record(i), released, rng);
    for (std::size_t v = 0; v < released.size(); ++v) {
      out.SetCode(i, v, released[v]);
    }
  }
  return out;
}

absl::StatusOr<TransitionMatrix> BinaryThetaMatrix(double theta1,
                                                   double theta2) {
  TransitionMatrix m(2, 2);
  m << 1.0 - theta1, theta1, theta2, 1.0 - theta2;
  if (auto s = ValidateRowStochastic(m); !s.ok()) return s;
  return m;
}

absl::StatusOr<TransitionMatrix> UniformOffDiagonalMatrix(int size,
                                                          double diagonal) {
  if (size < 2) {
    return absl::InvalidArgumentError("matrix size must be at least 2");
  }
  if (!(diagonal >= 0.0 && diagonal <= 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("diagonal must be in [0, 1], got ", diagonal));
  }
  TransitionMatrix m =
      TransitionMatrix::Constant(size, size, (1.0 - diagonal) / (size - 1));
  m.diagonal().setConstant(diagonal);
  return m;
}

}  // namespace sdlrisk
