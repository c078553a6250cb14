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

#ifndef SDLRISK_MISCLASS_H_
#define SDLRISK_MISCLASS_H_

#include <optional>
#include <span>
#include <vector>

#include "Eigen/Core"
#include "absl/status/statusor.h"
#include "sdlrisk/keyspace.h"
#include "sdlrisk/rng.h"

namespace sdlrisk {

// Square transition matrix stored row = true category, column = released
// category. Every row sums to one.
using TransitionMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kStochasticTolerance = 1e-12;

// OK when every entry is in [0, 1] and every row sums to 1 within
// kStochasticTolerance.
absl::Status ValidateRowStochastic(const TransitionMatrix& m);

// Misclassification of one key variable. With no conditioning variable a
// single matrix applies to every record. With a conditioning variable u, the
// matrix is selected by the record's true category of u
// (matrix_for_category[true u]); this expresses designs such as swapping
// geography at different rates for different ethnic groups.
struct MisclassFactor {
  std::size_t variable = 0;
  std::optional<std::size_t> given_variable;
  std::vector<TransitionMatrix> matrices;
  std::vector<std::size_t> matrix_for_category;
};

// Per-variable factored misclassification mechanism. The implied K x K
// matrix in released-given-true orientation,
//   M(j, k) = Pr(released cell j | true cell k),
// is the product over variables of factor entries and is never formed.
// Variables without a factor are unperturbed.
class MisclassSpec {
 public:
  static absl::StatusOr<MisclassSpec> Create(const KeySpace& keyspace,
                                             std::vector<MisclassFactor> factors);
  static MisclassSpec Identity(const KeySpace& keyspace);

  const KeySpace& keyspace() const { return keyspace_; }
  const std::vector<MisclassFactor>& factors() const { return factors_; }
  bool is_identity() const { return factors_.empty(); }

  // M(observed, truth) as above.
  double CompositeEntry(CellIndex observed, CellIndex truth) const;
  double DiagonalEntry(CellIndex cell) const {
    return CompositeEntry(cell, cell);
  }

  // Factor matrix governing `variable` for a record whose true cell is
  // `truth`, or nullptr when the variable is unperturbed.
  const TransitionMatrix* MatrixFor(std::size_t variable,
                                    CellIndex truth) const;

  // Draws released codes for one record. Variables are processed in index
  // order with one uniform per perturbed variable.
  void Misclassify(std::span<const CategoryCode> truth,
                   std::span<CategoryCode> released, Rng& rng) const;

 private:
  explicit MisclassSpec(KeySpace keyspace) : keyspace_(std::move(keyspace)) {}

  const TransitionMatrix* MatrixForCodes(const MisclassFactor& factor,
                                         std::span<const CategoryCode> truth)
      const;

  KeySpace keyspace_;
  std::vector<MisclassFactor> factors_;  // sorted by variable
  std::vector<int> factor_of_variable_;  // -1 when unperturbed
};

// Sum over the support of `truth_counts` of F_k M(j, k): the expected number
// of units released with key j.
double ExpectedReleasedCount(const MisclassSpec& spec,
                             const FrequencyTable& truth_counts,
                             CellIndex observed);

// Applies the mechanism independently to every record.
MicrodataTable MisclassifyTable(const MicrodataTable& table,
                                const MisclassSpec& spec, std::uint64_t seed);

// 2 x 2 factor for a binary variable: Pr(1 -> 2) = theta1,
// Pr(2 -> 1) = theta2.
absl::StatusOr<TransitionMatrix> BinaryThetaMatrix(double theta1,
                                                   double theta2);

// Matrix with `diagonal` on the diagonal and the remainder spread evenly over
// the other categories.
absl::StatusOr<TransitionMatrix> UniformOffDiagonalMatrix(int size,
                                                          double diagonal);

}  // namespace sdlrisk

#endif  // SDLRISK_MISCLASS_H_
