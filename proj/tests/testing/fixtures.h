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


#ifndef SDLRISK_TESTS_TESTING_FIXTURES_H_
#define SDLRISK_TESTS_TESTING_FIXTURES_H_

#include <cmath>
#include <cstdint>
#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "Eigen/Core"
#include "sdlrisk/keyspace.h"
#include "sdlrisk/misclass.h"
#include "sdlrisk/rng.h"

namespace sdlrisk::testing {

inline KeySpace MakeKeySpace(const std::vector<int>& cardinalities) {
  std::vector<CategoricalVariable> vars;
  for (std::size_t v = 0; v < cardinalities.size(); ++v) {
    vars.push_back(*CategoricalVariable::WithNumericLabels(
        "V" + std::to_string(v), cardinalities[v]));
  }
  return *KeySpace::Create(std::move(vars));
}

// Draws `n` records with cell probabilities proportional to exp of a sum of
// per-variable effects (independence model).
inline MicrodataTable DrawIndependent(
    const KeySpace& ks, std::size_t n,
    const std::vector<std::vector<double>>& effects, Rng& rng) {
  std::vector<double> w(ks.num_cells());
  for (CellIndex j = 0; j < ks.num_cells(); ++j) {
    double e = 0.0;
    for (std::size_t v = 0; v < ks.num_variables(); ++v) {
      e += effects[v][ks.Component(j, v)];
    }
    w[j] = std::exp(e);
  }
  std::vector<CategoryCode> codes;
  codes.reserve(n * ks.num_variables());
  for (std::size_t i = 0; i < n; ++i) {
    auto c = ks.Decode(rng.Categorical(w));
    codes.insert(codes.end(), c.begin(), c.end());
  }
  return *MicrodataTable::Create(ks, std::move(codes));
}

// Effects decreasing in the category code, with small random jitter.
inline std::vector<std::vector<double>> DecreasingEffects(
    const KeySpace& ks, double slope, Rng& rng) {
  std::vector<std::vector<double>> out(ks.num_variables());
  for (std::size_t v = 0; v < ks.num_variables(); ++v) {
    for (int c = 0; c < ks.cardinality(v); ++c) {
      out[v].push_back(-slope * c + 0.3 * (rng.Uniform() - 0.5));
    }
  }
  return out;
}

// Dense K x K composite, entry (observed, truth), built directly from the
// factor list.
inline Eigen::MatrixXd DenseComposite(const MisclassSpec& spec) {
  const KeySpace& ks = spec.keyspace();
  const auto k = static_cast<Eigen::Index>(ks.num_cells());
  Eigen::MatrixXd m(k, k);
  for (Eigen::Index obs = 0; obs < k; ++obs) {
    const auto o = ks.Decode(obs);
    for (Eigen::Index tru = 0; tru < k; ++tru) {
      const auto t = ks.Decode(tru);
      double p = 1.0;
      for (std::size_t v = 0; v < ks.num_variables(); ++v) {
        const MisclassFactor* factor = nullptr;
        for (const auto& f : spec.factors()) {
          if (f.variable == v) factor = &f;
        }
        if (factor == nullptr) {
          p *= (o[v] == t[v]) ? 1.0 : 0.0;
          continue;
        }
        std::size_t which = 0;
        if (factor->given_variable) {
          which = factor->matrix_for_category[t[*factor->given_variable]];
        }
        p *= factor->matrices[which](t[v], o[v]);
      }
      m(obs, tru) = p;
    }
  }
  return m;
}

inline std::vector<double> CountsByCell(const KeySpace& ks,
                                        const MicrodataTable& table) {
  std::vector<double> out(ks.num_cells(), 0.0);
  for (std::size_t i = 0; i < table.size(); ++i) out[table.Key(ks, i)] += 1.0;
  return out;
}

inline double Spearman(const std::vector<double>& x,
                       const std::vector<double>& y) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t t = i; t <= j; ++t) r[idx[t]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace sdlrisk::testing

#endif  // SDLRISK_TESTS_TESTING_FIXTURES_H_
