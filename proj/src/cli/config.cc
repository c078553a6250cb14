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


#include <fstream>
#include <sstream>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "sdlrisk/cli.h"
#include "sdlrisk/microdata_io.h"
#include "sdlrisk/rng.h"

namespace sdlrisk::cli {
namespace {

using nlohmann::json;

absl::Status ConfigError(std::string_view where, absl::string_view what) {
  return absl::InvalidArgumentError(
      absl::StrCat("config: ", std::string(where), ": ", what));
}

absl::StatusOr<double> GetNumber(const json& node, const std::string& key,
                                 std::string_view where) {
  if (!node.contains(key)) return ConfigError(where, "missing '" + key + "'");
  if (!node[key].is_number()) {
    return ConfigError(where, "'" + key + "' must be a number");
  }
  return node[key].get<double>();
}

absl::StatusOr<std::string> GetString(const json& node, const std::string& key,
                                      std::string_view where) {
  if (!node.contains(key)) return ConfigError(where, "missing '" + key + "'");
  if (!node[key].is_string()) {
    return ConfigError(where, "'" + key + "' must be a string");
  }
  return node[key].get<std::string>();
}

absl::StatusOr<std::size_t> GetVariable(const KeySpace& keyspace,
                                        const json& node,
                                        const std::string& key,
                                        std::string_view where) {
  auto name = GetString(node, key, where);
  if (!name.ok()) return name.status();
  auto idx = keyspace.VariableIndex(*name);
  if (!idx) {
    return ConfigError(where, "unknown variable '" + *name + "'");
  }
  return *idx;
}

absl::StatusOr<TransitionMatrix> ParseMatrix(const json& node,
                                             std::size_t size,
                                             std::string_view where) {
  if (!node.is_array() || node.size() != size) {
    return ConfigError(where, absl::StrCat("matrix must have ", size, " rows"));
  }
  TransitionMatrix m(size, size);
  for (std::size_t r = 0; r < size; ++r) {
    if (!node[r].is_array() || node[r].size() != size) {
      return ConfigError(where,
                         absl::StrCat("matrix row ", r + 1, " must have ",
                                      size, " entries"));
    }
    for (std::size_t c = 0; c < size; ++c) {
      if (!node[r][c].is_number()) {
        return ConfigError(where, "matrix entries must be numbers");
      }
      m(r, c) = node[r][c].get<double>();
    }
  }
  if (auto s = ValidateRowStochastic(m); !s.ok()) {
    return ConfigError(where, s.message());
  }
  return m;
}

json MatrixToJson(const TransitionMatrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

// "matrix": [[...]] or "diagonal": d with the rest spread evenly.
absl::StatusOr<TransitionMatrix> ParseMatrixOrDiagonal(const json& node,
                                                       int size,
                                                       std::string_view where) {
  if (node.contains("matrix")) return ParseMatrix(node["matrix"], size, where);
  if (node.contains("diagonal")) {
    auto d = GetNumber(node, "diagonal", where);
    if (!d.ok()) return d.status();
    auto m = UniformOffDiagonalMatrix(size, *d);
    if (!m.ok()) return ConfigError(where, m.status().message());
    return m;
  }
  return ConfigError(where, "needs 'matrix' or 'diagonal'");
}

absl::StatusOr<MisclassFactor> ParseFactor(const KeySpace& keyspace,
                                           const json& node) {
  const std::string where = "misclassification.factors";
  MisclassFactor factor;
  auto var = GetVariable(keyspace, node, "variable", where);
  if (!var.ok()) return var.status();
  factor.variable = *var;
  const int size = keyspace.cardinality(*var);
  if (!node.contains("given")) {
    auto m = ParseMatrixOrDiagonal(node, size, where);
    if (!m.ok()) return m.status();
    factor.matrices.push_back(std::move(*m));
    return factor;
  }
  auto given = GetVariable(keyspace, node, "given", where);
  if (!given.ok()) return given.status();
  factor.given_variable = *given;
  if (!node.contains("matrices") || !node["matrices"].is_object()) {
    return ConfigError(where, "conditional factor needs a 'matrices' object");
  }
  const auto& given_var = keyspace.variable(*given);
  // Categories without a matrix share the default, identity unless given.
  TransitionMatrix fallback = TransitionMatrix::Identity(size, size);
  if (node.contains("default")) {
    auto m = ParseMatrix(node["default"], size, where);
    if (!m.ok()) return m.status();
    fallback = std::move(*m);
  }
  factor.matrices.push_back(std::move(fallback));
  factor.matrix_for_category.assign(given_var.cardinality(), 0);
  for (const auto& [label, matrix] : node["matrices"].items()) {
    auto code = given_var.CodeOf(label);
    if (!code) {
      return ConfigError(where, "unknown category '" + label + "' of '" +
                                    given_var.name() + "'");
    }
    auto m = ParseMatrix(matrix, size, where);
    if (!m.ok()) return m.status();
    factor.matrix_for_category[*code] = factor.matrices.size();
    factor.matrices.push_back(std::move(*m));
  }
  return factor;
}

absl::StatusOr<MisclassSpec> PresetFromPlan(const RunConfig& config,
                                            const std::string& preset) {
  const KeySpace& keyspace = *config.keyspace;
  if (!config.doc.contains("perturbation")) {
    return ConfigError("misclassification",
                       "preset '" + preset + "' needs a 'perturbation' plan");
  }
  auto plan = ParsePerturbation(keyspace, config.doc["perturbation"]);
  if (!plan.ok()) return plan.status();
  auto table = ReadInput(config, "original");
  if (!table.ok()) return table.status();
  if (plan->targeting) {
    auto grouped = AssignTargetGroups(*table, keyspace, *plan->targeting);
    if (!grouped.ok()) return grouped.status();
    *table = std::move(*grouped);
  }
  const TargetingRule* rule = plan->targeting ? &*plan->targeting : nullptr;
  if (preset == "swap") {
    if (plan->method != PerturbationConfig::Method::kSwap) {
      return ConfigError("misclassification",
                         "preset 'swap' needs a swap perturbation plan");
    }
    auto matrices = SwapMisclassMatrices(*table, keyspace, plan->swap);
    if (!matrices.ok()) return matrices.status();
    return SingleVariableSpec(keyspace, plan->swap.swap_variable, *matrices,
                              rule);
  }
  if (plan->method != PerturbationConfig::Method::kPram) {
    return ConfigError("misclassification",
                       "preset 'pram-invariant' needs a PRAM perturbation plan");
  }
  auto matrices = PramMatrices(*table, keyspace, plan->pram);
  if (!matrices.ok()) return matrices.status();
  return SingleVariableSpec(keyspace, plan->pram.variable, *matrices, rule);
}

}  // namespace

absl::StatusOr<KeySpace> ParseKeySpace(const json& node) {
  const std::string where = "keyspace";
  if (!node.is_object() || !node.contains("variables") ||
      !node["variables"].is_array()) {
    return ConfigError(where, "needs a 'variables' array");
  }
  std::vector<CategoricalVariable> variables;
  for (const auto& v : node["variables"]) {
    auto name = GetString(v, "name", where);
    if (!name.ok()) return name.status();
    absl::StatusOr<CategoricalVariable> var;
    if (v.contains("categories")) {
      if (!v["categories"].is_array()) {
        return ConfigError(where, "'categories' must be an array");
      }
      std::vector<std::string> labels;
      for (const auto& c : v["categories"]) {
        labels.push_back(c.is_string() ? c.get<std::string>() : c.dump());
      }
      var = CategoricalVariable::Create(*name, std::move(labels));
    } else if (v.contains("cardinality") && v["cardinality"].is_number_integer()) {
      var = CategoricalVariable::WithNumericLabels(*name,
                                                   v["cardinality"].get<int>());
    } else {
      return ConfigError(where, "variable '" + *name +
                                    "' needs 'categories' or 'cardinality'");
    }
    if (!var.ok()) return ConfigError(where, var.status().message());
    variables.push_back(std::move(*var));
  }
  auto keyspace = KeySpace::Create(std::move(variables));
  if (!keyspace.ok()) return ConfigError(where, keyspace.status().message());
  return keyspace;
}

absl::StatusOr<RunConfig> ParseConfig(const std::string& text,
                                      const std::filesystem::path& base_dir,
                                      const Overrides& overrides) {
  RunConfig config;
  try {
    config.doc = json::parse(text);
  } catch (const json::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrCat("config: not valid JSON: ", e.what()));
  }
  if (!config.doc.is_object()) {
    return absl::InvalidArgumentError("config: top level must be an object");
  }
  json& doc = config.doc;
  if (overrides.seed) doc["seed"] = *overrides.seed;
  if (overrides.out) doc["out"] = *overrides.out;
  if (overrides.format) doc["format"] = *overrides.format;
  if (overrides.digits) doc["digits"] = *overrides.digits;
  if (overrides.rate) doc["perturbation"]["rate"] = *overrides.rate;
  if (overrides.alpha) doc["perturbation"]["alpha"] = *overrides.alpha;

  config.base_dir = base_dir;
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) {
      return ConfigError("seed", "must be a non-negative integer");
    }
    config.seed = doc["seed"].get<std::uint64_t>();
  }
  const std::string format = doc.value("format", "csv");
  if (format == "csv") {
    config.delimiter = ',';
    config.extension = "csv";
  } else if (format == "tsv") {
    config.delimiter = '\t';
    config.extension = "tsv";
  } else {
    return ConfigError("format", "must be 'csv' or 'tsv', got '" + format + "'");
  }
  if (doc.contains("digits")) {
    if (!doc["digits"].is_number_integer() || doc["digits"].get<int>() < 1 ||
        doc["digits"].get<int>() > 17) {
      return ConfigError("digits", "must be an integer in 1..17");
    }
    config.digits = doc["digits"].get<int>();
  }
  const std::string out = doc.value("out", "out");
  config.out_dir = ResolvePath(config, out);
  if (doc.contains("keyspace")) {
    auto keyspace = ParseKeySpace(doc["keyspace"]);
    if (!keyspace.ok()) return keyspace.status();
    config.keyspace = std::move(*keyspace);
  }
  config.hash = Fnv1a64(doc.dump());
  return config;
}

absl::StatusOr<RunConfig> LoadConfig(const std::filesystem::path& path,
                                     const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) {
    return absl::NotFoundError(
        absl::StrCat("config: cannot open '", path.string(), "'"));
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return ParseConfig(buffer.str(), path.parent_path(), overrides);
}

std::filesystem::path ResolvePath(const RunConfig& config,
                                  const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_absolute() || config.base_dir.empty()) return p;
  return config.base_dir / p;
}

bool HasInput(const RunConfig& config, const std::string& key) {
  return config.doc.contains("inputs") && config.doc["inputs"].is_object() &&
         config.doc["inputs"].contains(key);
}

absl::StatusOr<MicrodataTable> ReadInput(const RunConfig& config,
                                         const std::string& key) {
  if (!config.keyspace) return ConfigError("keyspace", "missing");
  if (!HasInput(config, key)) {
    return ConfigError("inputs", "missing '" + key + "'");
  }
  const auto& node = config.doc["inputs"][key];
  if (!node.is_string()) {
    return ConfigError("inputs", "'" + key + "' must be a path");
  }
  const auto path = ResolvePath(config, node.get<std::string>());
  const char delimiter = path.extension() == ".tsv" ? '\t' : ',';
  auto table = ReadMicrodataFile(path.string(), *config.keyspace, delimiter);
  if (!table.ok()) {
    return absl::Status(table.status().code(),
                        absl::StrCat("inputs.", key, ": ",
                                     table.status().message()));
  }
  return table;
}

absl::StatusOr<PerturbationConfig> ParsePerturbation(const KeySpace& keyspace,
                                                     const json& node) {
  const std::string where = "perturbation";
  PerturbationConfig config;
  auto method = GetString(node, "method", where);
  if (!method.ok()) return method.status();
  auto var = GetVariable(keyspace, node, "variable", where);
  if (!var.ok()) return var.status();

  if (node.contains("targeting")) {
    const auto& t = node["targeting"];
    TargetingRule rule;
    auto tv = GetVariable(keyspace, t, "variable", "perturbation.targeting");
    if (!tv.ok()) return tv.status();
    rule.variable = *tv;
    if (!t.contains("groups") || !t["groups"].is_object()) {
      return ConfigError("perturbation.targeting", "needs a 'groups' object");
    }
    for (const auto& [category, group] : t["groups"].items()) {
      if (!keyspace.variable(*tv).CodeOf(category)) {
        return ConfigError("perturbation.targeting",
                           "unknown category '" + category + "'");
      }
      if (!group.is_string()) {
        return ConfigError("perturbation.targeting",
                           "group labels must be strings");
      }
      rule.group_of_category[category] = group.get<std::string>();
    }
    config.targeting = std::move(rule);
  }

  auto group_map = [&](const std::string& key)
      -> absl::StatusOr<std::map<std::string, double>> {
    std::map<std::string, double> out;
    if (!node.contains(key)) return out;
    if (!node[key].is_object()) {
      return ConfigError(where, "'" + key + "' must be an object");
    }
    for (const auto& [group, v] : node[key].items()) {
      if (!v.is_number()) {
        return ConfigError(where, "'" + key + "' values must be numbers");
      }
      out[group] = v.get<double>();
    }
    return out;
  };

  if (*method == "swap") {
    config.method = PerturbationConfig::Method::kSwap;
    SwapPlan& plan = config.swap;
    plan.swap_variable = *var;
    auto rates = group_map("group_rates");
    if (!rates.ok()) return rates.status();
    auto diagonals = group_map("group_diagonal");
    if (!diagonals.ok()) return diagonals.status();
    plan.group_rates = std::move(*rates);
    plan.group_diagonal = std::move(*diagonals);
    if (plan.group_rates.empty()) {
      plan.mode = SwapMode::kRandom;
      auto rate = GetNumber(node, "rate", where);
      if (!rate.ok()) return rate.status();
      plan.rate = *rate;
    } else {
      plan.mode = SwapMode::kTargeted;
      if (!config.targeting) {
        return ConfigError(where, "'group_rates' needs a 'targeting' rule");
      }
    }
    plan.within_control_strata = node.value("within_control_strata", false);
    if (node.contains("diagonal")) {
      auto d = GetNumber(node, "diagonal", where);
      if (!d.ok()) return d.status();
      plan.diagonal = *d;
    }
  } else if (*method == "pram") {
    config.method = PerturbationConfig::Method::kPram;
    PramPlan& plan = config.pram;
    plan.variable = *var;
    const int size = keyspace.cardinality(*var);
    if (node.contains("groups")) {
      if (!config.targeting) {
        return ConfigError(where, "'groups' needs a 'targeting' rule");
      }
      for (const auto& [group, g] : node["groups"].items()) {
        auto m = ParseMatrixOrDiagonal(g, size, "perturbation.groups." + group);
        if (!m.ok()) return m.status();
        GroupPram gp;
        gp.base = std::move(*m);
        gp.alpha = g.value("alpha", node.value("alpha", 1.0));
        plan.group_plans.emplace(group, std::move(gp));
      }
    } else {
      auto m = ParseMatrixOrDiagonal(node, size, where);
      if (!m.ok()) return m.status();
      plan.base = std::move(*m);
    }
    plan.alpha = node.value("alpha", 1.0);
  } else {
    return ConfigError(where, "method must be 'swap' or 'pram', got '" +
                                  *method + "'");
  }
  return config;
}

absl::StatusOr<MisclassSpec> ParseMisclassification(const RunConfig& config,
                                                    const json& node) {
  if (!config.keyspace) return ConfigError("keyspace", "missing");
  const KeySpace& keyspace = *config.keyspace;
  const std::string where = "misclassification";
  if (node.is_null()) return MisclassSpec::Identity(keyspace);
  if (!node.is_object()) return ConfigError(where, "must be an object");
  if (node.contains("file")) {
    auto file = GetString(node, "file", where);
    if (!file.ok()) return file.status();
    const auto path = ResolvePath(config, *file);
    std::ifstream in(path);
    if (!in) {
      return absl::NotFoundError(
          absl::StrCat("misclassification file '", path.string(),
                       "' cannot be opened"));
    }
    json inner;
    try {
      inner = json::parse(in);
    } catch (const json::exception& e) {
      return ConfigError(where, absl::StrCat("file is not valid JSON: ", e.what()));
    }
    return ParseMisclassification(config, inner);
  }
  if (node.contains("preset")) {
    auto preset = GetString(node, "preset", where);
    if (!preset.ok()) return preset.status();
    if (*preset == "swap" || *preset == "pram-invariant") {
      return PresetFromPlan(config, *preset);
    }
    if (*preset != "binary-theta") {
      return ConfigError(where, "unknown preset '" + *preset + "'");
    }
    auto theta = GetNumber(node, "theta", where);
    if (!theta.ok()) return theta.status();
    auto p = GetNumber(node, "p", where);
    if (!p.ok()) return p.status();
    if (!(*p > 0.0 && *p < 1.0)) return ConfigError(where, "p must be in (0, 1)");
    auto m = BinaryThetaMatrix(*theta, (1.0 - *p) * *theta / *p);
    if (!m.ok()) return ConfigError(where, m.status().message());
    std::vector<MisclassFactor> factors;
    std::vector<std::size_t> vars;
    if (node.contains("variables")) {
      for (const auto& name : node["variables"]) {
        auto idx = keyspace.VariableIndex(name.get<std::string>());
        if (!idx) return ConfigError(where, "unknown variable " + name.dump());
        vars.push_back(*idx);
      }
    } else {
      for (std::size_t v = 0; v < keyspace.num_variables(); ++v) vars.push_back(v);
    }
    for (std::size_t v : vars) {
      if (keyspace.cardinality(v) != 2) {
        return ConfigError(where, "binary-theta needs binary variables; '" +
                                      keyspace.variable(v).name() +
                                      "' is not");
      }
      MisclassFactor f;
      f.variable = v;
      f.matrices.push_back(*m);
      factors.push_back(std::move(f));
    }
    auto spec = MisclassSpec::Create(keyspace, std::move(factors));
    if (!spec.ok()) return ConfigError(where, spec.status().message());
    return spec;
  }
  std::vector<MisclassFactor> factors;
  if (node.contains("factors")) {
    if (!node["factors"].is_array()) {
      return ConfigError(where, "'factors' must be an array");
    }
    for (const auto& f : node["factors"]) {
      auto factor = ParseFactor(keyspace, f);
      if (!factor.ok()) return factor.status();
      factors.push_back(std::move(*factor));
    }
  }
  auto spec = MisclassSpec::Create(keyspace, std::move(factors));
  if (!spec.ok()) return ConfigError(where, spec.status().message());
  return spec;
}

json MisclassToJson(const MisclassSpec& spec) {
  const KeySpace& keyspace = spec.keyspace();
  json factors = json::array();
  for (const auto& f : spec.factors()) {
    json node;
    node["variable"] = keyspace.variable(f.variable).name();
    if (!f.given_variable) {
      node["matrix"] = MatrixToJson(f.matrices.front());
    } else {
      const auto& given = keyspace.variable(*f.given_variable);
      node["given"] = given.name();
      json matrices = json::object();
      for (int c = 0; c < given.cardinality(); ++c) {
        matrices[given.categories()[c]] =
            MatrixToJson(f.matrices[f.matrix_for_category[c]]);
      }
      node["matrices"] = matrices;
    }
    factors.push_back(node);
  }
  return json{{"factors", factors}};
}

absl::StatusOr<SamplingDesign> ParseSamplingDesign(const KeySpace& keyspace,
                                                   const json& node) {
  const std::string where = "sampling";
  if (!node.is_object()) return ConfigError(where, "missing");
  if (node.contains("pi")) {
    auto pi = GetNumber(node, "pi", where);
    if (!pi.ok()) return pi.status();
    auto design = SamplingDesign::Global(*pi);
    if (!design.ok()) return ConfigError(where, design.status().message());
    return design;
  }
  if (node.contains("pi_by_cell") && node["pi_by_cell"].is_object()) {
    std::vector<std::pair<CellIndex, double>> pis;
    for (const auto& [label, value] : node["pi_by_cell"].items()) {
      // Labels join category labels with '|', as in report files.
      std::vector<CategoryCode> codes;
      std::size_t start = 0;
      for (std::size_t v = 0; v < keyspace.num_variables(); ++v) {
        const std::size_t end = v + 1 == keyspace.num_variables()
                                    ? label.size()
                                    : label.find('|', start);
        if (end == std::string::npos) {
          return ConfigError(where, "cell '" + label + "' has too few parts");
        }
        auto code =
            keyspace.variable(v).CodeOf(label.substr(start, end - start));
        if (!code) {
          return ConfigError(where, "cell '" + label + "' has an unknown label");
        }
        codes.push_back(*code);
        start = end + 1;
      }
      if (!value.is_number()) {
        return ConfigError(where, "pi values must be numbers");
      }
      pis.emplace_back(keyspace.EncodeUnchecked(codes), value.get<double>());
    }
    auto design = SamplingDesign::PerCell(std::move(pis));
    if (!design.ok()) return ConfigError(where, design.status().message());
    return design;
  }
  return ConfigError(where, "needs 'pi' or a 'pi_by_cell' object");
}

}  // namespace sdlrisk::cli
