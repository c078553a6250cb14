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
#include <functional>
#include <sstream>

#include "CLI11.hpp"
#include "absl/strings/str_cat.h"
#include "absl/strings/match.h"
#include "sdlrisk/cli.h"
#include "sdlrisk/linksim.h"
#include "sdlrisk/loglin.h"
#include "sdlrisk/microdata_io.h"
#include "sdlrisk/report_format.h"
#include "sdlrisk/risk.h"
#include "sdlrisk/rng.h"
#include "sdlrisk/utility.h"

namespace sdlrisk::cli {
namespace {

using nlohmann::json;

int ExitCodeFor(const absl::Status& status) {
  if (status.ok()) return kExitOk;
  if (absl::StartsWith(status.message(), "config:")) return kExitConfigError;
  switch (status.code()) {
    case absl::StatusCode::kFailedPrecondition:
    case absl::StatusCode::kResourceExhausted:
    case absl::StatusCode::kInternal:
      return kExitNumericalError;
    default:
      return kExitDataError;
  }
}

absl::Status ConfigError(std::string_view where, absl::string_view what) {
  return absl::InvalidArgumentError(
      absl::StrCat("config: ", std::string(where), ": ", what));
}

absl::StatusOr<std::uint64_t> StageSeed(const RunConfig& config,
                                        std::string_view stage) {
  if (!config.seed) {
    return ConfigError("seed", absl::StrCat("required for '",
                                            std::string(stage), "'"));
  }
  return Rng(*config.seed).Substream(stage).seed();
}

const KeySpace* RequireKeySpace(const RunConfig& config, absl::Status* status) {
  if (!config.keyspace) {
    *status = ConfigError("keyspace", "missing");
    return nullptr;
  }
  return &*config.keyspace;
}

json Section(const RunConfig& config, const std::string& key) {
  return config.doc.contains(key) ? config.doc[key] : json();
}

// Writes <out>/<stem>.<ext>: provenance line, then the body. JSON files get
// no line; their body carries a "provenance" field instead.
class OutputWriter {
 public:
  OutputWriter(const RunConfig& config, CommandResult& result)
      : config_(config), result_(result) {}

  absl::Status Write(const std::string& stem,
                     const std::function<void(std::ostream&)>& body,
                     const std::string& extension = "") {
    std::error_code ec;
    std::filesystem::create_directories(config_.out_dir, ec);
    if (ec) {
      return absl::InvalidArgumentError(absl::StrCat(
          "config: out: cannot create '", config_.out_dir.string(),
          "': ", ec.message()));
    }
    const auto path =
        config_.out_dir /
        (stem + "." + (extension.empty() ? config_.extension : extension));
    std::ostringstream buffer;
    if (extension != "json") buffer << Provenance() << '\n';
    body(buffer);
    std::ofstream out(path, std::ios::binary);
    out << buffer.str();
    if (!out) {
      return absl::DataLossError(
          absl::StrCat("cannot write '", path.string(), "'"));
    }
    result_.outputs.push_back(path);
    return absl::OkStatus();
  }

  std::string Provenance() const {
    return ProvenanceLine({config_.hash, config_.seed});
  }

 private:
  const RunConfig& config_;
  CommandResult& result_;
};

absl::Status WriteMisclassSidecar(OutputWriter& writer,
                                  const MisclassSpec& spec) {
  json doc = MisclassToJson(spec);
  doc["provenance"] = writer.Provenance().substr(2);
  return writer.Write(
      "misclass",
      [&](std::ostream& out) { out << doc.dump(2) << '\n'; }, "json");
}

// ---- perturb ---------------------------------------------------------------

absl::Status Perturb(const RunConfig& config, CommandResult& result) {
  absl::Status status;
  const KeySpace* keyspace = RequireKeySpace(config, &status);
  if (!keyspace) return status;
  if (!config.doc.contains("perturbation")) {
    return ConfigError("perturbation", "missing");
  }
  auto plan = ParsePerturbation(*keyspace, config.doc["perturbation"]);
  if (!plan.ok()) return plan.status();
  auto seed = StageSeed(config, "perturb");
  if (!seed.ok()) return seed.status();
  auto table = ReadInput(config, "original");
  if (!table.ok()) return table.status();
  if (plan->targeting) {
    auto grouped = AssignTargetGroups(*table, *keyspace, *plan->targeting);
    if (!grouped.ok()) return grouped.status();
    *table = std::move(*grouped);
  }
  const TargetingRule* rule = plan->targeting ? &*plan->targeting : nullptr;
  OutputWriter writer(config, result);
  const char d = config.delimiter;

  if (plan->method == PerturbationConfig::Method::kSwap) {
    auto swapped = ApplySwap(*table, *keyspace, plan->swap, *seed);
    if (!swapped.ok()) return swapped.status();
    auto matrices = SwapMisclassMatrices(*table, *keyspace, plan->swap);
    if (!matrices.ok()) return matrices.status();
    auto spec = SingleVariableSpec(*keyspace, plan->swap.swap_variable,
                                   *matrices, rule);
    if (!spec.ok()) return spec.status();
    if (auto s = writer.Write("perturbed", [&](std::ostream& out) {
          WriteMicrodata(out, swapped->table, *keyspace, d);
        });
        !s.ok()) {
      return s;
    }
    if (auto s = writer.Write("swap_log", [&](std::ostream& out) {
          WriteSwapLog(out, swapped->log, *table, *keyspace,
                       plan->swap.swap_variable, d);
        });
        !s.ok()) {
      return s;
    }
    return WriteMisclassSidecar(writer, *spec);
  }

  auto prammed = ApplyPram(*table, *keyspace, plan->pram, *seed);
  if (!prammed.ok()) return prammed.status();
  auto spec = SingleVariableSpec(*keyspace, plan->pram.variable,
                                 prammed->matrices, rule);
  if (!spec.ok()) return spec.status();
  if (auto s = writer.Write("perturbed", [&](std::ostream& out) {
        WriteMicrodata(out, prammed->table, *keyspace, d);
      });
      !s.ok()) {
    return s;
  }
  const auto& var = keyspace->variable(plan->pram.variable);
  if (auto s = writer.Write("pram_matrices", [&](std::ostream& out) {
        out << "group" << d << "from" << d << "to" << d << "probability"
            << '\n';
        for (const auto& [group, m] : prammed->matrices) {
          for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
              out << EscapeField(group, d) << d
                  << EscapeField(var.categories()[r], d) << d
                  << EscapeField(var.categories()[c], d) << d << Num(m(r, c))
                  << '\n';
            }
          }
        }
      });
      !s.ok()) {
    return s;
  }
  return WriteMisclassSidecar(writer, *spec);
}

// ---- assess ----------------------------------------------------------------

bool NeedsPopulationTrue(RiskFormula f) {
  return f == RiskFormula::kExact || f == RiskFormula::kSmallDelta26 ||
         f == RiskFormula::kSmallDelta27;
}

bool NeedsSampleTrue(RiskFormula f) {
  return f == RiskFormula::kKnownInSample || f == RiskFormula::kGouweleeuw;
}

absl::StatusOr<std::vector<RiskFormula>> ParseFormulas(const json& risk) {
  std::vector<RiskFormula> formulas;
  if (!risk.is_object() || !risk.contains("formulas")) {
    return std::vector<RiskFormula>{RiskFormula::kExact};
  }
  if (!risk["formulas"].is_array()) {
    return ConfigError("risk.formulas", "must be an array");
  }
  for (const auto& id : risk["formulas"]) {
    if (!id.is_string()) return ConfigError("risk.formulas", "ids are strings");
    auto f = ParseFormulaId(id.get<std::string>());
    if (!f.ok()) return ConfigError("risk.formulas", f.status().message());
    formulas.push_back(*f);
  }
  return formulas;
}

absl::Status Assess(const RunConfig& config, CommandResult& result) {
  absl::Status status;
  const KeySpace* keyspace = RequireKeySpace(config, &status);
  if (!keyspace) return status;
  const json risk = Section(config, "risk");
  auto formulas = ParseFormulas(risk);
  if (!formulas.ok()) return formulas.status();
  const std::string source =
      risk.is_object() ? risk.value("released_population", "observed")
                       : "observed";
  if (source != "observed" && source != "expected") {
    return ConfigError("risk.released_population",
                       "must be 'observed' or 'expected'");
  }
  for (RiskFormula f : *formulas) {
    if (NeedsPopulationTrue(f) && !HasInput(config, "population_true")) {
      return ConfigError(
          "inputs", absl::StrCat("formula '", std::string(FormulaId(f)),
                                 "' needs true population counts "
                                 "(inputs.population_true); without them use "
                                 "the 'estimate' command"));
    }
    if (NeedsSampleTrue(f) && !HasInput(config, "sample_true")) {
      return ConfigError(
          "inputs", absl::StrCat("formula '", std::string(FormulaId(f)),
                                 "' needs the pre-perturbation sample "
                                 "(inputs.sample_true)"));
    }
    if (f == RiskFormula::kGh && !HasInput(config, "population_true") &&
        !HasInput(config, "population_released")) {
      return ConfigError("inputs",
                         "formula 'gh' needs inputs.population_released or "
                         "inputs.population_true");
    }
  }
  auto misclass =
      ParseMisclassification(config, Section(config, "misclassification"));
  if (!misclass.ok()) return misclass.status();
  auto design = ParseSamplingDesign(*keyspace, Section(config, "sampling"));
  if (!design.ok()) return design.status();
  auto released = ReadInput(config, "sample_released");
  if (!released.ok()) return released.status();
  auto f_released = Tabulate(*released, *keyspace, CountRole::kSamplePerturbed);
  if (!f_released.ok()) return f_released.status();

  RiskInputs in{*misclass, *design, std::nullopt, std::nullopt, std::nullopt,
                *f_released, {}, {}};
  if (HasInput(config, "population_true")) {
    auto pop = ReadInput(config, "population_true");
    if (!pop.ok()) return pop.status();
    auto counts = Tabulate(*pop, *keyspace, CountRole::kPopulationTrue);
    if (!counts.ok()) return counts.status();
    in.population_true = std::move(*counts);
  }
  if (source == "observed" && HasInput(config, "population_released")) {
    auto pop = ReadInput(config, "population_released");
    if (!pop.ok()) return pop.status();
    auto counts = Tabulate(*pop, *keyspace, CountRole::kPopulationPerturbed);
    if (!counts.ok()) return counts.status();
    in.population_released = std::move(*counts);
  }
  if (HasInput(config, "sample_true")) {
    auto truth = ReadInput(config, "sample_true");
    if (!truth.ok()) return truth.status();
    auto counts = Tabulate(*truth, *keyspace, CountRole::kSampleTrue);
    if (!counts.ok()) return counts.status();
    in.sample_true = std::move(*counts);
    // Records align by record_id when both files carry one, else by row.
    if (truth->has_record_id() && released->has_record_id()) {
      std::map<std::string, std::size_t> row_of;
      for (std::size_t i = 0; i < truth->size(); ++i) {
        row_of[truth->RecordId(i)] = i;
      }
      for (std::size_t i = 0; i < released->size(); ++i) {
        auto it = row_of.find(released->RecordId(i));
        if (it == row_of.end()) {
          return absl::InvalidArgumentError(absl::StrCat(
              "record '", released->RecordId(i),
              "' of the released sample is missing from the true sample"));
        }
        in.sample_true_keys.push_back(truth->Key(*keyspace, it->second));
        in.sample_released_keys.push_back(released->Key(*keyspace, i));
      }
    } else if (truth->size() == released->size()) {
      for (std::size_t i = 0; i < truth->size(); ++i) {
        in.sample_true_keys.push_back(truth->Key(*keyspace, i));
        in.sample_released_keys.push_back(released->Key(*keyspace, i));
      }
    } else {
      return absl::InvalidArgumentError(
          "true and released samples differ in size and carry no record_id");
    }
  }
  auto report = BuildRiskReport(in, *formulas);
  if (!report.ok()) return report.status();
  OutputWriter writer(config, result);
  const char d = config.delimiter;
  if (auto s = writer.Write("risk_records", [&](std::ostream& out) {
        WriteRiskRecords(out, *report, *keyspace, *formulas, d);
      });
      !s.ok()) {
    return s;
  }
  return writer.Write("risk_summary", [&](std::ostream& out) {
    WriteRiskSummary(out, *report, d);
  });
}

// ---- estimate --------------------------------------------------------------

absl::StatusOr<SearchCriterion> ParseCriterion(const std::string& name) {
  if (name == "bic") return BicCriterion();
  if (name == "aic") return AicCriterion();
  if (name == "uniques") return UniquesCriterion();
  return ConfigError("model.criterion",
                     "must be 'bic', 'aic' or 'uniques', got '" + name + "'");
}

absl::Status Estimate(const RunConfig& config, CommandResult& result) {
  absl::Status status;
  const KeySpace* keyspace = RequireKeySpace(config, &status);
  if (!keyspace) return status;
  const json model_node = Section(config, "model");
  FitOptions options;
  std::string criterion_name = "bic";
  std::vector<std::string> term_names;
  bool fixed_terms = false;
  if (model_node.is_object()) {
    options.max_iterations = model_node.value("max_iterations", 100);
    options.tolerance = model_node.value("tolerance", 1e-8);
    criterion_name = model_node.value("criterion", "bic");
    if (model_node.contains("terms")) {
      fixed_terms = true;
      for (const auto& t : model_node["terms"]) {
        term_names.push_back(t.get<std::string>());
      }
    }
  }
  if (options.max_iterations < 1 || !(options.tolerance > 0.0)) {
    return ConfigError("model", "max_iterations and tolerance must be positive");
  }
  auto criterion = ParseCriterion(criterion_name);
  if (!criterion.ok()) return criterion.status();
  auto misclass =
      ParseMisclassification(config, Section(config, "misclassification"));
  if (!misclass.ok()) return misclass.status();
  auto design = ParseSamplingDesign(*keyspace, Section(config, "sampling"));
  if (!design.ok()) return design.status();
  auto released = ReadInput(config, "sample_released");
  if (!released.ok()) return released.status();
  auto counts = Tabulate(*released, *keyspace, CountRole::kSamplePerturbed);
  if (!counts.ok()) return counts.status();

  OutputWriter writer(config, result);
  const char d = config.delimiter;
  std::optional<SearchResult> search;
  std::optional<ModelSpec> spec;
  if (fixed_terms) {
    auto parsed = ModelSpec::FromNames(*keyspace, term_names);
    if (!parsed.ok()) return ConfigError("model.terms", parsed.status().message());
    spec = std::move(*parsed);
  } else {
    auto found = ForwardSearch(*counts, *keyspace, *design, *criterion, options);
    if (!found.ok()) return found.status();
    spec = found->spec;
    search = std::move(*found);
  }
  std::vector<double> trace;
  options.trace_sink = &trace;
  auto model = FitPoisson(*counts, *spec, *design, options);
  if (!model.ok()) {
    if (!trace.empty()) {
      if (auto s = writer.Write("deviance_trace", [&](std::ostream& out) {
            out << "iteration" << d << "deviance" << '\n';
            for (std::size_t i = 0; i < trace.size(); ++i) {
              out << i + 1 << d << Num(trace[i]) << '\n';
            }
          });
          !s.ok()) {
        return s;
      }
      return absl::Status(
          model.status().code(),
          absl::StrCat(model.status().message(), "; deviance trace in ",
                       result.outputs.back().string()));
    }
    return model.status();
  }
  auto aggregate = AdjustedAggregate(*model, *misclass, *design, *counts);
  if (!aggregate.ok()) return aggregate.status();

  if (search) {
    if (auto s = writer.Write("model_search", [&](std::ostream& out) {
          out << "step" << d << "added_term" << d << criterion->name << '\n';
          for (std::size_t i = 0; i < search->steps.size(); ++i) {
            out << i << d << search->steps[i].added_term << d
                << Num(search->steps[i].score) << '\n';
          }
        });
        !s.ok()) {
      return s;
    }
  }
  if (auto s = writer.Write("model", [&](std::ostream& out) {
        WriteModelReport(out, *model, d);
      });
      !s.ok()) {
    return s;
  }
  if (auto s = writer.Write("estimate_records", [&](std::ostream& out) {
        out << "cell" << d << "key" << d << "estimate" << d << "adjusted"
            << '\n';
        for (const auto& r : aggregate->per_record) {
          out << ExternalCellLabel(r.cell) << d
              << EscapeField(keyspace->CellLabel(r.cell), d) << d
              << Num(r.estimate) << d << Num(r.adjusted) << '\n';
        }
      });
      !s.ok()) {
    return s;
  }
  const double su = static_cast<double>(aggregate->per_record.size());
  return writer.Write("estimate_summary", [&](std::ostream& out) {
    out << "measure" << d << "total" << d << "proportion" << d
        << "sample_uniques" << '\n';
    out << "estimated-naive" << d << Num(aggregate->naive) << d
        << Num(su > 0 ? aggregate->naive / su : 0.0) << d << su << '\n';
    out << "estimated-adjusted" << d << Num(aggregate->adjusted) << d
        << Num(su > 0 ? aggregate->adjusted / su : 0.0) << d << su << '\n';
    out << "# model: " << model->spec().ToString() << '\n';
  });
}

// ---- utility and map -------------------------------------------------------

struct TableSpec {
  std::size_t rows = 0;
  std::size_t columns = 0;
  std::optional<std::size_t> bvr_column;
};

absl::StatusOr<TableSpec> ParseTableSpec(const KeySpace& keyspace,
                                         const json& node,
                                         std::string_view where) {
  TableSpec spec;
  for (const auto& [key, target] :
       {std::pair{"rows", &spec.rows}, std::pair{"columns", &spec.columns}}) {
    if (!node.contains(key) || !node[key].is_string()) {
      return ConfigError(where, absl::StrCat("needs '", key, "'"));
    }
    auto idx = keyspace.VariableIndex(node[key].get<std::string>());
    if (!idx) {
      return ConfigError(where, "unknown variable '" +
                                    node[key].get<std::string>() + "'");
    }
    *target = *idx;
  }
  if (node.contains("bvr_column")) {
    const auto label = node["bvr_column"].get<std::string>();
    auto code = keyspace.variable(spec.columns).CodeOf(label);
    if (!code) {
      return ConfigError(where, "unknown bvr_column category '" + label + "'");
    }
    spec.bvr_column = *code;
  }
  return spec;
}

absl::Status Utility(const RunConfig& config, CommandResult& result) {
  absl::Status status;
  const KeySpace* keyspace = RequireKeySpace(config, &status);
  if (!keyspace) return status;
  const json utility = Section(config, "utility");
  if (!utility.is_object() || !utility.contains("tables") ||
      !utility["tables"].is_array()) {
    return ConfigError("utility", "needs a 'tables' array");
  }
  std::vector<TableSpec> specs;
  for (const auto& t : utility["tables"]) {
    auto spec = ParseTableSpec(*keyspace, t, "utility.tables");
    if (!spec.ok()) return spec.status();
    specs.push_back(*spec);
  }
  auto original = ReadInput(config, "original");
  if (!original.ok()) return original.status();
  auto perturbed = ReadInput(config, "perturbed");
  if (!perturbed.ok()) return perturbed.status();
  std::vector<UtilityMeasures> measures;
  for (const auto& spec : specs) {
    auto orig = TwoWayTable::FromMicrodata(*original, *keyspace, spec.rows,
                                           spec.columns);
    if (!orig.ok()) return orig.status();
    auto pert = TwoWayTable::FromMicrodata(*perturbed, *keyspace, spec.rows,
                                           spec.columns);
    if (!pert.ok()) return pert.status();
    auto m = MeasureUtility(*orig, *pert, spec.bvr_column);
    if (!m.ok()) {
      return absl::Status(m.status().code(),
                          absl::StrCat(orig->row_name(), "*",
                                       orig->column_name(), ": ",
                                       m.status().message()));
    }
    for (const auto& w : m->warnings) {
      result.warnings.push_back(absl::StrCat(m->table, ": ", w));
    }
    measures.push_back(std::move(*m));
  }
  OutputWriter writer(config, result);
  return writer.Write("utility", [&](std::ostream& out) {
    WriteUtilityMeasures(out, measures, config.delimiter);
    for (const auto& w : result.warnings) out << "# warning: " << w << '\n';
  });
}

// Reads the "total" of `measure` from a risk summary file.
absl::StatusOr<double> ReadSummaryValue(const std::filesystem::path& path,
                                        const std::string& measure) {
  std::ifstream in(path);
  if (!in) {
    return absl::NotFoundError(
        absl::StrCat("cannot open risk summary '", path.string(), "'"));
  }
  const char d = path.extension() == ".tsv" ? '\t' : ',';
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto fields = SplitDelimitedLine(line, d);
    if (!fields.ok()) return fields.status();
    if (fields->size() >= 2 && (*fields)[0] == measure) {
      try {
        return std::stod((*fields)[1]);
      } catch (const std::exception&) {
        break;
      }
    }
  }
  return absl::InvalidArgumentError(absl::StrCat(
      "risk summary '", path.string(), "' has no value for '", measure, "'"));
}

absl::Status Map(const RunConfig& config, CommandResult& result) {
  absl::Status status;
  const KeySpace* keyspace = RequireKeySpace(config, &status);
  if (!keyspace) return status;
  const json map = Section(config, "map");
  if (!map.is_object() || !map.contains("runs") || !map["runs"].is_array() ||
      !map.contains("table")) {
    return ConfigError("map", "needs 'table' and a 'runs' array");
  }
  auto spec = ParseTableSpec(*keyspace, map["table"], "map.table");
  if (!spec.ok()) return spec.status();
  const std::string measure = map.value("measure", std::string(kTauId));
  auto original = ReadInput(config, "original");
  if (!original.ok()) return original.status();
  auto orig = TwoWayTable::FromMicrodata(*original, *keyspace, spec->rows,
                                         spec->columns);
  if (!orig.ok()) return orig.status();

  std::vector<MapRun> runs;
  for (const auto& r : map["runs"]) {
    MapRun run;
    if (!r.contains("label") || !r.contains("perturbed")) {
      return ConfigError("map.runs", "each run needs 'label' and 'perturbed'");
    }
    run.label = r["label"].get<std::string>();
    if (r.contains("tau") && r["tau"].is_number()) {
      run.risk = r["tau"].get<double>();
    } else if (r.contains("risk_summary")) {
      auto tau = ReadSummaryValue(
          ResolvePath(config, r["risk_summary"].get<std::string>()), measure);
      if (!tau.ok()) return tau.status();
      run.risk = *tau;
    } else {
      return ConfigError("map.runs", "run '" + run.label +
                                         "' needs 'tau' or 'risk_summary'");
    }
    const auto path = ResolvePath(config, r["perturbed"].get<std::string>());
    auto table = ReadMicrodataFile(
        path.string(), *keyspace, path.extension() == ".tsv" ? '\t' : ',');
    if (!table.ok()) return table.status();
    auto pert = TwoWayTable::FromMicrodata(*table, *keyspace, spec->rows,
                                           spec->columns);
    if (!pert.ok()) return pert.status();
    auto m = MeasureUtility(*orig, *pert, spec->bvr_column);
    if (!m.ok()) return m.status();
    for (const auto& w : m->warnings) {
      result.warnings.push_back(absl::StrCat(run.label, ": ", w));
    }
    run.raad = m->raad;
    run.rcv = m->rcv;
    run.bvr = m->bvr;
    runs.push_back(std::move(run));
  }
  auto points = RiskUtilityMap(runs);
  if (!points.ok()) return ConfigError("map.runs", points.status().message());
  OutputWriter writer(config, result);
  return writer.Write("map", [&](std::ostream& out) {
    WriteRiskUtilityMap(out, *points, config.delimiter);
  });
}

// ---- simulations -----------------------------------------------------------

absl::Status SimulateMultikey(const RunConfig& config, CommandResult& result) {
  auto seed = StageSeed(config, "simulate-multikey");
  if (!seed.ok()) return seed.status();
  BinaryExperimentConfig experiment = DefaultBinaryExperimentConfig();
  experiment.seed = *seed;
  const json sim = Section(config, "simulate");
  if (sim.is_object()) {
    try {
      experiment.population_size =
          sim.value("population_size", experiment.population_size);
      experiment.sample_size = sim.value("sample_size", experiment.sample_size);
      experiment.p = sim.value("p", experiment.p);
      experiment.replicates = sim.value("replicates", experiment.replicates);
      if (sim.contains("thetas")) {
        experiment.thetas = sim["thetas"].get<std::vector<double>>();
      }
      if (sim.contains("C")) {
        if (sim["C"].is_array()) {
          experiment.num_variables = sim["C"].get<std::vector<int>>();
        } else {
          experiment.num_variables.clear();
          const int from = sim["C"].at("from").get<int>();
          const int to = sim["C"].at("to").get<int>();
          for (int c = from; c <= to; ++c) experiment.num_variables.push_back(c);
        }
      }
    } catch (const json::exception& e) {
      return ConfigError("simulate", e.what());
    }
  }
  auto points = RunBinaryExperiment(experiment);
  if (!points.ok()) {
    if (points.status().code() == absl::StatusCode::kInvalidArgument) {
      return ConfigError("simulate", points.status().message());
    }
    return points.status();
  }
  OutputWriter writer(config, result);
  return writer.Write("curve", [&](std::ostream& out) {
    WriteBinaryCurve(out, *points, config.delimiter);
  });
}

absl::Status LinkageSim(const RunConfig& config, CommandResult& result) {
  absl::Status status;
  const KeySpace* keyspace = RequireKeySpace(config, &status);
  if (!keyspace) return status;
  auto seed = StageSeed(config, "linkage-sim");
  if (!seed.ok()) return seed.status();
  const json link = Section(config, "linkage");
  if (!link.is_object() || !link.contains("external_size")) {
    return ConfigError("linkage", "needs 'external_size'");
  }
  LinkageExperimentConfig experiment;
  experiment.seed = *seed;
  experiment.external_size = link["external_size"].get<std::size_t>();
  experiment.replicates = link.value("replicates", experiment.replicates);
  const std::string sampler = link.value("sampler", "uniform");
  if (sampler == "skewed") {
    experiment.sampler = ExternalSampler::kSkewed;
  } else if (sampler != "uniform") {
    return ConfigError("linkage.sampler", "must be 'uniform' or 'skewed'");
  }
  auto misclass =
      ParseMisclassification(config, Section(config, "misclassification"));
  if (!misclass.ok()) return misclass.status();
  auto design = ParseSamplingDesign(*keyspace, Section(config, "sampling"));
  if (!design.ok()) return design.status();
  auto population = ReadInput(config, "population");
  if (!population.ok()) return population.status();
  auto linkage =
      RunLinkageExperiment(*population, *misclass, *design, experiment);
  if (!linkage.ok()) return linkage.status();
  OutputWriter writer(config, result);
  return writer.Write("linkage", [&](std::ostream& out) {
    WriteLinkageResult(out, *linkage, config.delimiter);
  });
}

}  // namespace

CommandResult RunCommand(const std::string& command, const RunConfig& config) {
  CommandResult result;
  SetReportDigits(config.digits);
  absl::Status status;
  if (command == "perturb") {
    status = Perturb(config, result);
  } else if (command == "assess") {
    status = Assess(config, result);
  } else if (command == "estimate") {
    status = Estimate(config, result);
  } else if (command == "utility") {
    status = Utility(config, result);
  } else if (command == "map") {
    status = Map(config, result);
  } else if (command == "simulate-multikey") {
    status = SimulateMultikey(config, result);
  } else if (command == "linkage-sim") {
    status = LinkageSim(config, result);
  } else {
    status = ConfigError("command", "unknown command '" + command + "'");
  }
  result.exit_code = ExitCodeFor(status);
  if (!status.ok()) result.message = std::string(status.message());
  return result;
}

int Main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app("Identification risk and disclosure control for categorical "
               "microdata",
               "sdlrisk");
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  Overrides overrides;
  app.add_option("--config", config_path, "JSON run configuration")
      ->required();
  app.add_option("--seed", overrides.seed, "Root random seed");
  app.add_option("--out", overrides.out, "Output directory");
  app.add_option("--format", overrides.format, "csv or tsv")
      ->check(CLI::IsMember({"csv", "tsv"}));
  app.add_option("--digits", overrides.digits,
                 "Significant digits in reports (default 6)");
  app.add_option("--rate", overrides.rate, "Swap rate override");
  app.add_option("--alpha", overrides.alpha, "PRAM alpha override");
  const std::pair<const char*, const char*> commands[] = {
      {"perturb", "Swap or PRAM a key variable; writes the audit and matrices"},
      {"assess", "Per-record and aggregate identification risk"},
      {"estimate", "Log-linear risk estimates from the released sample"},
      {"utility", "RAAD, RCV and BVR for configured two-way tables"},
      {"map", "Risk-utility map points and frontier"},
      {"simulate-multikey", "Independent binary key experiment"},
      {"linkage-sim", "Exact-matching linkage experiment"},
  };
  for (const auto& [name, description] : commands) {
    app.add_subcommand(name, description);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfigError;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  auto config = LoadConfig(config_path, overrides);
  if (!config.ok()) {
    err << "sdlrisk " << command << ": " << config.status().message() << '\n';
    return kExitConfigError;
  }
  const CommandResult result = RunCommand(command, *config);
  for (const auto& w : result.warnings) {
    err << "sdlrisk " << command << ": warning: " << w << '\n';
  }
  if (result.exit_code != kExitOk) {
    err << "sdlrisk " << command << ": " << result.message << '\n';
    return result.exit_code;
  }
  for (const auto& path : result.outputs) out << path.string() << '\n';
  return kExitOk;
}

}  // namespace sdlrisk::cli
