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


#ifndef SDLRISK_CLI_H_
#define SDLRISK_CLI_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "json.hpp"
#include "sdlrisk/keyspace.h"
#include "sdlrisk/misclass.h"
#include "sdlrisk/perturb.h"

namespace sdlrisk::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfigError = 2,
  kExitDataError = 3,
  kExitNumericalError = 4,
};

inline constexpr const char* kCommands[] = {
    "perturb", "assess", "estimate", "utility",
    "map",     "simulate-multikey",  "linkage-sim",
};

// Values given on the command line. They replace the matching config
// fields: --seed -> "seed", --out -> "out", --format -> "format",
// --digits -> "digits", --rate -> "perturbation.rate",
// --alpha -> "perturbation.alpha".
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> format;
  std::optional<int> digits;
  std::optional<double> rate;
  std::optional<double> alpha;
};

struct RunConfig {
  nlohmann::json doc;                // after overrides
  std::filesystem::path base_dir;    // relative input paths resolve here
  std::filesystem::path out_dir;
  char delimiter = ',';
  std::string extension = "csv";
  int digits = 6;
  std::optional<std::uint64_t> seed;
  std::uint64_t hash = 0;            // FNV-1a of the serialized doc
  std::optional<KeySpace> keyspace;  // when "keyspace" is present
};

// Errors from configuration handling carry a kInvalidArgument or kNotFound
// status and map to exit code 2.
absl::StatusOr<RunConfig> ParseConfig(const std::string& text,
                                      const std::filesystem::path& base_dir,
                                      const Overrides& overrides);
absl::StatusOr<RunConfig> LoadConfig(const std::filesystem::path& path,
                                     const Overrides& overrides);

absl::StatusOr<KeySpace> ParseKeySpace(const nlohmann::json& node);

// Either {"factors": [...]} with dense row-stochastic matrices (row = true
// category), {"file": path} naming such a document, or a preset:
//   {"preset": "binary-theta", "theta": t, "p": p, "variables": [...]}
//   {"preset": "swap"} / {"preset": "pram-invariant"}, which derive the
//   matrices from the configured perturbation plan and the original data.
absl::StatusOr<MisclassSpec> ParseMisclassification(const RunConfig& config,
                                                    const nlohmann::json& node);

nlohmann::json MisclassToJson(const MisclassSpec& spec);

// "perturbation" section: a swap or PRAM plan on one variable, optionally
// targeted through a rule mapping categories of a key variable to groups.
struct PerturbationConfig {
  enum class Method { kSwap, kPram };
  Method method = Method::kSwap;
  std::optional<TargetingRule> targeting;
  SwapPlan swap;
  PramPlan pram;
};

absl::StatusOr<PerturbationConfig> ParsePerturbation(
    const KeySpace& keyspace, const nlohmann::json& node);

std::filesystem::path ResolvePath(const RunConfig& config,
                                  const std::string& path);

// Reads the microdata named by inputs.<key>. ".tsv" files are tab
// separated, anything else comma separated.
absl::StatusOr<MicrodataTable> ReadInput(const RunConfig& config,
                                         const std::string& key);
bool HasInput(const RunConfig& config, const std::string& key);

absl::StatusOr<SamplingDesign> ParseSamplingDesign(const KeySpace& keyspace,
                                                   const nlohmann::json& node);

// Result of a command: exit code plus a diagnostic for nonzero codes.
struct CommandResult {
  int exit_code = kExitOk;
  std::string message;
  std::vector<std::string> warnings;
  std::vector<std::filesystem::path> outputs;
};

CommandResult RunCommand(const std::string& command, const RunConfig& config);

// Full command-line entry point. Diagnostics go to `err`.
int Main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace sdlrisk::cli

#endif  // SDLRISK_CLI_H_
