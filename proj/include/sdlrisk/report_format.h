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

#ifndef SDLRISK_REPORT_FORMAT_H_
#define SDLRISK_REPORT_FORMAT_H_

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

namespace sdlrisk {

inline constexpr std::string_view kToolVersion = "sdlrisk 1.0.0";

// Formats with `significant` significant digits
// in %g style, independent of the global locale. -0 prints as 0.
std::string FormatNumber(double value, int significant = 6);

// Process-wide digit count used by report writers; set once by the CLI.
int ReportDigits();
void SetReportDigits(int significant);

inline std::string Num(double value) {
  return FormatNumber(value, ReportDigits());
}

struct Provenance {
  std::uint64_t config_hash = 0;
  std::optional<std::uint64_t> seed;
};

// "# sdlrisk 1.0.0 config=<16 hex digits> seed=<seed or none>"
std::string ProvenanceLine(const Provenance& provenance);

}  // namespace sdlrisk

#endif  // SDLRISK_REPORT_FORMAT_H_
