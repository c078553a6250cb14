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

#include "sdlrisk/report_format.h"

#include <charconv>
#include <cmath>

#include "absl/strings/str_format.h"

namespace sdlrisk {
namespace {
int report_digits = 6;
}  // namespace

std::string FormatNumber(double value, int significant) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (value == 0.0) return "0";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value,
                                 std::chars_format::general, significant);
  if (ec != std::errc()) return "nan";
  return std::string(buf, end);
}

int ReportDigits() { return report_digits; }

void SetReportDigits(int significant) {
  report_digits = significant < 1 ? 1 : (significant > 17 ? 17 : significant);
}

std::string ProvenanceLine(const Provenance& provenance) {
  return absl::StrFormat(
      "# %s config=%016x seed=%s", std::string(kToolVersion),
      provenance.config_hash,
      provenance.seed ? std::to_string(*provenance.seed) : "none");
}

}  // namespace sdlrisk
