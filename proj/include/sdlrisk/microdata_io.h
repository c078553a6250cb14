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

#ifndef SDLRISK_MICRODATA_IO_H_
#define SDLRISK_MICRODATA_IO_H_

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"
#include "sdlrisk/keyspace.h"

namespace sdlrisk {

// Column names reserved for record annotations.
inline constexpr std::string_view kRecordIdColumn = "record_id";
inline constexpr std::string_view kTargetGroupColumn = "target_group";
inline constexpr std::string_view kControlStratumColumn = "control_stratum";

// Splits one delimited line. Fields may be double-quoted; a doubled quote
// inside a quoted field is a literal quote.
absl::StatusOr<std::vector<std::string>> SplitDelimitedLine(
    std::string_view line, char delimiter);

// Quotes a field when it contains the delimiter, a quote or a newline.
std::string EscapeField(std::string_view field, char delimiter);

// Reads microdata with a header row. Every key variable of `keyspace` must
// have a column; values are category labels. Lines starting with '#' and
// blank lines are skipped; other columns are ignored.
absl::StatusOr<MicrodataTable> ReadMicrodata(std::istream& in,
                                             const KeySpace& keyspace,
                                             char delimiter = ',');
absl::StatusOr<MicrodataTable> ReadMicrodataFile(const std::string& path,
                                                 const KeySpace& keyspace,
                                                 char delimiter = ',');

// Writes the header and one row per record: record_id (when present), the key
// variables as labels, then target_group and control_stratum when present.
void WriteMicrodata(std::ostream& out, const MicrodataTable& table,
                    const KeySpace& keyspace, char delimiter = ',');

}  // namespace sdlrisk

#endif  // SDLRISK_MICRODATA_IO_H_
