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

#include "sdlrisk/microdata_io.h"

#include <fstream>
#include <optional>

#include "absl/strings/str_cat.h"

namespace sdlrisk {

absl::StatusOr<std::vector<std::string>> SplitDelimitedLine(
    std::string_view line, char delimiter) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  bool field_was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"' && current.empty() && !field_was_quoted) {
      quoted = true;
      field_was_quoted = true;
    } else if (c == delimiter) {
      fields.push_back(std::move(current));
      current.clear();
      field_was_quoted = false;
    } else {
      current.push_back(c);
    }
  }
  if (quoted) return absl::InvalidArgumentError("unterminated quoted field");
  fields.push_back(std::move(current));
  return fields;
}

std::string EscapeField(std::string_view field, char delimiter) {
  if (field.find_first_of(std::string{delimiter, '"', '\n', '\r'}) ==
      std::string_view::npos) {
    return std::string(field);
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

absl::StatusOr<MicrodataTable> ReadMicrodata(std::istream& in,
                                             const KeySpace& keyspace,
                                             char delimiter) {
  std::string line;
  std::vector<std::string> header;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    if (view.empty() || view.front() == '#') continue;
    auto fields = SplitDelimitedLine(view, delimiter);
    if (!fields.ok()) {
      return absl::InvalidArgumentError(
          absl::StrCat("line ", line_no, ": ", fields.status().message()));
    }
    header = std::move(*fields);
    break;
  }
  if (header.empty()) {
    return absl::InvalidArgumentError("microdata file has no header row");
  }
  auto find_column = [&header](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  };
  std::vector<std::size_t> key_columns;
  for (const auto& v : keyspace.variables()) {
    auto col = find_column(v.name());
    if (!col) {
      return absl::InvalidArgumentError(
          absl::StrCat("microdata header lacks key variable '", v.name(), "'"));
    }
    key_columns.push_back(*col);
  }
  const auto id_col = find_column(kRecordIdColumn);
  const auto group_col = find_column(kTargetGroupColumn);
  const auto stratum_col = find_column(kControlStratumColumn);

  std::vector<CategoryCode> codes;
  RecordAnnotations annotations;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    if (view.empty() || view.front() == '#') continue;
    auto fields = SplitDelimitedLine(view, delimiter);
    if (!fields.ok()) {
      return absl::InvalidArgumentError(
          absl::StrCat("line ", line_no, ": ", fields.status().message()));
    }
    if (fields->size() != header.size()) {
      return absl::InvalidArgumentError(absl::StrCat(
          "line ", line_no, ": expected ", header.size(), " fields, got ",
          fields->size()));
    }
    for (std::size_t v = 0; v < key_columns.size(); ++v) {
      const std::string& label = (*fields)[key_columns[v]];
      auto code = keyspace.variable(v).CodeOf(label);
      if (!code) {
        return absl::OutOfRangeError(absl::StrCat(
            "line ", line_no, ": '", label, "' is not a category of '",
            keyspace.variable(v).name(), "'"));
      }
      codes.push_back(*code);
    }
    if (id_col) annotations.record_id.push_back((*fields)[*id_col]);
    if (group_col) annotations.target_group.push_back((*fields)[*group_col]);
    if (stratum_col) {
      annotations.control_stratum.push_back((*fields)[*stratum_col]);
    }
  }
  return MicrodataTable::Create(keyspace, std::move(codes),
                                std::move(annotations));
}

absl::StatusOr<MicrodataTable> ReadMicrodataFile(const std::string& path,
                                                 const KeySpace& keyspace,
                                                 char delimiter) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open '", path, "'"));
  auto table = ReadMicrodata(in, keyspace, delimiter);
  if (!table.ok()) {
    return absl::Status(table.status().code(),
                        absl::StrCat(path, ": ", table.status().message()));
  }
  return table;
}

void WriteMicrodata(std::ostream& out, const MicrodataTable& table,
                    const KeySpace& keyspace, char delimiter) {
  std::vector<std::string> header;
  if (table.has_record_id()) header.emplace_back(kRecordIdColumn);
  for (const auto& v : keyspace.variables()) header.push_back(v.name());
  if (table.has_target_group()) header.emplace_back(kTargetGroupColumn);
  if (table.has_control_stratum()) header.emplace_back(kControlStratumColumn);
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i > 0) out << delimiter;
    out << EscapeField(header[i], delimiter);
  }
  out << '\n';
  for (std::size_t r = 0; r < table.size(); ++r) {
    bool first = true;
    auto put = [&](std::string_view field) {
      if (!first) out << delimiter;
      first = false;
      out << EscapeField(field, delimiter);
    };
    if (table.has_record_id()) put(table.RecordId(r));
    for (std::size_t v = 0; v < keyspace.num_variables(); ++v) {
      put(keyspace.variable(v).categories()[table.Code(r, v)]);
    }
    if (table.has_target_group()) put(table.TargetGroup(r));
    if (table.has_control_stratum()) put(table.ControlStratum(r));
    out << '\n';
  }
}

}  // namespace sdlrisk
