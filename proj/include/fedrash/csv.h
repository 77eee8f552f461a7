/*
 * Copyright 2026 The Fedrash Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FEDRASH_CSV_H_
#define FEDRASH_CSV_H_

#include <string>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"

namespace fedrash {

using CsvRow = std::vector<std::string>;

// RFC-4180 parsing: quoted fields, doubled quotes, CRLF or LF line endings.
// A trailing newline does not produce an empty record.
absl::StatusOr<std::vector<CsvRow>> ParseCsv(std::string_view text);

// Quotes the field when it contains a comma, quote or line break.
std::string EscapeCsvField(std::string_view field);

std::string FormatCsvRow(const CsvRow& row);

}  // namespace fedrash

#endif  // FEDRASH_CSV_H_
