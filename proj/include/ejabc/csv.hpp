/*
 * Copyright 2026 The ejabc Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef EJABC_CSV_HPP_
#define EJABC_CSV_HPP_

#include <ostream>
#include <string>
#include <vector>

namespace ejabc {

/// Shortest text that round-trips to the same double (at most 17 significant digits).
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name, or throws FormatError.
  std::size_t column(const std::string& name) const;
};

/// Reads a comma-separated file with one header line. Blank lines and lines
/// starting with '#' are skipped.
/// Throws FormatError if a row width differs from the header.
CsvTable read_csv(const std::string& path);

/// Parses a numeric cell; accepts inf/-inf/nan. Throws FormatError.
double parse_double(const std::string& cell);

void write_csv_row(std::ostream& out, const std::vector<std::string>& cells);

std::vector<std::string> numbered_columns(const std::string& prefix, std::size_t n);

}  // namespace ejabc

#endif  // EJABC_CSV_HPP_
