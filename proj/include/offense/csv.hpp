/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace offense {

// RFC 4180 field quoting: only when the field holds a comma, quote, CR or LF.
std::string csv_escape(std::string_view field);

// Joins already-formatted fields with commas, escaping each.
std::string csv_row(const std::vector<std::string>& fields);

// csv_row plus a trailing newline.
inline std::string csv_line(const std::vector<std::string>& fields) { return csv_row(fields) + '\n'; }

// Shortest decimal form that round-trips to the same double.
std::string format_double(double v);

// Streaming RFC 4180 reader. Quoted fields may span lines.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  // Next record, or nullopt at end of input. Throws MalformedRow on an
  // unterminated quoted field.
  std::optional<std::vector<std::string>> next();

  // 1-based physical line on which the last returned record started.
  std::size_t line() const { return record_line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
  std::size_t record_line_ = 0;
};

}  // namespace offense
