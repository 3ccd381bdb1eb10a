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

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace offense::corpus {

// One comment from a JSON-lines dump.
struct RawComment {
  std::string id;
  std::string author;
  std::string subreddit;
  std::string body;
  std::int64_t score = 0;
  std::int64_t created_utc = 0;

  bool operator==(const RawComment&) const = default;
};

struct FilterConfig {
  std::size_t min_body_length = 10;
  std::string excluded_author = "[deleted]";
  double sample_rate = 0.1;  // in (0, 1]
  std::uint64_t sample_seed = 0;

  // Throws ConfigError when sample_rate is outside (0, 1].
  void validate() const;
};

// Half-open study window [start, end) in epoch seconds.
struct TimeWindow {
  std::optional<std::int64_t> start;
  std::optional<std::int64_t> end;

  bool contains(std::int64_t t) const { return (!start || t >= *start) && (!end || t < *end); }
};

enum class Category { Political, Default, Other };

std::string_view to_string(Category c);

inline bool is_political(Category c) { return c == Category::Political; }

class SubredditTaxonomy {
 public:
  SubredditTaxonomy() = default;
  // Throws ConfigError when a name appears in both sets.
  SubredditTaxonomy(const std::vector<std::string>& political, const std::vector<std::string>& defaults);

  // JSON object with "political" and "default" string arrays.
  static SubredditTaxonomy load(const std::string& path);
  static SubredditTaxonomy from_json_text(std::string_view text);

  Category categorize(std::string_view subreddit) const;

  std::size_t political_size() const { return political_.size(); }
  std::size_t default_size() const { return default_.size(); }

 private:
  std::unordered_set<std::string> political_;
  std::unordered_set<std::string> default_;
};

// Lowercased with surrounding ASCII whitespace removed.
std::string canonical_subreddit(std::string_view name);

inline constexpr std::int64_t kSecondsPerWeek = 604800;
// 2015-01-01T00:00:00Z
inline constexpr std::int64_t kDefaultWeekAnchor = 1420070400;

// Throws MalformedLine. Unknown fields are ignored; body is kept byte-exact.
RawComment parse_comment_line(std::string_view line);

// Single JSON object, no trailing newline. Invalid UTF-8 in text fields is
// replaced with U+FFFD.
std::string serialize_comment(const RawComment& c);

// Number of Unicode scalar values, counting each non-continuation byte.
std::size_t scalar_length(std::string_view utf8);

bool passes_filter(const RawComment& c, const FilterConfig& cfg);

// Keyed hash of id mapped to [0, 1).
double sample_point(std::string_view id, std::uint64_t seed);
bool sample_decision(std::string_view id, const FilterConfig& cfg);

// floor((created_utc - anchor) / 604800); throws BeforeAnchor.
std::uint32_t week_of(std::int64_t created_utc, std::int64_t anchor = kDefaultWeekAnchor);

// Accepts an integer epoch, YYYY-MM-DD, or YYYY-MM-DDTHH:MM:SS[Z]. Throws ConfigError.
std::int64_t parse_utc_timestamp(std::string_view text);

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d);

// Funnel counters for one ingest run. Each rejected line is counted under the
// first rule it fails, in the order the fields are listed.
struct IngestStats {
  std::uint64_t read = 0;
  std::uint64_t malformed = 0;
  std::uint64_t out_of_window = 0;
  std::uint64_t filtered_short = 0;
  std::uint64_t filtered_deleted = 0;
  std::uint64_t sampled_out = 0;
  std::uint64_t accepted = 0;

  IngestStats& operator+=(const IngestStats& o);
  bool operator==(const IngestStats&) const = default;
};

// Reads JSON lines from `in`, writes accepted comments (re-serialized) to
// `out` in input order. Output is identical for every worker count.
IngestStats ingest(std::istream& in, std::ostream& out, const FilterConfig& cfg, const TimeWindow& window,
                   unsigned workers = 1);

}  // namespace offense::corpus
