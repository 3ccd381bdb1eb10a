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

#include "offense/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "offense/errors.hpp"
#include "offense/hash.hpp"
#include "offense/parallel.hpp"

namespace offense::corpus {

using nlohmann::json;

namespace {

const std::string& require_string(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw MalformedLine(std::string("missing field '") + key + "'");
  if (!it->is_string()) throw MalformedLine(std::string("field '") + key + "' is not a string");
  return it->get_ref<const std::string&>();
}

std::int64_t parse_integer_text(std::string_view s, const char* key) {
  std::int64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw MalformedLine(std::string("field '") + key + "' is not an integer");
  return v;
}

// Integers only. Digit strings are accepted because the public dumps encode
// created_utc as a string in some years.
std::int64_t require_integer(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw MalformedLine(std::string("missing field '") + key + "'");
  if (it->is_number_integer()) {
    if (it->is_number_unsigned() && it->get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX))
      throw MalformedLine(std::string("field '") + key + "' out of range");
    return it->get<std::int64_t>();
  }
  if (it->is_string()) return parse_integer_text(it->get_ref<const std::string&>(), key);
  throw MalformedLine(std::string("field '") + key + "' is not an integer");
}

bool is_ascii_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

}  // namespace

void FilterConfig::validate() const {
  if (!(sample_rate > 0.0 && sample_rate <= 1.0))
    throw ConfigError("sample_rate must be in (0, 1], got " + std::to_string(sample_rate));
}

std::string_view to_string(Category c) {
  switch (c) {
    case Category::Political:
      return "political";
    case Category::Default:
      return "default";
    case Category::Other:
      return "other";
  }
  return "other";
}

std::string canonical_subreddit(std::string_view name) {
  std::size_t b = 0, e = name.size();
  while (b < e && is_ascii_space(name[b])) ++b;
  while (e > b && is_ascii_space(name[e - 1])) --e;
  std::string out(name.substr(b, e - b));
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

SubredditTaxonomy::SubredditTaxonomy(const std::vector<std::string>& political,
                                     const std::vector<std::string>& defaults) {
  for (const auto& n : political) political_.insert(canonical_subreddit(n));
  for (const auto& n : defaults) {
    auto c = canonical_subreddit(n);
    if (political_.count(c)) throw ConfigError("subreddit '" + c + "' is both political and default");
    default_.insert(std::move(c));
  }
}

SubredditTaxonomy SubredditTaxonomy::from_json_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("taxonomy is not valid JSON: ") + e.what());
  }
  auto names = [&](const char* key) {
    std::vector<std::string> out;
    if (!doc.is_object() || !doc.contains(key) || !doc[key].is_array())
      throw ConfigError(std::string("taxonomy needs a '") + key + "' string array");
    for (const auto& v : doc[key]) {
      if (!v.is_string()) throw ConfigError(std::string("taxonomy '") + key + "' holds a non-string");
      out.push_back(v.get<std::string>());
    }
    return out;
  };
  return SubredditTaxonomy(names("political"), names("default"));
}

SubredditTaxonomy SubredditTaxonomy::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open taxonomy " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

Category SubredditTaxonomy::categorize(std::string_view subreddit) const {
  const std::string key = canonical_subreddit(subreddit);
  if (political_.count(key)) return Category::Political;
  if (default_.count(key)) return Category::Default;
  return Category::Other;
}

RawComment parse_comment_line(std::string_view line) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::exception& e) {
    throw MalformedLine(std::string("not JSON: ") + e.what());
  }
  if (!obj.is_object()) throw MalformedLine("not a JSON object");
  RawComment c;
  c.id = require_string(obj, "id");
  if (c.id.empty()) throw MalformedLine("empty id");
  c.author = require_string(obj, "author");
  c.subreddit = require_string(obj, "subreddit");
  c.body = require_string(obj, "body");
  c.score = require_integer(obj, "score");
  c.created_utc = require_integer(obj, "created_utc");
  return c;
}

std::string serialize_comment(const RawComment& c) {
  // Keys in fixed order so output bytes do not depend on the JSON library's map.
  auto str = [](const std::string& s) { return json(s).dump(-1, ' ', false, json::error_handler_t::replace); };
  std::string out;
  out.reserve(c.body.size() + c.author.size() + c.subreddit.size() + c.id.size() + 96);
  out += "{\"id\":" + str(c.id);
  out += ",\"author\":" + str(c.author);
  out += ",\"subreddit\":" + str(c.subreddit);
  out += ",\"body\":" + str(c.body);
  out += ",\"score\":" + std::to_string(c.score);
  out += ",\"created_utc\":" + std::to_string(c.created_utc);
  out += "}";
  return out;
}

std::size_t scalar_length(std::string_view utf8) {
  std::size_t n = 0;
  for (unsigned char b : utf8)
    if ((b & 0xC0) != 0x80) ++n;
  return n;
}

bool passes_filter(const RawComment& c, const FilterConfig& cfg) {
  return scalar_length(c.body) >= cfg.min_body_length && c.author != cfg.excluded_author;
}

double sample_point(std::string_view id, std::uint64_t seed) {
  return to_unit_interval(mix64(fnv1a64(id, kFnvOffsetBasis ^ mix64(seed))));
}

bool sample_decision(std::string_view id, const FilterConfig& cfg) {
  if (cfg.sample_rate >= 1.0) return true;
  return sample_point(id, cfg.sample_seed) < cfg.sample_rate;
}

std::uint32_t week_of(std::int64_t created_utc, std::int64_t anchor) {
  if (created_utc < anchor)
    throw BeforeAnchor("timestamp " + std::to_string(created_utc) + " precedes anchor " + std::to_string(anchor));
  return static_cast<std::uint32_t>((created_utc - anchor) / kSecondsPerWeek);
}

std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

std::int64_t parse_utc_timestamp(std::string_view text) {
  auto fail = [&]() -> std::int64_t { throw ConfigError("unrecognised timestamp '" + std::string(text) + "'"); };
  if (text.empty()) return fail();
  if (text.find('-', 1) == std::string_view::npos) {
    std::int64_t v = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) return fail();
    return v;
  }
  auto num = [&](std::size_t pos, std::size_t len) -> int {
    if (pos + len > text.size()) fail();
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
      if (text[i] < '0' || text[i] > '9') fail();
      v = v * 10 + (text[i] - '0');
    }
    return v;
  };
  if (text.size() < 10 || text[4] != '-' || text[7] != '-') return fail();
  const int y = num(0, 4), mo = num(5, 2), d = num(8, 2);
  if (mo < 1 || mo > 12 || d < 1 || d > 31) return fail();
  int hh = 0, mm = 0, ss = 0;
  if (text.size() > 10) {
    if (text[10] != 'T' && text[10] != ' ') return fail();
    if (text.size() < 19 || text[13] != ':' || text[16] != ':') return fail();
    hh = num(11, 2);
    mm = num(14, 2);
    ss = num(17, 2);
    if (text.size() > 19 && !(text.size() == 20 && text[19] == 'Z')) return fail();
    if (hh > 23 || mm > 59 || ss > 60) return fail();
  }
  return days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d)) * 86400 + hh * 3600 + mm * 60 + ss;
}

IngestStats& IngestStats::operator+=(const IngestStats& o) {
  read += o.read;
  malformed += o.malformed;
  out_of_window += o.out_of_window;
  filtered_short += o.filtered_short;
  filtered_deleted += o.filtered_deleted;
  sampled_out += o.sampled_out;
  accepted += o.accepted;
  return *this;
}

IngestStats ingest(std::istream& in, std::ostream& out, const FilterConfig& cfg, const TimeWindow& window,
                   unsigned workers) {
  cfg.validate();
  struct ShardResult {
    IngestStats stats;
    std::string text;
  };
  IngestStats total;
  process_line_shards<ShardResult>(
      in, workers, 4096,
      [&](const std::vector<std::string>& lines, std::size_t) {
        ShardResult r;
        for (const auto& line : lines) {
          if (line.empty()) continue;
          ++r.stats.read;
          RawComment c;
          try {
            c = parse_comment_line(line);
          } catch (const MalformedLine&) {
            ++r.stats.malformed;
            continue;
          }
          if (!window.contains(c.created_utc)) {
            ++r.stats.out_of_window;
          } else if (scalar_length(c.body) < cfg.min_body_length) {
            ++r.stats.filtered_short;
          } else if (c.author == cfg.excluded_author) {
            ++r.stats.filtered_deleted;
          } else if (!sample_decision(c.id, cfg)) {
            ++r.stats.sampled_out;
          } else {
            ++r.stats.accepted;
            r.text += serialize_comment(c);
            r.text.push_back('\n');
          }
        }
        return r;
      },
      [&](ShardResult&& r) {
        total += r.stats;
        out << r.text;
      });
  return total;
}

}  // namespace offense::corpus
