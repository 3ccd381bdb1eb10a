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

#include <algorithm>
#include <set>
#include <sstream>

#include "doctest.h"
#include "offense/corpus.hpp"
#include "offense/errors.hpp"
#include "offense/rng.hpp"
#include "support.hpp"

using namespace offense;
using namespace offense::corpus;

namespace {

std::string random_body(Rng& rng) {
  static const std::vector<std::string> pieces = {"hello", " ", "\"quoted\"", "\\", "😀", "ü", "\n", "\t", "tab",
                                                  "中文", "</script>", "’", "x", "{}", ","};
  std::string s;
  const auto n = rng.below(12);
  for (std::uint64_t i = 0; i < n; ++i) s += pieces[rng.below(pieces.size())];
  return s;
}

RawComment comment(std::string id, std::string author, std::string body, std::int64_t t = kDefaultWeekAnchor) {
  return RawComment{std::move(id), std::move(author), "news", std::move(body), 1, t};
}

}  // namespace

TEST_CASE("parse_comment_line maps fields directly") {
  const auto c = parse_comment_line(
      R"({"id":"c1","author":"a","subreddit":"news","body":"hello world","score":3,"created_utc":1420070400})");
  CHECK(c.id == "c1");
  CHECK(c.author == "a");
  CHECK(c.subreddit == "news");
  CHECK(c.body == "hello world");
  CHECK(c.score == 3);
  CHECK(c.created_utc == 1420070400);
}

TEST_CASE("parse_comment_line rejects malformed input") {
  CHECK_THROWS_AS(parse_comment_line(R"({"id":"c2"})"), MalformedLine);
  CHECK_THROWS_AS(parse_comment_line("not json"), MalformedLine);
  CHECK_THROWS_AS(parse_comment_line("[1,2]"), MalformedLine);
  CHECK_THROWS_AS(
      parse_comment_line(R"({"id":"c","author":"a","subreddit":"s","body":"b","score":1.5,"created_utc":1})"),
      MalformedLine);
  CHECK_THROWS_AS(
      parse_comment_line(R"({"id":"","author":"a","subreddit":"s","body":"b","score":1,"created_utc":1})"),
      MalformedLine);
  CHECK_THROWS_AS(
      parse_comment_line(R"({"id":"c","author":"a","subreddit":"s","body":"b","score":1,"created_utc":"12x"})"),
      MalformedLine);
}

TEST_CASE("parse_comment_line accepts digit-string timestamps and ignores unknown fields") {
  const auto c = parse_comment_line(
      R"({"id":"c","author":"a","subreddit":"s","body":"b","score":-4,"created_utc":"1420070400","gilded":0})");
  CHECK(c.created_utc == 1420070400);
  CHECK(c.score == -4);
}

TEST_CASE("serialize/parse round trip on 1k random comments keeps bodies byte-exact") {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    RawComment c{"id" + std::to_string(i), "author" + std::to_string(rng.below(50)), "sub", random_body(rng),
                 static_cast<std::int64_t>(rng.below(2000)) - 1000,
                 static_cast<std::int64_t>(1420070400 + rng.below(100000000))};
    const auto line = serialize_comment(c);
    CHECK(line.find('\n') == std::string::npos);
    CHECK(parse_comment_line(line) == c);
  }
}

TEST_CASE("passes_filter follows the length and author rules") {
  FilterConfig cfg;
  CHECK_FALSE(passes_filter(comment("1", "a", "short"), cfg));
  CHECK_FALSE(passes_filter(comment("1", "[deleted]", "0123456789"), cfg));
  CHECK(passes_filter(comment("1", "a", "0123456789"), cfg));
  // Length counts code points: nine accented letters are 18 bytes but too short.
  CHECK_FALSE(passes_filter(comment("1", "a", "ééééééééé"), cfg));
  CHECK(passes_filter(comment("1", "a", "éééééééééé"), cfg));
  CHECK(scalar_length("😀a") == 2);
}

TEST_CASE("sample_decision is deterministic and hits the target rate") {
  FilterConfig cfg;
  cfg.sample_seed = 99;
  CHECK(sample_decision("abc", cfg) == sample_decision("abc", cfg));
  std::size_t kept = 0;
  Rng rng(5);
  constexpr std::size_t n = 100000;
  for (std::size_t i = 0; i < n; ++i) {
    std::string id;
    for (int k = 0; k < 7; ++k) id += static_cast<char>('a' + rng.below(26));
    kept += sample_decision(id, cfg);
  }
  const double rate = static_cast<double>(kept) / n;
  CHECK(rate > 0.09);
  CHECK(rate < 0.11);
  cfg.sample_rate = 1.0;
  for (int i = 0; i < 1000; ++i) CHECK(sample_decision(std::to_string(i), cfg));
}

TEST_CASE("sample seed changes the sampled subset") {
  FilterConfig a, b;
  a.sample_seed = 1;
  b.sample_seed = 2;
  int differ = 0;
  for (int i = 0; i < 1000; ++i) differ += sample_decision(std::to_string(i), a) != sample_decision(std::to_string(i), b);
  CHECK(differ > 100);
}

TEST_CASE("filter config validation") {
  FilterConfig cfg;
  cfg.sample_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.sample_rate = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.sample_rate = 1.0;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("week_of boundaries") {
  const std::int64_t anchor = kDefaultWeekAnchor;
  CHECK(week_of(anchor) == 0);
  CHECK(week_of(anchor + 604799) == 0);
  CHECK(week_of(anchor + 604800) == 1);
  CHECK(week_of(parse_utc_timestamp("2015-07-01T00:00:00Z")) == 25);
  CHECK_THROWS_AS(week_of(anchor - 1), BeforeAnchor);
  // Monotone, and timestamps under a week apart are in the same or adjacent week.
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const auto t = anchor + static_cast<std::int64_t>(rng.below(100000000));
    const auto d = static_cast<std::int64_t>(rng.below(604800));
    const auto a = week_of(t), b = week_of(t + d);
    CHECK(b >= a);
    CHECK(b - a <= 1);
  }
}

TEST_CASE("timestamp parsing") {
  CHECK(parse_utc_timestamp("1420070400") == 1420070400);
  CHECK(parse_utc_timestamp("2015-01-01") == 1420070400);
  CHECK(parse_utc_timestamp("2016-07-01T00:00:00Z") == 1467331200);
  CHECK(parse_utc_timestamp("2016-02-29T12:30:05") == 1456749005);
  CHECK_THROWS_AS(parse_utc_timestamp("2016-13-01"), ConfigError);
  CHECK_THROWS_AS(parse_utc_timestamp("yesterday"), ConfigError);
  CHECK(days_from_civil(1970, 1, 1) == 0);
}

TEST_CASE("taxonomy categorization") {
  const auto tax = SubredditTaxonomy::load(std::string(OFFENSE_DATA_DIR) + "/taxonomy.json");
  CHECK(tax.political_size() == 21);
  CHECK(tax.categorize("the_donald") == Category::Political);
  CHECK(tax.categorize("  The_Donald ") == Category::Political);
  CHECK(tax.categorize("askscience") == Category::Default);
  CHECK(tax.categorize("dota2") == Category::Other);
  CHECK_THROWS_AS(SubredditTaxonomy({"news"}, {"News"}), ConfigError);
  CHECK_THROWS_AS(SubredditTaxonomy::from_json_text("{\"political\": []}"), ConfigError);
}

TEST_CASE("ingest funnel counts on constructed input") {
  // Each rejected line is counted under the first rule it fails.
  FilterConfig cfg;
  cfg.sample_rate = 1.0;
  TimeWindow window{parse_utc_timestamp("2015-01-01"), parse_utc_timestamp("2017-01-01")};
  std::string input;
  const std::int64_t t = parse_utc_timestamp("2016-01-01");
  std::size_t expect_malformed = 0, expect_window = 0, expect_short = 0, expect_deleted = 0, expect_ok = 0;
  for (int i = 0; i < 1000; ++i) {
    switch (i % 7) {
      case 0: input += "{broken\n"; ++expect_malformed; break;
      case 1: input += serialize_comment(comment("w" + std::to_string(i), "a", "long enough body", 1000)) + "\n"; ++expect_window; break;
      case 2: input += serialize_comment(comment("s" + std::to_string(i), "[deleted]", "tiny", t)) + "\n"; ++expect_short; break;
      case 3: input += serialize_comment(comment("d" + std::to_string(i), "[deleted]", "long enough body", t)) + "\n"; ++expect_deleted; break;
      default: input += serialize_comment(comment("k" + std::to_string(i), "a", "long enough body", t)) + "\n"; ++expect_ok; break;
    }
  }
  std::istringstream in(input);
  std::ostringstream out;
  const auto stats = ingest(in, out, cfg, window, 1);
  CHECK(stats.read == 1000);
  CHECK(stats.malformed == expect_malformed);
  CHECK(stats.out_of_window == expect_window);
  CHECK(stats.filtered_short == expect_short);
  CHECK(stats.filtered_deleted == expect_deleted);
  CHECK(stats.sampled_out == 0);
  CHECK(stats.accepted == expect_ok);
  const std::string written = out.str();
  const auto lines = static_cast<std::size_t>(std::count(written.begin(), written.end(), '\n'));
  CHECK(lines == expect_ok);
}

TEST_CASE("ingest is invariant to worker count and permutation; empty input is empty") {
  Rng rng(21);
  std::vector<std::string> lines;
  for (int i = 0; i < 3000; ++i) {
    lines.push_back(serialize_comment(comment("id" + std::to_string(i), rng.below(20) ? "a" : "[deleted]",
                                              rng.below(5) ? "a body of sufficient length" : "short",
                                              kDefaultWeekAnchor + static_cast<std::int64_t>(rng.below(1000000)))));
  }
  FilterConfig cfg;
  cfg.sample_seed = 4;
  auto run = [&](const std::vector<std::string>& ls, unsigned workers) {
    std::string text;
    for (const auto& l : ls) text += l + "\n";
    std::istringstream in(text);
    std::ostringstream out;
    const auto stats = ingest(in, out, cfg, {}, workers);
    return std::pair{stats, out.str()};
  };
  const auto [s1, o1] = run(lines, 1);
  const auto [s4, o4] = run(lines, 4);
  CHECK(s1 == s4);
  CHECK(o1 == o4);
  CHECK(s1.accepted > 0);
  CHECK(s1.sampled_out > 0);

  auto shuffled = lines;
  rng.shuffle(std::span<std::string>(shuffled));
  const auto [sp, op] = run(shuffled, 3);
  CHECK(sp == s1);
  std::multiset<std::string> a, b;
  std::istringstream ia(o1), ib(op);
  for (std::string l; std::getline(ia, l);) a.insert(l);
  for (std::string l; std::getline(ib, l);) b.insert(l);
  CHECK(a == b);

  std::istringstream empty("");
  std::ostringstream out;
  const auto zero = ingest(empty, out, cfg, {}, 2);
  CHECK(zero == IngestStats{});
  CHECK(out.str().empty());
}
