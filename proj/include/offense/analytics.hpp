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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "offense/classifier.hpp"
#include "offense/corpus.hpp"
#include "offense/string_map.hpp"

namespace offense::analytics {

using classifier::Label;
using corpus::Category;

// 2016-07-01T00:00:00Z
inline constexpr std::int64_t kDefaultCutover = 1467331200;

struct AnalyticsConfig {
  std::int64_t anchor = corpus::kDefaultWeekAnchor;
  std::int64_t cutover = kDefaultCutover;  // pre: created_utc < cutover
  std::string destination = "politics";
  std::uint64_t min_flow = 200;
  std::uint64_t min_comments = 1000;  // subreddits need strictly more
  double subreddit_threshold = 0.10;
  std::size_t top_n = 3;
};

struct ClassifiedComment {
  std::string id;
  std::string author;
  std::string subreddit;  // canonical (lowercase, trimmed)
  Category category = Category::Other;
  std::uint32_t week = 0;
  std::int64_t created_utc = 0;
  std::int64_t score = 0;
  double offense_score = 0.0;
  Label label = Label::NotOffensive;

  bool offensive() const { return label == Label::Offensive; }
};

ClassifiedComment make_classified(std::string id, std::string author, std::string_view subreddit,
                                  std::int64_t created_utc, std::int64_t score, double offense_score, Label label,
                                  const corpus::SubredditTaxonomy& taxonomy, std::int64_t anchor);

enum class AuthorClass { Throwaway, Mid, HighVolume };

std::string_view to_string(AuthorClass c);

// <5 total: throwaway; 5..15: mid; >15: high volume.
AuthorClass classify_author(std::uint64_t total_comments);
// More than 15 comments of which more than 75% offensive.
bool is_troll(std::uint64_t total_comments, std::uint64_t offensive_comments);

struct AuthorProfile {
  std::string author;
  std::uint64_t total_comments = 0;
  std::uint64_t offensive_comments = 0;
  double offensive_fraction = 0.0;
  AuthorClass author_class = AuthorClass::Throwaway;
  bool troll = false;
};

// Split index 0 = apolitical (default + other), 1 = political.
struct CountCell {
  std::uint64_t comments[2][2] = {{0, 0}, {0, 0}};  // [split][label]
  std::int64_t score_sum[2][2] = {{0, 0}, {0, 0}};

  void add(bool political, bool offensive, std::int64_t score);
  CountCell& operator+=(const CountCell& o);
};

// Per-author partial state. Mergeable by sum / min.
struct AuthorState {
  std::uint64_t total = 0;
  std::uint64_t offensive = 0;
  std::optional<std::int64_t> first_destination_offense;
  StringMap<std::int64_t> first_offense_by_subreddit;  // destination excluded
};

struct SubredditState {
  Category category = Category::Other;
  std::uint64_t comments = 0;
  std::uint64_t offensive = 0;
};

// Commutative, associative partial aggregate of a classified stream.
class Aggregates {
 public:
  explicit Aggregates(AnalyticsConfig cfg = {}) : cfg_(std::move(cfg)), destination_(corpus::canonical_subreddit(cfg_.destination)) {}

  void add(const ClassifiedComment& c);
  void merge(const Aggregates& other);

  // Per-author data can be routed elsewhere (spill mode); when disabled only
  // the global author histogram fed through add_author_summary is kept.
  void set_track_authors(bool track) { track_authors_ = track; }
  void add_author_event(std::string_view author, std::string_view subreddit, std::int64_t created_utc,
                        bool offensive);
  void add_author_summary(std::uint64_t offensive, std::uint64_t total, std::uint64_t n_authors);
  void add_flow_counts(const std::map<std::string, std::uint64_t>& counts);

  const AnalyticsConfig& config() const { return cfg_; }
  const std::map<std::uint32_t, CountCell>& weeks() const { return weeks_; }
  const CountCell& before_cutover() const { return pre_; }
  const CountCell& after_cutover() const { return post_; }
  const StringMap<AuthorState>& authors() const { return authors_; }
  const StringMap<SubredditState>& subreddits() const { return subreddits_; }
  std::uint64_t comments() const { return comments_; }
  bool destination_seen() const { return destination_seen_; }

  // (offensive, total) -> number of authors, including spilled partitions.
  std::map<std::pair<std::uint64_t, std::uint64_t>, std::uint64_t> author_histogram() const;
  // source subreddit -> distinct authors whose offensive activity there
  // strictly precedes their first offensive comment in the destination.
  std::map<std::string, std::uint64_t> flow_counts() const;

 private:
  AnalyticsConfig cfg_;
  std::string destination_;
  bool track_authors_ = true;
  std::uint64_t comments_ = 0;
  bool destination_seen_ = false;
  std::map<std::uint32_t, CountCell> weeks_;
  CountCell pre_, post_;
  StringMap<AuthorState> authors_;
  StringMap<SubredditState> subreddits_;
  std::map<std::pair<std::uint64_t, std::uint64_t>, std::uint64_t> spilled_histogram_;
  std::map<std::string, std::uint64_t> spilled_flow_;
};

struct TimelineRow {
  std::uint32_t week = 0;
  std::uint64_t political_comments = 0, political_offensive = 0;
  std::uint64_t apolitical_comments = 0, apolitical_offensive = 0;
  double political_fraction = 0.0, apolitical_fraction = 0.0;  // 0 for empty cells
};

struct TimelineSummary {
  double political_fraction = 0.0;
  double apolitical_fraction = 0.0;
  double pre_political_fraction = 0.0, pre_apolitical_fraction = 0.0;
  double post_political_fraction = 0.0, post_apolitical_fraction = 0.0;
  // political_fraction / apolitical_fraction - 1, nullopt when undefined.
  std::optional<double> overall_ratio, pre_ratio, post_ratio;
};

struct Timeline {
  std::vector<TimelineRow> rows;  // every week from 0 to the last observed week
  TimelineSummary summary;
};

struct ScoreRow {
  std::uint32_t week = 0;
  std::uint64_t political_offensive = 0;
  std::uint64_t apolitical_offensive = 0;
  std::optional<double> avg_score_offensive_political;  // nullopt for empty cells
  std::optional<double> avg_score_offensive_apolitical;
};

struct ScoreSummary {
  std::optional<double> offensive_avg, not_offensive_avg;
  std::optional<double> offensive_political_avg, offensive_apolitical_avg;
};

struct ScoreTimeline {
  std::vector<ScoreRow> rows;
  ScoreSummary summary;
};

struct CdfRow {
  double offensive_fraction = 0.0;
  std::uint64_t authors = 0;
  std::uint64_t by_class[3] = {0, 0, 0};  // throwaway, mid, high volume
  std::uint64_t cumulative = 0;
  double cdf = 0.0;
};

struct AuthorGroup {
  std::string name;
  std::uint64_t authors = 0;
  std::uint64_t by_class[3] = {0, 0, 0};
  double share(AuthorClass c) const;
};

struct AuthorReport {
  std::vector<CdfRow> cdf;
  // all, fraction>0.75, and the fraction quartile bins [0,.25], (.25,.5], (.5,.75], (.75,1].
  std::vector<AuthorGroup> groups;
  std::uint64_t trolls = 0;
  std::uint64_t over_threshold = 0;  // authors with fraction > 0.75
  double over_threshold_throwaway_share = 0.0;
  double over_threshold_troll_share = 0.0;
};

struct SubredditRow {
  std::string subreddit;
  Category category = Category::Other;
  std::uint64_t comment_count = 0;
  std::uint64_t offensive_count = 0;
  double offensive_fraction = 0.0;
  double category_cdf = 0.0;
};

struct SubredditReport {
  std::vector<SubredditRow> rows;  // category, fraction asc, name
  std::uint64_t subreddits_considered = 0;
  std::uint64_t subreddits_above_threshold = 0;
  double share_above_threshold = 0.0;
  double comment_share_above_threshold = 0.0;
  // per category: most and least offensive top_n
  std::map<std::string, std::vector<SubredditRow>> most_offensive, least_offensive;
};

struct FlowEdge {
  std::string source;
  std::string destination;
  std::uint64_t author_count = 0;

  bool operator==(const FlowEdge&) const = default;
};

Timeline weekly_offense_timeline(const Aggregates& agg);
ScoreTimeline weekly_score_timeline(const Aggregates& agg);
AuthorReport author_report(const Aggregates& agg);
SubredditReport subreddit_stats(const Aggregates& agg);
// Throws UnknownDestination when nobody commented offensively in the destination.
std::vector<FlowEdge> offense_flow(const Aggregates& agg);

// Per-author profiles, sorted by author name.
std::vector<AuthorProfile> author_profiles(std::span<const ClassifiedComment> stream);

// Convenience wrappers over an in-memory stream.
Aggregates aggregate(std::span<const ClassifiedComment> stream, const AnalyticsConfig& cfg);

struct ReadStats {
  std::uint64_t rows = 0;
  std::uint64_t malformed = 0;
  std::uint64_t before_anchor = 0;
  std::uint64_t used = 0;
};

// Reads a classified score file (CSV with a header holding id, subreddit,
// author, score, created_utc, offense_score, label; or JSON lines with the
// same keys) and aggregates it on `workers` threads. With a spill directory,
// per-author state is hash-partitioned to disk and reduced one partition at
// a time. Output is identical for every worker count and both modes.
Aggregates analyze_stream(std::istream& in, const corpus::SubredditTaxonomy& taxonomy, const AnalyticsConfig& cfg,
                          unsigned workers = 1, const std::optional<std::string>& spill_dir = std::nullopt,
                          ReadStats* stats = nullptr, std::size_t spill_partitions = 16);

struct Report {
  Timeline timeline;
  ScoreTimeline scores;
  AuthorReport authors;
  SubredditReport subreddits;
  std::vector<FlowEdge> flow;
  std::optional<std::string> flow_error;
};

Report build_report(const Aggregates& agg);

// CSV bodies, each with its header line.
std::string timeline_csv(const Timeline& t, const AnalyticsConfig& cfg);
std::string scores_csv(const ScoreTimeline& s, const AnalyticsConfig& cfg);
std::string authors_cdf_csv(const AuthorReport& a);
std::string author_summary_csv(const AuthorReport& a);
std::string subreddits_csv(const SubredditReport& s);
std::string flow_csv(const std::vector<FlowEdge>& edges);
std::string summary_json(const Report& r, const AnalyticsConfig& cfg);

// Writes timeline.csv, scores.csv, authors_cdf.csv, author_summary.csv,
// subreddits.csv, flow.csv and summary.json into `dir`. Returns the file names
// written, in that order.
std::vector<std::string> emit_report(const Report& r, const AnalyticsConfig& cfg, const std::string& dir);

}  // namespace offense::analytics
