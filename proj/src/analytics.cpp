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

#include "offense/analytics.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>

#include "json.hpp"
#include "offense/binary_io.hpp"
#include "offense/csv.hpp"
#include "offense/errors.hpp"
#include "offense/hash.hpp"
#include "offense/parallel.hpp"

namespace offense::analytics {

namespace {

template <typename Map, typename Key>
auto& find_or_emplace(Map& m, const Key& key) {
  auto it = m.find(key);
  if (it == m.end()) it = m.emplace(std::string(key), typename Map::mapped_type{}).first;
  return it->second;
}

void keep_min(std::optional<std::int64_t>& slot, std::int64_t t) {
  if (!slot || t < *slot) slot = t;
}

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::optional<double> relative(double political, double apolitical) {
  if (apolitical == 0.0) return std::nullopt;
  return political / apolitical - 1.0;
}

std::optional<double> mean(std::int64_t sum, std::uint64_t n) {
  if (n == 0) return std::nullopt;
  return static_cast<double>(sum) / static_cast<double>(n);
}

std::string opt_field(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::int64_t week_start(std::uint32_t week, const AnalyticsConfig& cfg) {
  return cfg.anchor + static_cast<std::int64_t>(week) * corpus::kSecondsPerWeek;
}

std::size_t class_index(AuthorClass c) { return static_cast<std::size_t>(c); }

}  // namespace

ClassifiedComment make_classified(std::string id, std::string author, std::string_view subreddit,
                                  std::int64_t created_utc, std::int64_t score, double offense_score, Label label,
                                  const corpus::SubredditTaxonomy& taxonomy, std::int64_t anchor) {
  ClassifiedComment c;
  c.id = std::move(id);
  c.author = std::move(author);
  c.subreddit = corpus::canonical_subreddit(subreddit);
  c.category = taxonomy.categorize(c.subreddit);
  c.week = corpus::week_of(created_utc, anchor);
  c.created_utc = created_utc;
  c.score = score;
  c.offense_score = offense_score;
  c.label = label;
  return c;
}

std::string_view to_string(AuthorClass c) {
  switch (c) {
    case AuthorClass::Throwaway: return "throwaway";
    case AuthorClass::Mid: return "mid";
    case AuthorClass::HighVolume: return "high_volume";
  }
  return "unknown";
}

AuthorClass classify_author(std::uint64_t total_comments) {
  if (total_comments < 5) return AuthorClass::Throwaway;
  if (total_comments <= 15) return AuthorClass::Mid;
  return AuthorClass::HighVolume;
}

bool is_troll(std::uint64_t total_comments, std::uint64_t offensive_comments) {
  return total_comments > 15 && ratio(offensive_comments, total_comments) > 0.75;
}

void CountCell::add(bool political, bool offensive, std::int64_t score) {
  comments[political][offensive] += 1;
  score_sum[political][offensive] += score;
}

CountCell& CountCell::operator+=(const CountCell& o) {
  for (int s = 0; s < 2; ++s) {
    for (int l = 0; l < 2; ++l) {
      comments[s][l] += o.comments[s][l];
      score_sum[s][l] += o.score_sum[s][l];
    }
  }
  return *this;
}

void Aggregates::add(const ClassifiedComment& c) {
  const bool political = c.category == Category::Political;
  const bool off = c.offensive();
  ++comments_;
  weeks_[c.week].add(political, off, c.score);
  (c.created_utc < cfg_.cutover ? pre_ : post_).add(political, off, c.score);
  auto& sub = find_or_emplace(subreddits_, c.subreddit);
  sub.category = c.category;
  ++sub.comments;
  sub.offensive += off;
  if (off && c.subreddit == destination_) destination_seen_ = true;
  if (track_authors_) add_author_event(c.author, c.subreddit, c.created_utc, off);
}

void Aggregates::add_author_event(std::string_view author, std::string_view subreddit, std::int64_t created_utc,
                                  bool offensive) {
  auto& a = find_or_emplace(authors_, author);
  ++a.total;
  if (!offensive) return;
  ++a.offensive;
  if (subreddit == destination_) {
    keep_min(a.first_destination_offense, created_utc);
  } else {
    auto it = a.first_offense_by_subreddit.find(subreddit);
    if (it == a.first_offense_by_subreddit.end()) {
      a.first_offense_by_subreddit.emplace(std::string(subreddit), created_utc);
    } else {
      it->second = std::min(it->second, created_utc);
    }
  }
}

void Aggregates::merge(const Aggregates& o) {
  comments_ += o.comments_;
  destination_seen_ = destination_seen_ || o.destination_seen_;
  for (const auto& [w, cell] : o.weeks_) weeks_[w] += cell;
  pre_ += o.pre_;
  post_ += o.post_;
  for (const auto& [name, s] : o.subreddits_) {
    auto& mine = find_or_emplace(subreddits_, name);
    mine.category = s.category;
    mine.comments += s.comments;
    mine.offensive += s.offensive;
  }
  for (const auto& [name, a] : o.authors_) {
    auto& mine = find_or_emplace(authors_, name);
    mine.total += a.total;
    mine.offensive += a.offensive;
    if (a.first_destination_offense) keep_min(mine.first_destination_offense, *a.first_destination_offense);
    for (const auto& [sub, t] : a.first_offense_by_subreddit) {
      auto it = mine.first_offense_by_subreddit.find(sub);
      if (it == mine.first_offense_by_subreddit.end()) {
        mine.first_offense_by_subreddit.emplace(sub, t);
      } else {
        it->second = std::min(it->second, t);
      }
    }
  }
  for (const auto& [k, n] : o.spilled_histogram_) spilled_histogram_[k] += n;
  for (const auto& [k, n] : o.spilled_flow_) spilled_flow_[k] += n;
}

void Aggregates::add_author_summary(std::uint64_t offensive, std::uint64_t total, std::uint64_t n_authors) {
  spilled_histogram_[{offensive, total}] += n_authors;
}

void Aggregates::add_flow_counts(const std::map<std::string, std::uint64_t>& counts) {
  for (const auto& [k, n] : counts) spilled_flow_[k] += n;
}

std::map<std::pair<std::uint64_t, std::uint64_t>, std::uint64_t> Aggregates::author_histogram() const {
  auto hist = spilled_histogram_;
  for (const auto& [name, a] : authors_) hist[{a.offensive, a.total}] += 1;
  return hist;
}

std::map<std::string, std::uint64_t> Aggregates::flow_counts() const {
  auto counts = spilled_flow_;
  for (const auto& [name, a] : authors_) {
    if (!a.first_destination_offense) continue;
    const std::int64_t t0 = *a.first_destination_offense;
    for (const auto& [sub, t] : a.first_offense_by_subreddit) {
      if (t < t0) counts[sub] += 1;
    }
  }
  return counts;
}

Timeline weekly_offense_timeline(const Aggregates& agg) {
  Timeline out;
  CountCell total;
  if (!agg.weeks().empty()) {
    const std::uint32_t last = agg.weeks().rbegin()->first;
    out.rows.reserve(static_cast<std::size_t>(last) + 1);
    auto it = agg.weeks().begin();
    for (std::uint32_t w = 0; w <= last; ++w) {
      TimelineRow row;
      row.week = w;
      if (it != agg.weeks().end() && it->first == w) {
        const CountCell& c = it->second;
        row.political_comments = c.comments[1][0] + c.comments[1][1];
        row.political_offensive = c.comments[1][1];
        row.apolitical_comments = c.comments[0][0] + c.comments[0][1];
        row.apolitical_offensive = c.comments[0][1];
        total += c;
        ++it;
      }
      row.political_fraction = ratio(row.political_offensive, row.political_comments);
      row.apolitical_fraction = ratio(row.apolitical_offensive, row.apolitical_comments);
      out.rows.push_back(row);
    }
  }
  auto fractions = [](const CountCell& c) {
    return std::pair{ratio(c.comments[1][1], c.comments[1][0] + c.comments[1][1]),
                     ratio(c.comments[0][1], c.comments[0][0] + c.comments[0][1])};
  };
  auto& s = out.summary;
  std::tie(s.political_fraction, s.apolitical_fraction) = fractions(total);
  std::tie(s.pre_political_fraction, s.pre_apolitical_fraction) = fractions(agg.before_cutover());
  std::tie(s.post_political_fraction, s.post_apolitical_fraction) = fractions(agg.after_cutover());
  s.overall_ratio = relative(s.political_fraction, s.apolitical_fraction);
  s.pre_ratio = relative(s.pre_political_fraction, s.pre_apolitical_fraction);
  s.post_ratio = relative(s.post_political_fraction, s.post_apolitical_fraction);
  return out;
}

ScoreTimeline weekly_score_timeline(const Aggregates& agg) {
  ScoreTimeline out;
  CountCell total;
  if (!agg.weeks().empty()) {
    const std::uint32_t last = agg.weeks().rbegin()->first;
    auto it = agg.weeks().begin();
    for (std::uint32_t w = 0; w <= last; ++w) {
      ScoreRow row;
      row.week = w;
      if (it != agg.weeks().end() && it->first == w) {
        const CountCell& c = it->second;
        row.political_offensive = c.comments[1][1];
        row.apolitical_offensive = c.comments[0][1];
        row.avg_score_offensive_political = mean(c.score_sum[1][1], c.comments[1][1]);
        row.avg_score_offensive_apolitical = mean(c.score_sum[0][1], c.comments[0][1]);
        total += c;
        ++it;
      }
      out.rows.push_back(row);
    }
  }
  auto& s = out.summary;
  s.offensive_avg = mean(total.score_sum[0][1] + total.score_sum[1][1], total.comments[0][1] + total.comments[1][1]);
  s.not_offensive_avg =
      mean(total.score_sum[0][0] + total.score_sum[1][0], total.comments[0][0] + total.comments[1][0]);
  s.offensive_political_avg = mean(total.score_sum[1][1], total.comments[1][1]);
  s.offensive_apolitical_avg = mean(total.score_sum[0][1], total.comments[0][1]);
  return out;
}

double AuthorGroup::share(AuthorClass c) const { return ratio(by_class[class_index(c)], authors); }

AuthorReport author_report(const Aggregates& agg) {
  AuthorReport out;
  const auto hist = agg.author_histogram();
  std::map<double, CdfRow> by_fraction;
  AuthorGroup all{"all"}, over{"fraction_over_0.75"};
  AuthorGroup quartiles[4] = {{"fraction_0_to_0.25"}, {"fraction_0.25_to_0.5"}, {"fraction_0.5_to_0.75"},
                              {"fraction_0.75_to_1"}};
  for (const auto& [key, n] : hist) {
    const auto [offensive, total] = key;
    const double f = ratio(offensive, total);
    const std::size_t cls = class_index(classify_author(total));
    CdfRow& row = by_fraction[f];
    row.offensive_fraction = f;
    row.authors += n;
    row.by_class[cls] += n;
    all.authors += n;
    all.by_class[cls] += n;
    const std::size_t q = f <= 0.25 ? 0 : f <= 0.5 ? 1 : f <= 0.75 ? 2 : 3;
    quartiles[q].authors += n;
    quartiles[q].by_class[cls] += n;
    if (f > 0.75) {
      over.authors += n;
      over.by_class[cls] += n;
    }
    if (is_troll(total, offensive)) out.trolls += n;
  }
  std::uint64_t cumulative = 0;
  for (auto& [f, row] : by_fraction) {
    cumulative += row.authors;
    row.cumulative = cumulative;
    row.cdf = ratio(cumulative, all.authors);
    out.cdf.push_back(row);
  }
  if (!out.cdf.empty()) out.cdf.back().cdf = 1.0;
  out.over_threshold = over.authors;
  out.over_threshold_throwaway_share = over.share(AuthorClass::Throwaway);
  out.over_threshold_troll_share = ratio(out.trolls, over.authors);
  out.groups.push_back(all);
  out.groups.push_back(over);
  for (auto& q : quartiles) out.groups.push_back(q);
  return out;
}

std::vector<AuthorProfile> author_profiles(std::span<const ClassifiedComment> stream) {
  std::map<std::string, std::pair<std::uint64_t, std::uint64_t>, std::less<>> counts;
  for (const auto& c : stream) {
    auto& [total, offensive] = counts[c.author];
    ++total;
    offensive += c.offensive();
  }
  std::vector<AuthorProfile> out;
  out.reserve(counts.size());
  for (const auto& [name, tc] : counts) {
    AuthorProfile p;
    p.author = name;
    p.total_comments = tc.first;
    p.offensive_comments = tc.second;
    p.offensive_fraction = ratio(tc.second, tc.first);
    p.author_class = classify_author(tc.first);
    p.troll = is_troll(tc.first, tc.second);
    out.push_back(std::move(p));
  }
  return out;
}

SubredditReport subreddit_stats(const Aggregates& agg) {
  const auto& cfg = agg.config();
  SubredditReport out;
  std::uint64_t above_comments = 0;
  for (const auto& [name, s] : agg.subreddits()) {
    if (s.comments <= cfg.min_comments) continue;
    SubredditRow row;
    row.subreddit = name;
    row.category = s.category;
    row.comment_count = s.comments;
    row.offensive_count = s.offensive;
    row.offensive_fraction = ratio(s.offensive, s.comments);
    out.rows.push_back(std::move(row));
  }
  std::sort(out.rows.begin(), out.rows.end(), [](const SubredditRow& a, const SubredditRow& b) {
    if (a.category != b.category) return a.category < b.category;
    if (a.offensive_fraction != b.offensive_fraction) return a.offensive_fraction < b.offensive_fraction;
    return a.subreddit < b.subreddit;
  });
  out.subreddits_considered = out.rows.size();
  for (std::size_t begin = 0; begin < out.rows.size();) {
    std::size_t end = begin;
    while (end < out.rows.size() && out.rows[end].category == out.rows[begin].category) ++end;
    const std::size_t n = end - begin;
    // Rows with equal fractions share the CDF value of the last of them.
    for (std::size_t i = begin; i < end;) {
      std::size_t j = i;
      while (j < end && out.rows[j].offensive_fraction == out.rows[i].offensive_fraction) ++j;
      for (std::size_t k = i; k < j; ++k) out.rows[k].category_cdf = ratio(j - begin, n);
      i = j;
    }
    const std::string cat(corpus::to_string(out.rows[begin].category));
    const std::size_t take = std::min(cfg.top_n, n);
    auto& least = out.least_offensive[cat];
    for (std::size_t i = 0; i < take; ++i) least.push_back(out.rows[begin + i]);
    std::vector<SubredditRow> most(out.rows.begin() + static_cast<std::ptrdiff_t>(begin),
                                   out.rows.begin() + static_cast<std::ptrdiff_t>(end));
    std::stable_sort(most.begin(), most.end(), [](const SubredditRow& a, const SubredditRow& b) {
      if (a.offensive_fraction != b.offensive_fraction) return a.offensive_fraction > b.offensive_fraction;
      return a.subreddit < b.subreddit;
    });
    most.resize(take);
    out.most_offensive[cat] = std::move(most);
    begin = end;
  }
  for (const auto& row : out.rows) {
    if (row.offensive_fraction > cfg.subreddit_threshold) {
      ++out.subreddits_above_threshold;
      above_comments += row.comment_count;
    }
  }
  out.share_above_threshold = ratio(out.subreddits_above_threshold, out.subreddits_considered);
  out.comment_share_above_threshold = ratio(above_comments, agg.comments());
  return out;
}

std::vector<FlowEdge> offense_flow(const Aggregates& agg) {
  const auto& cfg = agg.config();
  const std::string dest = corpus::canonical_subreddit(cfg.destination);
  if (!agg.destination_seen()) throw UnknownDestination("no offensive comments in destination subreddit '" + dest + "'");
  std::vector<FlowEdge> edges;
  for (const auto& [source, n] : agg.flow_counts()) {
    if (n >= cfg.min_flow && source != dest) edges.push_back({source, dest, n});
  }
  std::stable_sort(edges.begin(), edges.end(),
                   [](const FlowEdge& a, const FlowEdge& b) { return a.author_count > b.author_count; });
  return edges;
}

Aggregates aggregate(std::span<const ClassifiedComment> stream, const AnalyticsConfig& cfg) {
  Aggregates agg(cfg);
  for (const auto& c : stream) agg.add(c);
  return agg;
}

// ---------------------------------------------------------------------------
// Stream reading

namespace {

struct Columns {
  int id = -1, subreddit = -1, author = -1, score = -1, created_utc = -1, offense_score = -1, label = -1;
  std::size_t count = 0;
};

Columns map_header(const std::vector<std::string>& header) {
  Columns c;
  c.count = header.size();
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string& h = header[i];
    const int idx = static_cast<int>(i);
    if (h == "id") c.id = idx;
    else if (h == "subreddit") c.subreddit = idx;
    else if (h == "author") c.author = idx;
    else if (h == "score") c.score = idx;
    else if (h == "created_utc") c.created_utc = idx;
    else if (h == "offense_score") c.offense_score = idx;
    else if (h == "label") c.label = idx;
  }
  for (auto [name, v] : {std::pair{"id", c.id}, {"subreddit", c.subreddit}, {"author", c.author},
                         {"score", c.score}, {"created_utc", c.created_utc}, {"label", c.label}}) {
    if (v < 0) throw DataError(std::string("classified input lacks a '") + name + "' column");
  }
  return c;
}

std::int64_t parse_i64(std::string_view s) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) throw MalformedRow("bad integer '" + std::string(s) + "'");
  return v;
}

double parse_f64(std::string_view s) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) throw MalformedRow("bad number '" + std::string(s) + "'");
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  if (line.find('"') == std::string::npos) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        out.emplace_back(line, start);
        break;
      }
      out.emplace_back(line, start, comma - start);
      start = comma + 1;
    }
    return out;
  }
  std::istringstream ss(line);
  CsvReader reader(ss);
  auto rec = reader.next();
  if (!rec || reader.next()) throw MalformedRow("unparseable CSV line");
  return *rec;
}

ClassifiedComment parse_csv(const std::string& line, const Columns& cols, const corpus::SubredditTaxonomy& taxonomy,
                            std::int64_t anchor) {
  auto f = split_csv_line(line);
  if (f.size() != cols.count) throw MalformedRow("wrong field count");
  const double offense = cols.offense_score >= 0 ? parse_f64(f[cols.offense_score]) : 0.0;
  return make_classified(std::move(f[cols.id]), std::move(f[cols.author]), f[cols.subreddit],
                         parse_i64(f[cols.created_utc]), parse_i64(f[cols.score]), offense,
                         classifier::parse_label(f[cols.label]), taxonomy, anchor);
}

std::int64_t json_int(const nlohmann::json& v) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_string()) return parse_i64(v.get_ref<const std::string&>());
  throw MalformedRow("expected integer");
}

ClassifiedComment parse_json(const std::string& line, const corpus::SubredditTaxonomy& taxonomy,
                             std::int64_t anchor) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
    const double offense = j.contains("offense_score") ? j.at("offense_score").get<double>() : 0.0;
    return make_classified(j.at("id").get<std::string>(), j.at("author").get<std::string>(),
                           j.at("subreddit").get<std::string>(), json_int(j.at("created_utc")),
                           json_int(j.at("score")), offense,
                           classifier::parse_label(j.at("label").get<std::string>()), taxonomy, anchor);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedRow(e.what());
  }
}

struct ShardResult {
  Aggregates agg;
  ReadStats stats;
  std::vector<ClassifiedComment> spill;
};

struct SpillWriter {
  std::vector<std::ofstream> files;
  std::vector<std::string> paths;

  SpillWriter(const std::string& dir, std::size_t partitions) {
    std::filesystem::create_directories(dir);
    for (std::size_t p = 0; p < partitions; ++p) {
      paths.push_back((std::filesystem::path(dir) / ("author-partition-" + std::to_string(p) + ".bin")).string());
      files.emplace_back(paths.back(), std::ios::binary | std::ios::trunc);
      if (!files.back()) throw DataError("cannot create spill file " + paths.back());
    }
  }

  ~SpillWriter() {
    files.clear();
    std::error_code ec;
    for (const auto& p : paths) std::filesystem::remove(p, ec);
  }

  static void put_string(std::ofstream& out, const std::string& s) {
    const auto n = static_cast<std::uint32_t>(s.size());
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(s.data(), n);
  }

  void write(const ClassifiedComment& c) {
    auto& out = files[fnv1a64(c.author) % files.size()];
    put_string(out, c.author);
    put_string(out, c.subreddit);
    out.write(reinterpret_cast<const char*>(&c.created_utc), sizeof(c.created_utc));
    const char off = c.offensive() ? 1 : 0;
    out.write(&off, 1);
  }

  void close() {
    for (auto& f : files) {
      f.flush();
      if (!f) throw DataError("write to spill file failed");
      f.close();
    }
  }
};

bool get_string(std::ifstream& in, std::string& s) {
  std::uint32_t n = 0;
  if (!in.read(reinterpret_cast<char*>(&n), sizeof(n))) return false;
  s.resize(n);
  return static_cast<bool>(in.read(s.data(), n));
}

void reduce_partition(const std::string& path, Aggregates& into, std::mutex& mu) {
  Aggregates part(into.config());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open spill file " + path);
  std::string author, subreddit;
  while (get_string(in, author)) {
    std::int64_t t = 0;
    char off = 0;
    if (!get_string(in, subreddit) || !in.read(reinterpret_cast<char*>(&t), sizeof(t)) || !in.read(&off, 1)) {
      throw DataError("truncated spill file " + path);
    }
    part.add_author_event(author, subreddit, t, off != 0);
  }
  const auto hist = part.author_histogram();
  const auto flow = part.flow_counts();
  std::lock_guard lock(mu);
  for (const auto& [k, n] : hist) into.add_author_summary(k.first, k.second, n);
  into.add_flow_counts(flow);
}

}  // namespace

Aggregates analyze_stream(std::istream& in, const corpus::SubredditTaxonomy& taxonomy, const AnalyticsConfig& cfg,
                          unsigned workers, const std::optional<std::string>& spill_dir, ReadStats* stats,
                          std::size_t spill_partitions) {
  Aggregates total(cfg);
  ReadStats read;
  const bool spill = spill_dir.has_value();
  if (spill) total.set_track_authors(false);

  // Peek the first non-empty line to pick the format.
  std::string first;
  while (std::getline(in, first) && first.empty()) {
  }
  if (!first.empty() && first.back() == '\r') first.pop_back();
  if (first.empty()) {
    if (stats) *stats = read;
    return total;
  }
  const bool jsonl = first.front() == '{';
  std::optional<Columns> cols;
  if (!jsonl) {
    std::string header = first;
    if (header.starts_with("\xEF\xBB\xBF")) header.erase(0, 3);
    cols = map_header(split_csv_line(header));
  }

  std::optional<SpillWriter> writer;
  if (spill) writer.emplace(*spill_dir, std::max<std::size_t>(1, spill_partitions));

  auto process = [&](const std::vector<std::string>& lines, std::size_t) {
    ShardResult r;
    r.agg = Aggregates(cfg);
    if (spill) r.agg.set_track_authors(false);
    for (const std::string& raw : lines) {
      std::string_view view(raw);
      if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
      if (view.empty()) continue;
      ++r.stats.rows;
      const std::string line(view);
      try {
        ClassifiedComment c = jsonl ? parse_json(line, taxonomy, cfg.anchor) : parse_csv(line, *cols, taxonomy, cfg.anchor);
        r.agg.add(c);
        ++r.stats.used;
        if (spill) r.spill.push_back(std::move(c));
      } catch (const BeforeAnchor&) {
        ++r.stats.before_anchor;
      } catch (const DataError&) {
        ++r.stats.malformed;
      }
    }
    return r;
  };
  auto sink = [&](ShardResult r) {
    total.merge(r.agg);
    read.rows += r.stats.rows;
    read.malformed += r.stats.malformed;
    read.before_anchor += r.stats.before_anchor;
    read.used += r.stats.used;
    if (writer) {
      for (const auto& c : r.spill) writer->write(c);
    }
  };

  if (jsonl) {
    // The peeked line is data; feed it through the same path.
    ShardResult head = process({first}, 1);
    sink(std::move(head));
  }
  process_line_shards<ShardResult>(in, std::max(1u, workers), 4096, process, sink);

  if (writer) {
    writer->close();
    std::mutex mu;
    parallel_for(writer->paths.size(), std::max(1u, workers),
                 [&](std::size_t p) { reduce_partition(writer->paths[p], total, mu); });
  }
  if (stats) *stats = read;
  return total;
}

// ---------------------------------------------------------------------------
// Report

Report build_report(const Aggregates& agg) {
  Report r;
  r.timeline = weekly_offense_timeline(agg);
  r.scores = weekly_score_timeline(agg);
  r.authors = author_report(agg);
  r.subreddits = subreddit_stats(agg);
  try {
    r.flow = offense_flow(agg);
  } catch (const UnknownDestination& e) {
    r.flow_error = e.what();
  }
  return r;
}

std::string timeline_csv(const Timeline& t, const AnalyticsConfig& cfg) {
  std::string out = csv_line({"week", "week_start_utc", "political_comments", "political_offensive",
                             "political_fraction", "apolitical_comments", "apolitical_offensive",
                             "apolitical_fraction"});
  for (const auto& r : t.rows) {
    out += csv_line({std::to_string(r.week), std::to_string(week_start(r.week, cfg)),
                    std::to_string(r.political_comments), std::to_string(r.political_offensive),
                    format_double(r.political_fraction), std::to_string(r.apolitical_comments),
                    std::to_string(r.apolitical_offensive), format_double(r.apolitical_fraction)});
  }
  return out;
}

std::string scores_csv(const ScoreTimeline& s, const AnalyticsConfig& cfg) {
  std::string out = csv_line({"week", "week_start_utc", "political_offensive_comments",
                             "avg_score_offensive_political", "apolitical_offensive_comments",
                             "avg_score_offensive_apolitical"});
  for (const auto& r : s.rows) {
    out += csv_line({std::to_string(r.week), std::to_string(week_start(r.week, cfg)),
                    std::to_string(r.political_offensive), opt_field(r.avg_score_offensive_political),
                    std::to_string(r.apolitical_offensive), opt_field(r.avg_score_offensive_apolitical)});
  }
  return out;
}

std::string authors_cdf_csv(const AuthorReport& a) {
  std::string out =
      csv_line({"offensive_fraction", "authors", "throwaway", "mid", "high_volume", "cumulative_authors", "cdf"});
  for (const auto& r : a.cdf) {
    out += csv_line({format_double(r.offensive_fraction), std::to_string(r.authors), std::to_string(r.by_class[0]),
                    std::to_string(r.by_class[1]), std::to_string(r.by_class[2]), std::to_string(r.cumulative),
                    format_double(r.cdf)});
  }
  return out;
}

std::string author_summary_csv(const AuthorReport& a) {
  std::string out = csv_line({"group", "authors", "throwaway", "mid", "high_volume", "throwaway_share", "mid_share",
                             "high_volume_share"});
  for (const auto& g : a.groups) {
    out += csv_line({g.name, std::to_string(g.authors), std::to_string(g.by_class[0]), std::to_string(g.by_class[1]),
                    std::to_string(g.by_class[2]), format_double(g.share(AuthorClass::Throwaway)),
                    format_double(g.share(AuthorClass::Mid)), format_double(g.share(AuthorClass::HighVolume))});
  }
  return out;
}

std::string subreddits_csv(const SubredditReport& s) {
  std::string out = csv_line(
      {"subreddit", "category", "comment_count", "offensive_count", "offensive_fraction", "category_cdf"});
  for (const auto& r : s.rows) {
    out += csv_line({r.subreddit, std::string(corpus::to_string(r.category)), std::to_string(r.comment_count),
                    std::to_string(r.offensive_count), format_double(r.offensive_fraction),
                    format_double(r.category_cdf)});
  }
  return out;
}

std::string flow_csv(const std::vector<FlowEdge>& edges) {
  std::string out = csv_line({"source", "destination", "author_count"});
  for (const auto& e : edges) out += csv_line({e.source, e.destination, std::to_string(e.author_count)});
  return out;
}

namespace {

nlohmann::ordered_json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json rows_json(const std::map<std::string, std::vector<SubredditRow>>& tables) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (const auto& [cat, rows] : tables) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
      arr.push_back({{"subreddit", r.subreddit},
                     {"comment_count", r.comment_count},
                     {"offensive_count", r.offensive_count},
                     {"offensive_fraction", r.offensive_fraction}});
    }
    out[cat] = std::move(arr);
  }
  return out;
}

}  // namespace

std::string summary_json(const Report& r, const AnalyticsConfig& cfg) {
  using J = nlohmann::ordered_json;
  const auto& ts = r.timeline.summary;
  const auto& ss = r.scores.summary;
  J j;
  j["config"] = {{"week_anchor_utc", cfg.anchor},
                 {"cutover_utc", cfg.cutover},
                 {"destination", corpus::canonical_subreddit(cfg.destination)},
                 {"min_flow", cfg.min_flow},
                 {"min_comments", cfg.min_comments},
                 {"subreddit_threshold", cfg.subreddit_threshold},
                 {"top_n", cfg.top_n}};
  j["timeline"] = {{"relative_ratio_definition", "political_fraction / apolitical_fraction - 1"},
                   {"political_fraction", ts.political_fraction},
                   {"apolitical_fraction", ts.apolitical_fraction},
                   {"relative_ratio", opt_json(ts.overall_ratio)},
                   {"before_cutover",
                    {{"political_fraction", ts.pre_political_fraction},
                     {"apolitical_fraction", ts.pre_apolitical_fraction},
                     {"relative_ratio", opt_json(ts.pre_ratio)}}},
                   {"from_cutover",
                    {{"political_fraction", ts.post_political_fraction},
                     {"apolitical_fraction", ts.post_apolitical_fraction},
                     {"relative_ratio", opt_json(ts.post_ratio)}}}};
  j["scores"] = {{"offensive_avg", opt_json(ss.offensive_avg)},
                 {"not_offensive_avg", opt_json(ss.not_offensive_avg)},
                 {"offensive_political_avg", opt_json(ss.offensive_political_avg)},
                 {"offensive_apolitical_avg", opt_json(ss.offensive_apolitical_avg)}};
  const auto& a = r.authors;
  j["authors"] = {{"authors", a.groups.empty() ? 0 : a.groups.front().authors},
                  {"trolls", a.trolls},
                  {"fraction_over_0.75", a.over_threshold},
                  {"fraction_over_0.75_throwaway_share", a.over_threshold_throwaway_share},
                  {"fraction_over_0.75_troll_share", a.over_threshold_troll_share}};
  const auto& s = r.subreddits;
  j["subreddits"] = {{"considered", s.subreddits_considered},
                     {"above_threshold", s.subreddits_above_threshold},
                     {"share_above_threshold", s.share_above_threshold},
                     {"comment_share_above_threshold", s.comment_share_above_threshold},
                     {"most_offensive", rows_json(s.most_offensive)},
                     {"least_offensive", rows_json(s.least_offensive)}};
  j["flow"] = {{"edges", r.flow.size()}, {"error", r.flow_error ? J(*r.flow_error) : J(nullptr)}};
  return j.dump(2) + "\n";
}

std::vector<std::string> emit_report(const Report& r, const AnalyticsConfig& cfg, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::vector<std::pair<std::string, std::string>> files = {
      {"timeline.csv", timeline_csv(r.timeline, cfg)},
      {"scores.csv", scores_csv(r.scores, cfg)},
      {"authors_cdf.csv", authors_cdf_csv(r.authors)},
      {"author_summary.csv", author_summary_csv(r.authors)},
      {"subreddits.csv", subreddits_csv(r.subreddits)},
      {"flow.csv", flow_csv(r.flow)},
      {"summary.json", summary_json(r, cfg)},
  };
  std::vector<std::string> names;
  for (const auto& [name, body] : files) {
    write_file_atomic((std::filesystem::path(dir) / name).string(), body);
    names.push_back(name);
  }
  return names;
}

}  // namespace offense::analytics
