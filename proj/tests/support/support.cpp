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

#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <unistd.h>

#include "offense/cli.hpp"
#include "offense/csv.hpp"
#include "offense/hash.hpp"

namespace offense::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("offense-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

embedding::EmbeddingModel random_model(const std::vector<std::string>& words, std::uint32_t dim, std::uint64_t seed) {
  std::vector<embedding::VocabEntry> entries;
  for (std::size_t i = 0; i < words.size(); ++i) entries.push_back({words[i], words.size() - i});
  std::uint64_t total = 0;
  for (const auto& e : entries) total += e.count;
  embedding::Vocabulary vocab(entries, 1, total);
  Rng rng(seed);
  std::vector<float> vectors(words.size() * dim);
  for (auto& v : vectors) v = static_cast<float>(rng.uniform() * 2.0 - 1.0);
  return embedding::EmbeddingModel(std::move(vocab), dim, std::move(vectors));
}

std::vector<textnorm::TokenSequence> planted_pairs_corpus(std::size_t sentences, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<textnorm::TokenSequence> corpus;
  corpus.reserve(sentences);
  for (std::size_t i = 0; i < sentences; ++i) {
    const bool first = rng.below(2) == 0;
    const std::string pool = first ? "p" : "q";
    textnorm::TokenSequence s;
    const auto len = 4 + rng.below(5);
    for (std::uint64_t k = 0; k < len; ++k) s.push_back(pool + std::to_string(rng.below(20)));
    const auto at = rng.below(s.size() + 1);
    s.insert(s.begin() + static_cast<std::ptrdiff_t>(at), {first ? "a" : "c", first ? "b" : "d"});
    corpus.push_back(std::move(s));
  }
  return corpus;
}

PlantedMargins planted_pairs_margins(std::uint64_t seed, std::size_t sentences) {
  embedding::TrainConfig cfg;
  cfg.dim = 16;
  cfg.min_count = 1;
  cfg.seed = seed;
  const auto corpus = planted_pairs_corpus(sentences, derive_seed(seed, "planted"));
  const auto model = embedding::train(corpus, cfg);
  const auto v = [&](const char* w) { return *model.vector(w); };
  return {embedding::cosine(v("a"), v("b")), embedding::cosine(v("c"), v("d")), embedding::cosine(v("a"), v("c"))};
}

double max_cosine_oracle(const textnorm::TokenSequence& tokens, const embedding::EmbeddingModel& model,
                         const std::vector<double>& h) {
  if (tokens.empty()) return 0.0;
  double hh = 0.0;
  for (double x : h) hh += x * x;
  double best = -2.0;
  for (const auto& t : tokens) {
    double sim = 0.0;
    const auto idx = model.vocabulary().index_of(t);
    if (idx) {
      const auto row = model.row(*idx);
      double dot = 0.0, vv = 0.0;
      for (std::size_t k = 0; k < h.size(); ++k) {
        dot += static_cast<double>(row[k]) * h[k];
        vv += static_cast<double>(row[k]) * static_cast<double>(row[k]);
      }
      if (vv > 0.0 && hh > 0.0) sim = dot / (std::sqrt(vv) * std::sqrt(hh));
    }
    best = std::max(best, sim);
  }
  return best;
}

std::vector<double> mean_oracle(const std::vector<std::string>& words, const embedding::EmbeddingModel& model,
                                std::size_t& found) {
  std::vector<double> sum(model.dim(), 0.0);
  std::set<std::string> seen;
  found = 0;
  for (const auto& w : words) {
    if (!seen.insert(w).second) continue;
    const auto idx = model.vocabulary().index_of(w);
    if (!idx) continue;
    ++found;
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += static_cast<double>(model.row(*idx)[k]);
  }
  if (found > 0) {
    for (auto& x : sum) x /= static_cast<double>(found);
  }
  return sum;
}

namespace {

double entropy_bits(double a, double b) {
  const double n = a + b;
  double h = 0.0;
  for (double c : {a, b}) {
    if (c > 0) h -= (c / n) * std::log2(c / n);
  }
  return h;
}

}  // namespace

SplitOracle best_split_oracle(const std::vector<classifier::LabeledSample>& samples) {
  std::vector<double> values;
  double parent[2] = {0, 0};
  for (const auto& s : samples) {
    values.push_back(s.features[0]);
    parent[static_cast<int>(s.label)] += 1;
  }
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  const double n = static_cast<double>(samples.size());
  const double h = entropy_bits(parent[0], parent[1]);
  std::vector<std::pair<double, double>> scored;  // threshold, gain
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    const double thr = values[i] + (values[i + 1] - values[i]) / 2.0;
    double left[2] = {0, 0}, right[2] = {0, 0};
    for (const auto& s : samples) (s.features[0] <= thr ? left : right)[static_cast<int>(s.label)] += 1;
    const double nl = left[0] + left[1], nr = right[0] + right[1];
    scored.emplace_back(thr, h - nl / n * entropy_bits(left[0], left[1]) - nr / n * entropy_bits(right[0], right[1]));
  }
  SplitOracle out;
  for (const auto& [thr, gain] : scored) out.gain = std::max(out.gain, gain);
  if (out.gain <= 1e-12) return out;
  out.found = true;
  for (const auto& [thr, gain] : scored) {
    if (gain >= out.gain - 1e-12) out.thresholds.push_back(thr);
  }
  return out;
}

std::vector<classifier::LabeledSample> random_scalar_samples(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<classifier::LabeledSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    // Coarse grid on a third of the points so duplicates occur.
    double x = rng.uniform();
    if (rng.below(3) == 0) x = std::floor(x * 20.0) / 20.0;
    const double p = 1.0 / (1.0 + std::exp(-(x - 0.5) * 8.0));
    out.push_back(classifier::make_sample(
        x, rng.uniform() < p ? classifier::Label::Offensive : classifier::Label::NotOffensive, 1.0));
  }
  return out;
}

std::vector<classifier::LabeledSample> two_gaussian_samples(std::size_t n, std::uint64_t seed, double sigma) {
  Rng rng(seed);
  std::vector<classifier::LabeledSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const bool offensive = i % 2 == 0;
    const double x = (offensive ? 0.8 : 0.2) + sigma * rng.normal();
    out.push_back(
        classifier::make_sample(x, offensive ? classifier::Label::Offensive : classifier::Label::NotOffensive, 1.0));
  }
  return out;
}

namespace {

class ConstantModel final : public classifier::Model {
 public:
  explicit ConstantModel(classifier::Label l) : label_(l) {}
  using Model::predict;
  classifier::Prediction predict(std::span<const double>) const override {
    return {label_, label_ == classifier::Label::Offensive ? 1.0 : 0.0};
  }

 private:
  classifier::Label label_;
};

}  // namespace

classifier::Trainer majority_stub_trainer() {
  return [](std::span<const classifier::LabeledSample> train, std::uint64_t) -> std::unique_ptr<classifier::Model> {
    std::size_t offensive = 0;
    for (const auto& s : train) offensive += s.label == classifier::Label::Offensive;
    return std::make_unique<ConstantModel>(2 * offensive > train.size() ? classifier::Label::Offensive
                                                                        : classifier::Label::NotOffensive);
  };
}

CliResult run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string fixture_dir() { return std::string(OFFENSE_DATA_DIR) + "/fixture"; }

CliResult run_fixture_pipeline(const std::string& out_dir, std::uint64_t seed, unsigned workers) {
  const std::string fx = fixture_dir();
  const auto at = [&](const std::string& name) { return out_dir + "/" + name; };
  const std::vector<std::string> global{"--seed", std::to_string(seed), "--workers", std::to_string(workers),
                                        "--out-dir", out_dir};
  const std::vector<std::string> dataset{"--dataset", fx + "/labeled.csv", "--embedding", at("embedding.bin"),
                                         "--hatevector", at("hatevector.json")};
  const std::vector<std::vector<std::string>> stages{
      {"ingest", "--input", fx + "/comments.jsonl", "--sample-rate", "1"},
      {"train-embedding", "--input", at("comments.jsonl"), "--dim", "32", "--min-count", "5", "--deterministic"},
      {"build-hatevector", "--embedding", at("embedding.bin"), "--lexicon", fx + "/lexicon_a.txt", "--lexicon",
       fx + "/lexicon_b.txt"},
      {"train-classifier", "--n-estimators", "50"},
      {"evaluate", "--n-estimators", "20", "--kfold", "5", "--holdout", "0.25", "--baselines"},
      {"classify", "--input", at("comments.jsonl"), "--embedding", at("embedding.bin"), "--hatevector",
       at("hatevector.json"), "--forest", at("forest.bin")},
      {"analyze", "--input", at("classified.csv"), "--min-flow", "2", "--min-comments", "100"},
  };
  CliResult last;
  for (auto stage : stages) {
    if (stage[0] == "train-classifier" || stage[0] == "evaluate") {
      stage.insert(stage.begin() + 1, dataset.begin(), dataset.end());
    }
    std::vector<std::string> args = global;
    args.insert(args.end(), stage.begin(), stage.end());
    last = run_cli(args);
    if (last.code != 0) {
      last.err = stage[0] + ": " + last.err;
      return last;
    }
  }
  return last;
}

std::map<std::string, std::string> read_dir(const std::string& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    files[e.path().filename().string()] = std::string(std::istreambuf_iterator<char>(in), {});
  }
  return files;
}

namespace {

std::string sub_name(std::size_t i, std::size_t n) {
  const std::size_t political = n / 6, defaults = n / 3;
  if (i < political) return "pol_" + std::to_string(i);
  if (i < political + defaults) return "def_" + std::to_string(i - political);
  return "oth_" + std::to_string(i - political - defaults);
}

}  // namespace

corpus::SubredditTaxonomy synthetic_taxonomy(std::size_t n_subreddits) {
  std::vector<std::string> political, defaults;
  for (std::size_t i = 0; i < n_subreddits; ++i) {
    const std::string name = sub_name(i, n_subreddits);
    if (name.starts_with("pol_")) political.push_back(name);
    if (name.starts_with("def_")) defaults.push_back(name);
  }
  return corpus::SubredditTaxonomy(political, defaults);
}

std::vector<analytics::ClassifiedComment> synthetic_classified(std::size_t n, std::uint64_t seed,
                                                               std::size_t n_authors, std::size_t n_subreddits) {
  const auto taxonomy = synthetic_taxonomy(n_subreddits);
  Rng rng(seed);
  std::vector<double> propensity(n_authors);
  for (auto& p : propensity) {
    const double u = rng.uniform();
    p = u < 0.05 ? 0.9 : u < 0.25 ? 0.35 : 0.05;
  }
  std::vector<analytics::ClassifiedComment> out;
  out.reserve(n);
  const std::int64_t anchor = corpus::kDefaultWeekAnchor;
  for (std::size_t i = 0; i < n; ++i) {
    const double ua = rng.uniform();
    const auto author = static_cast<std::size_t>(static_cast<double>(n_authors) * ua * ua * ua);
    const double us = rng.uniform();
    const auto sub = static_cast<std::size_t>(static_cast<double>(n_subreddits) * us * us);
    // Hour-granular times within ~110 weeks so equal timestamps occur.
    const std::int64_t t = anchor + static_cast<std::int64_t>(rng.below(110 * 168)) * 3600;
    const bool off = rng.uniform() < propensity[author];
    const auto score = static_cast<std::int64_t>(rng.below(101)) - 20;
    out.push_back(analytics::make_classified("c" + std::to_string(i), "u" + std::to_string(author),
                                             sub_name(sub, n_subreddits), t, score, rng.uniform(),
                                             off ? analytics::Label::Offensive : analytics::Label::NotOffensive,
                                             taxonomy, anchor));
  }
  return out;
}

AnalyticsOracle analytics_oracle(const std::vector<analytics::ClassifiedComment>& stream,
                                 const analytics::AnalyticsConfig& cfg) {
  AnalyticsOracle o;
  using analytics::Category;
  const std::string dest = corpus::canonical_subreddit(cfg.destination);

  // Timeline and scores: per week, per split counts and sums.
  std::uint32_t max_week = 0;
  for (const auto& c : stream) max_week = std::max(max_week, c.week);
  const std::size_t weeks = stream.empty() ? 0 : max_week + 1;
  std::vector<std::array<std::uint64_t, 4>> n(weeks);  // pol total, pol off, apol total, apol off
  std::vector<std::array<std::int64_t, 2>> sum_off(weeks);  // pol, apol
  std::uint64_t tot[4] = {0, 0, 0, 0}, pre[4] = {0, 0, 0, 0}, post[4] = {0, 0, 0, 0};
  std::int64_t off_sum = 0, not_sum = 0, offp_sum = 0, offa_sum = 0;
  std::uint64_t off_n = 0, not_n = 0, offp_n = 0, offa_n = 0;
  for (const auto& c : stream) {
    const bool pol = c.category == Category::Political;
    const bool off = c.label == analytics::Label::Offensive;
    const int base = pol ? 0 : 2;
    n[c.week][base] += 1;
    n[c.week][base + 1] += off;
    tot[base] += 1;
    tot[base + 1] += off;
    auto& pp = c.created_utc < cfg.cutover ? pre : post;
    pp[base] += 1;
    pp[base + 1] += off;
    if (off) {
      sum_off[c.week][pol ? 0 : 1] += c.score;
      off_sum += c.score;
      ++off_n;
      if (pol) {
        offp_sum += c.score;
        ++offp_n;
      } else {
        offa_sum += c.score;
        ++offa_n;
      }
    } else {
      not_sum += c.score;
      ++not_n;
    }
  }
  auto frac = [](std::uint64_t a, std::uint64_t b) { return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0; };
  auto avg = [](std::int64_t s, std::uint64_t k) -> std::optional<double> {
    if (!k) return std::nullopt;
    return static_cast<double>(s) / static_cast<double>(k);
  };
  for (std::size_t w = 0; w < weeks; ++w) {
    analytics::TimelineRow r;
    r.week = static_cast<std::uint32_t>(w);
    r.political_comments = n[w][0];
    r.political_offensive = n[w][1];
    r.apolitical_comments = n[w][2];
    r.apolitical_offensive = n[w][3];
    r.political_fraction = frac(n[w][1], n[w][0]);
    r.apolitical_fraction = frac(n[w][3], n[w][2]);
    o.timeline.push_back(r);
    o.scores.push_back({r.week, n[w][1], n[w][3], avg(sum_off[w][0], n[w][1]), avg(sum_off[w][1], n[w][3])});
  }
  o.political_fraction = frac(tot[1], tot[0]);
  o.apolitical_fraction = frac(tot[3], tot[2]);
  o.pre_political = frac(pre[1], pre[0]);
  o.pre_apolitical = frac(pre[3], pre[2]);
  o.post_political = frac(post[1], post[0]);
  o.post_apolitical = frac(post[3], post[2]);
  o.offensive_avg = avg(off_sum, off_n);
  o.not_offensive_avg = avg(not_sum, not_n);
  o.offensive_political_avg = avg(offp_sum, offp_n);
  o.offensive_apolitical_avg = avg(offa_sum, offa_n);

  // Authors.
  std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> per_author;
  for (const auto& c : stream) {
    auto& [t, f] = per_author[c.author];
    ++t;
    f += c.label == analytics::Label::Offensive;
  }
  std::vector<double> fractions;
  std::map<double, std::vector<std::uint64_t>> cdf;
  for (const auto& [name, tf] : per_author) {
    const auto [t, f] = tf;
    const double fr = frac(f, t);
    fractions.push_back(fr);
    auto& row = cdf[fr];
    row.resize(4, 0);
    row[0] += 1;
    const int cls = t < 5 ? 1 : t <= 15 ? 2 : 3;
    row[cls] += 1;
    ++o.authors;
    if (t > 15 && fr > 0.75) ++o.trolls;
    if (fr > 0.75) {
      ++o.over_075;
      if (cls == 1) ++o.over_075_throwaway;
      if (cls == 2) ++o.over_075_mid;
      if (cls == 3) ++o.over_075_high;
    }
    const int q = fr <= 0.25 ? 0 : fr <= 0.5 ? 1 : fr <= 0.75 ? 2 : 3;
    ++o.quartile_authors[q];
  }
  for (const auto& [fr, row] : cdf) {
    o.cdf_counts.emplace_back(fr, row);
    std::uint64_t le = 0;
    for (double x : fractions) le += x <= fr;
    o.cdf_values.push_back(frac(le, o.authors));
  }

  // Subreddits.
  std::map<std::string, std::tuple<std::uint64_t, std::uint64_t, Category>> per_sub;
  for (const auto& c : stream) {
    auto& [cnt, off, cat] = per_sub[c.subreddit];
    ++cnt;
    off += c.label == analytics::Label::Offensive;
    cat = c.category;
  }
  std::uint64_t above_comments = 0;
  for (const auto& [name, v] : per_sub) {
    const auto& [cnt, off, cat] = v;
    if (cnt <= cfg.min_comments) continue;
    analytics::SubredditRow r;
    r.subreddit = name;
    r.category = cat;
    r.comment_count = cnt;
    r.offensive_count = off;
    r.offensive_fraction = frac(off, cnt);
    o.subreddits.push_back(r);
    if (r.offensive_fraction > cfg.subreddit_threshold) {
      ++o.subreddits_above;
      above_comments += cnt;
    }
  }
  for (auto& r : o.subreddits) {
    std::uint64_t same = 0, le = 0;
    for (const auto& s : o.subreddits) {
      if (s.category != r.category) continue;
      ++same;
      le += s.offensive_fraction <= r.offensive_fraction;
    }
    r.category_cdf = frac(le, same);
  }
  std::sort(o.subreddits.begin(), o.subreddits.end(), [](const auto& a, const auto& b) {
    return std::tie(a.category, a.offensive_fraction, a.subreddit) < std::tie(b.category, b.offensive_fraction, b.subreddit);
  });
  o.comment_share_above = frac(above_comments, stream.size());

  // Flow: per author, scan all of their comments.
  std::map<std::string, std::vector<const analytics::ClassifiedComment*>> by_author;
  for (const auto& c : stream) by_author[c.author].push_back(&c);
  for (const auto& [name, list] : by_author) {
    std::optional<std::int64_t> t0;
    for (const auto* c : list) {
      if (c->subreddit == dest && c->label == analytics::Label::Offensive && (!t0 || c->created_utc < *t0)) {
        t0 = c->created_utc;
      }
    }
    if (!t0) continue;
    o.destination_has_offense = true;
    std::set<std::string> sources;
    for (const auto* c : list) {
      if (c->subreddit != dest && c->label == analytics::Label::Offensive && c->created_utc < *t0) {
        sources.insert(c->subreddit);
      }
    }
    for (const auto& s : sources) o.flow_all[s] += 1;
  }
  for (const auto& [s, k] : o.flow_all) {
    if (k >= cfg.min_flow) o.flow.push_back({s, dest, k});
  }
  std::sort(o.flow.begin(), o.flow.end(), [](const auto& a, const auto& b) {
    return a.author_count != b.author_count ? a.author_count > b.author_count : a.source < b.source;
  });
  return o;
}

namespace {

bool close(double a, double b) { return std::abs(a - b) <= 1e-9; }

bool close(const std::optional<double>& a, const std::optional<double>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || close(*a, *b);
}

}  // namespace

std::vector<std::string> compare_with_oracle(const analytics::Report& r, const AnalyticsOracle& o) {
  std::vector<std::string> diffs;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) diffs.push_back(what);
  };
  // Timeline.
  check(r.timeline.rows.size() == o.timeline.size(), "timeline row count");
  for (std::size_t i = 0; i < std::min(r.timeline.rows.size(), o.timeline.size()); ++i) {
    const auto& a = r.timeline.rows[i];
    const auto& b = o.timeline[i];
    check(a.week == b.week && a.political_comments == b.political_comments &&
              a.political_offensive == b.political_offensive && a.apolitical_comments == b.apolitical_comments &&
              a.apolitical_offensive == b.apolitical_offensive && close(a.political_fraction, b.political_fraction) &&
              close(a.apolitical_fraction, b.apolitical_fraction),
          "timeline week " + std::to_string(i));
  }
  const auto& ts = r.timeline.summary;
  check(close(ts.political_fraction, o.political_fraction) && close(ts.apolitical_fraction, o.apolitical_fraction),
        "overall fractions");
  check(close(ts.pre_political_fraction, o.pre_political) && close(ts.pre_apolitical_fraction, o.pre_apolitical) &&
            close(ts.post_political_fraction, o.post_political) &&
            close(ts.post_apolitical_fraction, o.post_apolitical),
        "cutover fractions");

  // Scores.
  check(r.scores.rows.size() == o.scores.size(), "score row count");
  for (std::size_t i = 0; i < std::min(r.scores.rows.size(), o.scores.size()); ++i) {
    const auto& a = r.scores.rows[i];
    const auto& b = o.scores[i];
    check(a.week == b.week && a.political_offensive == b.political_n && a.apolitical_offensive == b.apolitical_n &&
              close(a.avg_score_offensive_political, b.political_avg) &&
              close(a.avg_score_offensive_apolitical, b.apolitical_avg),
          "scores week " + std::to_string(i));
  }
  const auto& ss = r.scores.summary;
  check(close(ss.offensive_avg, o.offensive_avg) && close(ss.not_offensive_avg, o.not_offensive_avg) &&
            close(ss.offensive_political_avg, o.offensive_political_avg) &&
            close(ss.offensive_apolitical_avg, o.offensive_apolitical_avg),
        "global score means");

  // Authors.
  check(r.authors.cdf.size() == o.cdf_counts.size(), "cdf row count");
  for (std::size_t i = 0; i < std::min(r.authors.cdf.size(), o.cdf_counts.size()); ++i) {
    const auto& a = r.authors.cdf[i];
    const auto& [fr, counts] = o.cdf_counts[i];
    check(a.offensive_fraction == fr && a.authors == counts[0] && a.by_class[0] == counts[1] &&
              a.by_class[1] == counts[2] && a.by_class[2] == counts[3] && close(a.cdf, o.cdf_values[i]),
          "cdf row " + std::to_string(i));
  }
  check(r.authors.trolls == o.trolls, "troll count");
  check(r.authors.over_threshold == o.over_075, "authors over 0.75");
  const auto& groups = r.authors.groups;
  check(groups.size() == 6, "author group count");
  if (groups.size() == 6) {
    check(groups[0].authors == o.authors, "author total");
    check(groups[1].authors == o.over_075 && groups[1].by_class[0] == o.over_075_throwaway &&
              groups[1].by_class[1] == o.over_075_mid && groups[1].by_class[2] == o.over_075_high,
          "over-0.75 breakdown");
    for (int q = 0; q < 4; ++q) check(groups[2 + q].authors == o.quartile_authors[q], "quartile " + std::to_string(q));
  }
  check(close(r.authors.over_threshold_troll_share,
              o.over_075 ? static_cast<double>(o.trolls) / static_cast<double>(o.over_075) : 0.0),
        "troll share");

  // Subreddits.
  check(r.subreddits.rows.size() == o.subreddits.size(), "subreddit row count");
  for (std::size_t i = 0; i < std::min(r.subreddits.rows.size(), o.subreddits.size()); ++i) {
    const auto& a = r.subreddits.rows[i];
    const auto& b = o.subreddits[i];
    check(a.subreddit == b.subreddit && a.category == b.category && a.comment_count == b.comment_count &&
              a.offensive_count == b.offensive_count && close(a.offensive_fraction, b.offensive_fraction) &&
              close(a.category_cdf, b.category_cdf),
          "subreddit row " + std::to_string(i));
  }
  check(r.subreddits.subreddits_above_threshold == o.subreddits_above, "subreddits above threshold");
  check(close(r.subreddits.comment_share_above_threshold, o.comment_share_above), "comment share above threshold");

  // Flow.
  check(r.flow_error.has_value() == !o.destination_has_offense, "flow destination presence");
  check(r.flow.size() == o.flow.size(), "flow edge count");
  if (r.flow.size() == o.flow.size()) {
    // Equal counts may appear in any stable order; compare as sorted sets too.
    auto sorted = r.flow;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
      return a.author_count != b.author_count ? a.author_count > b.author_count : a.source < b.source;
    });
    check(sorted == o.flow, "flow edges");
    for (std::size_t i = 1; i < r.flow.size(); ++i) {
      check(r.flow[i - 1].author_count >= r.flow[i].author_count, "flow ordering");
    }
  }
  return diffs;
}

std::string classified_csv(const std::vector<analytics::ClassifiedComment>& stream) {
  std::string out = "id,subreddit,author,score,created_utc,offense_score,label\n";
  for (const auto& c : stream) {
    out += csv_line({c.id, c.subreddit, c.author, std::to_string(c.score), std::to_string(c.created_utc),
                     format_double(c.offense_score), std::string(classifier::to_string(c.label))});
  }
  return out;
}

}  // namespace offense::testing
