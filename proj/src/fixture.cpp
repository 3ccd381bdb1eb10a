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

#include "offense/fixture.hpp"

#include <algorithm>
#include <filesystem>

#include "offense/binary_io.hpp"
#include "offense/corpus.hpp"
#include "offense/csv.hpp"

namespace offense::fixture {

namespace {

using Pool = std::vector<std::string>;

const Pool kInsults = {"idiot", "idiots", "moron", "morons", "scum",  "bigot",   "lowlife", "stupid",
                       "loser", "losers", "dumb",  "pathetic", "trash", "clown", "clowns",  "jerk",
                       "scumbag", "dimwit", "cretin", "degenerate"};
const Pool kHostile = {"hate", "shut", "disgusting", "worthless", "garbage", "filthy", "ugly", "despise", "sick",
                       "vile"};
const Pool kPolitical = {"vote",   "election", "policy",  "senate",      "candidate", "campaign", "debate",
                         "congress", "tax",    "law",     "president",   "governor",  "poll",     "party",
                         "reform", "budget",   "court",   "healthcare",  "immigration", "economy"};
const Pool kGeneral = {"game",   "level",  "player", "console", "movie",   "actor",   "scene",   "music",
                       "song",   "album",  "photo",  "camera",  "science", "research", "planet", "rocket",
                       "recipe", "cook",   "book",   "chapter", "team",    "season",  "car",     "engine",
                       "dog",    "cat",    "garden", "coffee",  "travel",  "city"};
const Pool kCommon = {"really", "think",  "good",  "great",  "people",      "time",     "year",   "day",
                      "make",   "know",   "see",   "look",   "work",        "new",      "post",   "comment",
                      "agree",  "point",  "interesting", "nice", "funny",   "actually", "probably", "maybe",
                      "thanks", "pretty", "right", "wrong",  "story",       "idea"};
const Pool kStop = {"the", "a", "is", "this", "and", "of", "to", "i", "you", "it", "that", "what", "so", "but"};

const std::string& pick(Rng& rng, const Pool& pool) { return pool[rng.below(pool.size())]; }

std::string finish_sentence(Rng& rng, std::vector<std::string> words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  if (!out.empty() && rng.uniform() < 0.5) out[0] = static_cast<char>(out[0] - 'a' + 'A');
  const double p = rng.uniform();
  out += p < 0.4 ? "." : p < 0.6 ? "!" : p < 0.7 ? "?" : "";
  return out;
}

void fill(Rng& rng, std::vector<std::string>& words, std::size_t n, bool political) {
  for (std::size_t i = 0; i < n; ++i) {
    const double p = rng.uniform();
    if (p < 0.5) words.push_back(pick(rng, political ? kPolitical : kGeneral));
    else if (p < 0.8) words.push_back(pick(rng, kCommon));
    else words.push_back(pick(rng, kStop));
  }
}

std::string make_id(std::uint64_t seed, std::size_t i) {
  static constexpr char kDigits[] = "0123456789abcdefghijklmnopqrstuvwxyz";
  std::uint64_t v = mix64(seed ^ (0x51ed270b27ull + i));
  std::string id;
  for (int k = 0; k < 7; ++k) {
    id += kDigits[v % 36];
    v /= 36;
  }
  return id;
}

}  // namespace

const std::vector<std::string>& fixture_subreddits() {
  static const std::vector<std::string> subs = {
      "politics", "The_Donald", "worldpolitics", "Conservative", "SandersForPresident",
      "news",     "worldnews",  "AskReddit",     "funny",        "pics",
      "gaming",   "movies",     "Music",         "science",      "todayilearned",
      "videos",   "sports",     "cars",          "Cooking",      "programming",
      "anime",    "gardening"};
  return subs;
}

std::string offensive_text(Rng& rng, bool political) {
  std::vector<std::string> words;
  const std::size_t insults = 1 + rng.below(3);
  const std::size_t hostile = 2 + rng.below(3);
  for (std::size_t i = 0; i < insults; ++i) words.push_back(pick(rng, kInsults));
  for (std::size_t i = 0; i < hostile; ++i) words.push_back(pick(rng, kHostile));
  fill(rng, words, 3 + rng.below(8), political);
  rng.shuffle(std::span<std::string>(words));
  return finish_sentence(rng, std::move(words));
}

std::string neutral_text(Rng& rng, bool political) {
  std::vector<std::string> words;
  fill(rng, words, 6 + rng.below(13), political);
  return finish_sentence(rng, std::move(words));
}

Fixture generate(const FixtureConfig& cfg) {
  Fixture f;
  Rng rng(derive_seed(cfg.seed, "fixture-comments"));
  const auto& subs = fixture_subreddits();
  constexpr std::size_t kPoliticalSubs = 5;

  // Zipf-like activity; a few heavy hitters, a long throwaway tail.
  std::vector<double> cumulative(cfg.authors);
  std::vector<double> propensity(cfg.authors);
  std::vector<double> political_lean(cfg.authors);
  double acc = 0.0;
  for (std::size_t a = 0; a < cfg.authors; ++a) {
    acc += 1.0 / std::pow(static_cast<double>(a) + 1.0, 0.9);
    cumulative[a] = acc;
    const double p = rng.uniform();
    propensity[a] = p < 0.03 ? 0.9 : p < 0.13 ? 0.45 : 0.04;
    political_lean[a] = rng.uniform() < 0.3 ? 0.7 : 0.15;
  }

  for (std::size_t i = 0; i < cfg.comments; ++i) {
    const double kind = rng.uniform();
    if (kind < cfg.malformed_share) {
      f.comments_jsonl += "{\"id\": \"broken" + std::to_string(i) + "\", \"body\": \n";
      continue;
    }
    const double r = rng.uniform() * acc;
    const std::size_t a = static_cast<std::size_t>(std::lower_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin());
    const std::size_t author = std::min(a, cfg.authors - 1);
    const bool political = rng.uniform() < political_lean[author];
    corpus::RawComment c;
    c.id = make_id(cfg.seed, i);
    c.author = "user_" + std::to_string(author);
    c.subreddit = political ? subs[rng.below(kPoliticalSubs)] : subs[kPoliticalSubs + rng.below(subs.size() - kPoliticalSubs)];
    c.created_utc = cfg.start_utc + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(cfg.end_utc - cfg.start_utc)));
    const bool offensive = rng.uniform() < propensity[author];
    c.body = offensive ? offensive_text(rng, political) : neutral_text(rng, political);
    c.score = static_cast<std::int64_t>(rng.below(30)) - 3 + (offensive ? 2 : 0);
    if (kind < cfg.malformed_share + cfg.deleted_share) {
      c.author = "[deleted]";
    } else if (kind < cfg.malformed_share + cfg.deleted_share + cfg.short_share) {
      c.body = rng.uniform() < 0.5 ? "lol ok" : "this.";
    }
    f.comments_jsonl += corpus::serialize_comment(c);
    f.comments_jsonl += '\n';
  }

  Rng lrng(derive_seed(cfg.seed, "fixture-labeled"));
  f.labeled_csv = csv_line({"_unit_id", "text", "class", "confidence"});
  static const double kConfidence[] = {0.3333, 0.5, 0.6667, 1.0};
  for (std::size_t i = 0; i < cfg.labeled_rows; ++i) {
    const bool offensive = lrng.uniform() < 0.35;
    const bool political = lrng.uniform() < 0.3;
    const bool noisy = lrng.uniform() < cfg.label_noise;
    const std::string text = (offensive != noisy) ? offensive_text(lrng, political) : neutral_text(lrng, political);
    const std::string cls = offensive ? (lrng.uniform() < 0.3 ? "OH" : "O") : "NO";
    const double conf = kConfidence[lrng.below(4)];
    f.labeled_csv += csv_line({std::to_string(700000000 + i), text, cls, format_double(conf)});
  }

  f.lexicon_a =
      "# synthetic word list A\nidiot\nmoron\nscum\nbigot\nlowlife\ncretin\ndegenerate\nwaste of space\nnitwit\n"
      "troglodyte\n";
  f.lexicon_b =
      "# synthetic word list B\nstupid\nloser\ndumb\npathetic\ntrash\nclown\nidiot\njerk\nscumbag\ndimwit\n"
      "brain dead\n";
  return f;
}

void write_fixture(const Fixture& f, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path d(dir);
  write_file_atomic((d / "comments.jsonl").string(), f.comments_jsonl);
  write_file_atomic((d / "labeled.csv").string(), f.labeled_csv);
  write_file_atomic((d / "lexicon_a.txt").string(), f.lexicon_a);
  write_file_atomic((d / "lexicon_b.txt").string(), f.lexicon_b);
}

}  // namespace offense::fixture
