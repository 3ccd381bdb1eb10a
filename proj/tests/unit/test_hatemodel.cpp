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
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "nlohmann/json.hpp"
#include "offense/corpus.hpp"
#include "offense/csv.hpp"
#include "offense/errors.hpp"
#include "offense/hatemodel.hpp"
#include "offense/rng.hpp"
#include "support.hpp"

using namespace offense;
using namespace offense::hatemodel;
using textnorm::Normalizer;
using textnorm::NormalizerConfig;
using textnorm::TokenSequence;

namespace {

std::vector<std::string> word_list(std::size_t n, const std::string& prefix = "w") {
  std::vector<std::string> words;
  for (std::size_t i = 0; i < n; ++i) words.push_back(prefix + std::to_string(i));
  return words;
}

OffensiveLexicon lexicon_of(const std::vector<std::string>& words, const Normalizer& norm) {
  OffensiveLexicon lex;
  for (const auto& w : words) lex.add(w, "test", norm);
  return lex;
}

embedding::EmbeddingModel explicit_model(const std::vector<std::string>& words, std::uint32_t dim,
                                         std::vector<float> vectors) {
  std::vector<embedding::VocabEntry> entries;
  for (const auto& w : words) entries.push_back({w, 1});
  return embedding::EmbeddingModel(embedding::Vocabulary(entries, 1, words.size()), dim, std::move(vectors));
}

std::string random_text(Rng& rng, const std::vector<std::string>& vocab, std::size_t tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens; ++i) {
    if (!s.empty()) s += ' ';
    s += rng.below(5) == 0 ? "oov" + std::to_string(rng.below(100)) : vocab[rng.below(vocab.size())];
  }
  return s;
}

struct Fixture {
  NormalizerConfig cfg;
  Normalizer norm{cfg};
  std::vector<std::string> vocab = word_list(200);
  embedding::EmbeddingModel model = testing::random_model(vocab, 16, 42);
  HateVector hv = build_hate_vector(lexicon_of({"w3", "w17", "w50", "w99", "w120"}, norm), model);
};

}  // namespace

TEST_CASE("mean of one word is that word's vector") {
  const Normalizer norm{NormalizerConfig{}};
  const auto model = testing::random_model({"x", "y", "z"}, 5, 1);
  const auto hv = build_hate_vector(lexicon_of({"y"}, norm), model);
  const auto y = *model.vector("y");
  for (std::size_t k = 0; k < 5; ++k) CHECK(hv.h[k] == static_cast<double>(y[k]));
  CHECK(hv.contributing_count == 1);
  CHECK(hv.missing_words.empty());
  CHECK(hv.embedding_hash == model.content_hash());
}

TEST_CASE("two-point mean") {
  const Normalizer norm{NormalizerConfig{}};
  const auto model = explicit_model({"p", "q"}, 2, {1, 0, 0, 1});
  const auto hv = build_hate_vector(lexicon_of({"p", "q"}, norm), model);
  CHECK(hv.h == std::vector<double>{0.5, 0.5});
  CHECK(hv.contributing_count == 2);
}

TEST_CASE("50-word lexicon with 10 OOV matches the summation oracle") {
  const Normalizer norm{NormalizerConfig{}};
  const auto vocab = word_list(300);
  const auto model = testing::random_model(vocab, 24, 7);
  Rng rng(3);
  std::vector<std::string> lex_words;
  for (int i = 0; i < 40; ++i) lex_words.push_back(vocab[static_cast<std::size_t>(i) * 7]);
  for (int i = 0; i < 10; ++i) lex_words.push_back("missing" + std::to_string(i));
  rng.shuffle(lex_words);
  const auto lex = lexicon_of(lex_words, norm);
  REQUIRE(lex.size() == 50);
  const auto hv = build_hate_vector(lex, model);
  std::size_t found = 0;
  const auto oracle = testing::mean_oracle(lex_words, model, found);
  CHECK(found == 40);
  CHECK(hv.contributing_count == 40);
  CHECK(hv.missing_words.size() == 10);
  for (std::size_t k = 0; k < oracle.size(); ++k) CHECK(std::abs(hv.h[k] - oracle[k]) <= 1e-12);
}

TEST_CASE("no lexicon word in vocabulary is an error") {
  const Normalizer norm{NormalizerConfig{}};
  const auto model = testing::random_model({"x"}, 3, 1);
  CHECK_THROWS_AS(build_hate_vector(lexicon_of({"zz", "yy"}, norm), model), NoLexiconWordInVocabulary);
  CHECK_THROWS_AS(build_hate_vector(OffensiveLexicon{}, model), DataError);
}

TEST_CASE("lexicon entries are normalized, split and deduplicated") {
  NormalizerConfig cfg;
  cfg.stopwords = {"of"};
  cfg.suffix_rules = {{"s", "", 3}};
  const Normalizer norm(cfg);
  OffensiveLexicon lex;
  CHECK(lex.add("Idiots", "a", norm) == 1);
  CHECK(lex.add("idiot", "b", norm) == 0);
  CHECK(lex.add("waste of space", "b", norm) == 2);
  CHECK(lex.add("  ", "b", norm) == 0);
  REQUIRE(lex.size() == 3);
  CHECK(lex.entries()[0].word == "idiot");
  CHECK(lex.entries()[0].source == "a");
  CHECK(lex.entries()[1].word == "waste");
  CHECK(lex.entries()[2].word == "space");
}

TEST_CASE("lexicon files: comments skipped, provenance hashed per source") {
  testing::TempDir dir;
  testing::write_text(dir.file("hate.txt"), "# header\nfoo\n\nbar baz\n");
  testing::write_text(dir.file("banned.txt"), "foo\nqux\n");
  const Normalizer norm{NormalizerConfig{}};
  const auto lex = load_lexicon({dir.file("hate.txt"), dir.file("banned.txt")}, norm);
  std::vector<std::string> words;
  for (const auto& e : lex.entries()) words.push_back(e.word);
  CHECK(words == std::vector<std::string>{"foo", "bar", "baz", "qux"});
  CHECK(lex.source_hashes().size() == 2);
  CHECK(lex.source_hashes().count("hate") == 1);
  CHECK_THROWS_AS(load_lexicon({dir.file("absent.txt")}, norm), DataError);
}

TEST_CASE("transform examples") {
  Fixture f;
  const Normalizer norm{NormalizerConfig{}};
  const auto model = testing::random_model({"alpha", "beta", "gamma"}, 8, 5);
  const auto hv = build_hate_vector(lexicon_of({"beta"}, norm), model);
  CHECK(transform("beta", model, hv, norm) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(transform("BETA alpha", model, hv, norm) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(transform("unknown words only", model, hv, norm) == 0.0);
  CHECK(transform("", model, hv, norm) == 0.0);
  CHECK(transform("!!! ...", model, hv, norm) == 0.0);
}

TEST_CASE("transform equals the loop-over-tokens oracle on random texts") {
  Fixture f;
  const HateScorer scorer(f.model, f.hv, f.norm);
  Rng rng(19);
  for (int i = 0; i < 1000; ++i) {
    const auto text = random_text(rng, f.vocab, 1 + rng.below(20));
    const double expected = testing::max_cosine_oracle(f.norm.normalize(text), f.model, f.hv.h);
    CHECK(std::abs(scorer.transform(text) - expected) <= 1e-12);
  }
}

TEST_CASE("transform is order-free, monotone under appending and bounded") {
  Fixture f;
  const HateScorer scorer(f.model, f.hv, f.norm);
  Rng rng(29);
  for (int i = 0; i < 500; ++i) {
    TokenSequence tokens = f.norm.normalize(random_text(rng, f.vocab, 1 + rng.below(15)));
    const double base = scorer.transform_tokens(tokens);
    CHECK(base >= -1.0);
    CHECK(base <= 1.0);

    auto shuffled = tokens;
    rng.shuffle(shuffled);
    CHECK(scorer.transform_tokens(shuffled) == base);

    auto longer = tokens;
    longer.push_back(f.vocab[rng.below(f.vocab.size())]);
    CHECK(scorer.transform_tokens(longer) >= base);

    if (tokens.size() > 1) {
      std::size_t arg = 0;
      double best = -2.0;
      for (std::size_t k = 0; k < tokens.size(); ++k) {
        const double s = scorer.transform_tokens({tokens[k]});
        if (s > best) best = s, arg = k;
      }
      CHECK(best == base);
      auto shorter = tokens;
      shorter.erase(shorter.begin() + static_cast<std::ptrdiff_t>(arg));
      CHECK(scorer.transform_tokens(shorter) <= base);
    }
  }
}

TEST_CASE("transform is 1 for a positive multiple of h") {
  const Normalizer norm{NormalizerConfig{}};
  const auto model = explicit_model({"h1", "h2", "twice", "flip"}, 2, {1, 0, 0, 1, 1, 1, -1, -1});
  const auto hv = build_hate_vector(lexicon_of({"h1", "h2"}, norm), model);
  CHECK(transform("twice", model, hv, norm) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(transform("flip", model, hv, norm) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(transform("flip h1", model, hv, norm) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
}

TEST_CASE("one similarity evaluation per token") {
  Fixture f;
  const HateScorer scorer(f.model, f.hv, f.norm);
  Rng rng(31);
  std::uint64_t expected = 0;
  for (int i = 0; i < 200; ++i) {
    const auto text = random_text(rng, f.vocab, rng.below(25));
    expected += f.norm.normalize(text).size();
    scorer.transform(text);
  }
  CHECK(scorer.distance_computations() == expected);
}

TEST_CASE("provenance: a hate vector from another embedding is refused") {
  Fixture f;
  const auto other = testing::random_model(f.vocab, 16, 43);
  CHECK_THROWS_AS(HateScorer(other, f.hv, f.norm), ProvenanceMismatch);
  CHECK_THROWS_AS(check_provenance(f.hv, other), ProvenanceMismatch);
  CHECK_THROWS_AS(transform("w3", other, f.hv, f.norm), ProvenanceMismatch);
  CHECK_NOTHROW(check_provenance(f.hv, f.model));
}

TEST_CASE("hate vector save/load round trip") {
  Fixture f;
  testing::TempDir dir;
  save_hate_vector(f.hv, dir.file("h.json"));
  const auto back = load_hate_vector(dir.file("h.json"));
  CHECK(back.h == f.hv.h);
  CHECK(back.contributing_count == f.hv.contributing_count);
  CHECK(back.missing_words == f.hv.missing_words);
  CHECK(back.embedding_hash == f.hv.embedding_hash);
  CHECK(back.content_hash() == f.hv.content_hash());
  testing::write_text(dir.file("bad.json"), "{\"format\": 1}");
  CHECK_THROWS_AS(load_hate_vector(dir.file("bad.json")), DataError);
}

namespace {

std::string comments_jsonl(std::size_t n, std::uint64_t seed, const std::vector<std::string>& vocab,
                           std::vector<std::string>* texts = nullptr) {
  Rng rng(seed);
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    corpus::RawComment c;
    c.id = "c" + std::to_string(i);
    c.author = "u" + std::to_string(rng.below(50));
    c.subreddit = "s" + std::to_string(rng.below(5));
    c.body = random_text(rng, vocab, 1 + rng.below(20));
    c.score = static_cast<std::int64_t>(rng.below(100)) - 10;
    c.created_utc = 1450000000 + static_cast<std::int64_t>(i);
    if (texts) texts->push_back(c.body);
    out += corpus::serialize_comment(c) + "\n";
  }
  return out;
}

std::vector<std::vector<std::string>> read_rows(const std::string& csv) {
  std::istringstream in(csv);
  CsvReader reader(in);
  std::vector<std::vector<std::string>> rows;
  const auto header = reader.next();
  REQUIRE(header.has_value());
  CHECK(csv_row(*header) == score_header(false));
  while (auto r = reader.next()) rows.push_back(*r);
  return rows;
}

}  // namespace

TEST_CASE("score_corpus: empty input gives only the header") {
  Fixture f;
  const HateScorer scorer(f.model, f.hv, f.norm);
  std::istringstream in("");
  std::ostringstream out;
  const auto stats = score_corpus(in, out, scorer, ScoreFormat::Csv);
  CHECK(stats.read == 0);
  CHECK(stats.scored == 0);
  CHECK(out.str() == score_header(false) + "\n");
}

TEST_CASE("score_corpus agrees with per-comment transform for any worker count") {
  Fixture f;
  const HateScorer scorer(f.model, f.hv, f.norm);
  std::vector<std::string> texts;
  const auto input = comments_jsonl(10000, 8, f.vocab, &texts);
  std::string reference;
  for (unsigned workers : {1u, 4u}) {
    std::istringstream in(input + "not json\n");
    std::ostringstream out;
    const auto stats = score_corpus(in, out, scorer, ScoreFormat::Csv, workers);
    CHECK(stats.read == 10001);
    CHECK(stats.malformed == 1);
    CHECK(stats.scored == 10000);
    const auto rows = read_rows(out.str());
    REQUIRE(rows.size() == 10000);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      REQUIRE(rows[i].size() == 6);
      CHECK(rows[i][0] == "c" + std::to_string(i));
      CHECK(std::stod(rows[i][5]) == scorer.transform(texts[i]));
    }
    if (reference.empty()) reference = out.str();
    CHECK(out.str() == reference);
  }
}

TEST_CASE("score_corpus: permuted input yields the same multiset of scores") {
  Fixture f;
  const HateScorer scorer(f.model, f.hv, f.norm);
  const auto input = comments_jsonl(2000, 9, f.vocab);
  std::vector<std::string> lines;
  std::istringstream split(input);
  for (std::string l; std::getline(split, l);) lines.push_back(l);
  Rng rng(4);
  rng.shuffle(lines);
  std::string permuted;
  for (const auto& l : lines) permuted += l + "\n";

  const auto run = [&](const std::string& text, unsigned workers) {
    std::istringstream in(text);
    std::ostringstream out;
    score_corpus(in, out, scorer, ScoreFormat::Csv, workers);
    auto rows = read_rows(out.str());
    std::sort(rows.begin(), rows.end());
    return rows;
  };
  CHECK(run(input, 1) == run(permuted, 3));
}

TEST_CASE("score_corpus JSON lines output and label column") {
  Fixture f;
  const HateScorer scorer(f.model, f.hv, f.norm);
  const auto input = comments_jsonl(20, 10, f.vocab);
  std::istringstream in(input);
  std::ostringstream out;
  score_corpus(in, out, scorer, ScoreFormat::JsonLines, 1,
               [](double v) { return std::string(v > 0.5 ? "offensive" : "not_offensive"); });
  std::istringstream lines(out.str());
  int n = 0;
  for (std::string l; std::getline(lines, l); ++n) {
    const auto j = nlohmann::json::parse(l);
    CHECK(j.contains("offense_score"));
    CHECK(j["label"] == (j["offense_score"].get<double>() > 0.5 ? "offensive" : "not_offensive"));
  }
  CHECK(n == 20);
  CHECK(score_header(false) == "id,subreddit,author,score,created_utc,offense_score");
  CHECK(score_header(true) == "id,subreddit,author,score,created_utc,offense_score,label");
}
