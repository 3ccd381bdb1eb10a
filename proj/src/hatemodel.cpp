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

#include "offense/hatemodel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "offense/binary_io.hpp"
#include "offense/corpus.hpp"
#include "offense/csv.hpp"
#include "offense/errors.hpp"
#include "offense/hash.hpp"
#include "offense/parallel.hpp"

namespace offense::hatemodel {

using nlohmann::ordered_json;

std::size_t OffensiveLexicon::add(std::string_view raw, const std::string& source, const textnorm::Normalizer& norm) {
  std::size_t added = 0;
  for (auto& w : norm.normalize(raw)) {
    const bool seen = std::any_of(entries_.begin(), entries_.end(), [&](const LexiconEntry& e) { return e.word == w; });
    if (seen) continue;
    entries_.push_back({std::move(w), source});
    ++added;
  }
  return added;
}

OffensiveLexicon load_lexicon(const std::vector<std::string>& paths, const textnorm::Normalizer& norm) {
  OffensiveLexicon lex;
  for (const auto& path : paths) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open lexicon " + path);
    const std::string source = std::filesystem::path(path).stem().string();
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      lex.add(line, source, norm);
    }
    lex.set_source_hash(source, hash_file(path));
  }
  if (lex.empty()) throw DataError("lexicon is empty after normalization");
  return lex;
}

std::uint64_t HateVector::content_hash() const {
  Fnv1a64 hash;
  for (double v : h) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    hash.update(&bits, sizeof(bits));
  }
  const std::uint64_t extra[2] = {contributing_count, embedding_hash};
  hash.update(extra, sizeof(extra));
  return hash.value();
}

HateVector build_hate_vector(const OffensiveLexicon& lexicon, const embedding::EmbeddingModel& model) {
  if (lexicon.empty()) throw DataError("empty lexicon");
  HateVector hv;
  hv.h.assign(model.dim(), 0.0);
  for (const auto& e : lexicon.entries()) {
    auto v = model.vector(e.word);
    if (!v) {
      hv.missing_words.push_back(e.word);
      continue;
    }
    for (std::size_t k = 0; k < hv.h.size(); ++k) hv.h[k] += (*v)[k];
    ++hv.contributing_count;
  }
  if (hv.contributing_count == 0)
    throw NoLexiconWordInVocabulary("none of the " + std::to_string(lexicon.size()) +
                                    " lexicon words is in the embedding vocabulary");
  for (auto& x : hv.h) x /= static_cast<double>(hv.contributing_count);
  hv.embedding_hash = model.content_hash();
  hv.lexicon_hashes = lexicon.source_hashes();
  return hv;
}

void save_hate_vector(const HateVector& hv, const std::string& path) {
  ordered_json doc;
  doc["format"] = "offense-hatevector-1";
  doc["dim"] = hv.h.size();
  doc["contributing_count"] = hv.contributing_count;
  doc["missing_count"] = hv.missing_words.size();
  doc["embedding_hash"] = hex64(hv.embedding_hash);
  auto lex = ordered_json::object();
  for (const auto& [source, hash] : hv.lexicon_hashes) lex[source] = hex64(hash);
  doc["lexicon_hashes"] = std::move(lex);
  doc["content_hash"] = hex64(hv.content_hash());
  doc["missing_words"] = hv.missing_words;
  doc["h"] = hv.h;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << doc.dump(2) << "\n";
  if (!out) throw DataError("write failed: " + path);
}

HateVector load_hate_vector(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open hate vector " + path);
  HateVector hv;
  try {
    const auto doc = nlohmann::json::parse(in);
    if (doc.at("format") != "offense-hatevector-1") throw DataError(path + ": unknown hate vector format");
    hv.h = doc.at("h").get<std::vector<double>>();
    hv.contributing_count = doc.at("contributing_count").get<std::size_t>();
    hv.missing_words = doc.at("missing_words").get<std::vector<std::string>>();
    hv.embedding_hash = std::stoull(doc.at("embedding_hash").get<std::string>(), nullptr, 16);
    for (const auto& [source, hash] : doc.at("lexicon_hashes").items())
      hv.lexicon_hashes[source] = std::stoull(hash.get<std::string>(), nullptr, 16);
    if (hv.h.size() != doc.at("dim").get<std::size_t>()) throw DataError(path + ": dim does not match vector length");
    if (hv.contributing_count == 0) throw DataError(path + ": contributing_count must be >= 1");
    if (doc.contains("content_hash") && doc["content_hash"].get<std::string>() != hex64(hv.content_hash()))
      throw DataError(path + ": content hash mismatch");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  return hv;
}

void check_provenance(const HateVector& hv, const embedding::EmbeddingModel& model) {
  if (hv.embedding_hash != model.content_hash())
    throw ProvenanceMismatch("hate vector was built on embedding " + hex64(hv.embedding_hash) +
                             " but the loaded embedding is " + hex64(model.content_hash()));
  if (hv.h.size() != model.dim())
    throw ProvenanceMismatch("hate vector dim " + std::to_string(hv.h.size()) + " != embedding dim " +
                             std::to_string(model.dim()));
}

HateScorer::HateScorer(const embedding::EmbeddingModel& model, HateVector hv, const textnorm::Normalizer& norm)
    : model_(model), hv_(std::move(hv)), norm_(norm) {
  check_provenance(hv_, model_);
  double sq = 0.0;
  for (double x : hv_.h) sq += x * x;
  h_norm_ = std::sqrt(sq);
}

double HateScorer::transform_tokens(const textnorm::TokenSequence& tokens) const {
  if (tokens.empty()) return 0.0;
  double best = -1.0;
  const std::size_t dim = hv_.h.size();
  for (const auto& tok : tokens) {
    double sim = 0.0;
    if (auto v = model_.vector(tok); v && h_norm_ > 0.0) {
      double dot = 0.0, nv = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double x = (*v)[k];
        dot += x * hv_.h[k];
        nv += x * x;
      }
      if (nv > 0.0) sim = std::clamp(dot / (std::sqrt(nv) * h_norm_), -1.0, 1.0);
    }
    best = std::max(best, sim);
  }
  distance_computations_.fetch_add(tokens.size(), std::memory_order_relaxed);
  return best;
}

double HateScorer::transform(std::string_view text) const { return transform_tokens(norm_.normalize(text)); }

double transform(std::string_view text, const embedding::EmbeddingModel& model, const HateVector& hv,
                 const textnorm::Normalizer& norm) {
  return HateScorer(model, hv, norm).transform(text);
}

std::string score_header(bool with_label) {
  return with_label ? "id,subreddit,author,score,created_utc,offense_score,label"
                    : "id,subreddit,author,score,created_utc,offense_score";
}

ScoreStats score_corpus(std::istream& in, std::ostream& out, const HateScorer& scorer, ScoreFormat format,
                        unsigned workers, const LabelFn& label) {
  if (format == ScoreFormat::Csv) out << score_header(static_cast<bool>(label)) << "\n";
  struct Shard {
    ScoreStats stats;
    std::string text;
  };
  ScoreStats total;
  process_line_shards<Shard>(
      in, workers, 2048,
      [&](const std::vector<std::string>& lines, std::size_t) {
        Shard s;
        for (const auto& line : lines) {
          if (line.empty()) continue;
          ++s.stats.read;
          corpus::RawComment c;
          try {
            c = corpus::parse_comment_line(line);
          } catch (const MalformedLine&) {
            ++s.stats.malformed;
            continue;
          }
          const double value = scorer.transform(c.body);
          ++s.stats.scored;
          if (format == ScoreFormat::Csv) {
            std::vector<std::string> fields{c.id, c.subreddit, c.author, std::to_string(c.score),
                                            std::to_string(c.created_utc), format_double(value)};
            if (label) fields.push_back(label(value));
            s.text += csv_row(fields);
          } else {
            ordered_json row;
            row["id"] = c.id;
            row["subreddit"] = c.subreddit;
            row["author"] = c.author;
            row["score"] = c.score;
            row["created_utc"] = c.created_utc;
            row["offense_score"] = value;
            if (label) row["label"] = label(value);
            s.text += row.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
          }
          s.text.push_back('\n');
        }
        return s;
      },
      [&](Shard&& s) {
        total.read += s.stats.read;
        total.malformed += s.stats.malformed;
        total.scored += s.stats.scored;
        out << s.text;
      });
  return total;
}

}  // namespace offense::hatemodel
