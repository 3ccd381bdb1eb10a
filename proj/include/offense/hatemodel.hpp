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

#include <atomic>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "offense/embedding.hpp"
#include "offense/textnorm.hpp"

namespace offense::hatemodel {

struct LexiconEntry {
  std::string word;    // normalized unigram
  std::string source;  // lexicon file stem, e.g. "hate", "offensive"
};

// Deduplicated normalized unigrams in first-seen order.
class OffensiveLexicon {
 public:
  // Normalizes `raw` and adds each resulting unigram not already present.
  // Returns the number of unigrams added.
  std::size_t add(std::string_view raw, const std::string& source, const textnorm::Normalizer& norm);
  void set_source_hash(const std::string& source, std::uint64_t hash) { source_hashes_[source] = hash; }

  const std::vector<LexiconEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::map<std::string, std::uint64_t>& source_hashes() const { return source_hashes_; }

 private:
  std::vector<LexiconEntry> entries_;
  std::map<std::string, std::uint64_t> source_hashes_;
};

// One entry per line, lines starting with '#' ignored. The source tag is the
// file stem; the file's content hash is recorded for provenance.
OffensiveLexicon load_lexicon(const std::vector<std::string>& paths, const textnorm::Normalizer& norm);

struct HateVector {
  std::vector<double> h;
  std::size_t contributing_count = 0;
  std::vector<std::string> missing_words;  // lexicon words absent from the vocabulary
  std::uint64_t embedding_hash = 0;
  std::map<std::string, std::uint64_t> lexicon_hashes;

  // Hash over h, the counts and the embedding hash. Recorded by classifiers
  // trained on scores from this vector.
  std::uint64_t content_hash() const;
};

// Mean of the vectors of in-vocabulary lexicon words. Throws
// NoLexiconWordInVocabulary when none is found.
HateVector build_hate_vector(const OffensiveLexicon& lexicon, const embedding::EmbeddingModel& model);

void save_hate_vector(const HateVector& hv, const std::string& path);
HateVector load_hate_vector(const std::string& path);

// Throws ProvenanceMismatch unless hv was built on `model`.
void check_provenance(const HateVector& hv, const embedding::EmbeddingModel& model);

// Maximum cosine similarity between the hate vector and any token of the
// normalized text; out-of-vocabulary tokens contribute cos(0, H) = 0, and a
// text with no tokens scores 0.
class HateScorer {
 public:
  // Throws ProvenanceMismatch. The model and normalizer must outlive the scorer.
  HateScorer(const embedding::EmbeddingModel& model, HateVector hv, const textnorm::Normalizer& norm);

  double transform(std::string_view text) const;
  double transform_tokens(const textnorm::TokenSequence& tokens) const;

  const HateVector& hate_vector() const { return hv_; }
  const embedding::EmbeddingModel& model() const { return model_; }
  const textnorm::Normalizer& normalizer() const { return norm_; }

  // Number of token-to-hate-vector similarity evaluations since construction.
  std::uint64_t distance_computations() const { return distance_computations_.load(std::memory_order_relaxed); }

 private:
  const embedding::EmbeddingModel& model_;
  HateVector hv_;
  const textnorm::Normalizer& norm_;
  double h_norm_ = 0.0;
  mutable std::atomic<std::uint64_t> distance_computations_{0};
};

double transform(std::string_view text, const embedding::EmbeddingModel& model, const HateVector& hv,
                 const textnorm::Normalizer& norm);

enum class ScoreFormat { Csv, JsonLines };

struct ScoreStats {
  std::uint64_t read = 0;
  std::uint64_t malformed = 0;
  std::uint64_t scored = 0;
};

// Optional per-score label column (e.g. a classifier vote).
using LabelFn = std::function<std::string(double)>;

// CSV header (without label): id,subreddit,author,score,created_utc,offense_score
std::string score_header(bool with_label);

// Reads ingested JSON lines and writes one score row per well-formed comment
// in input order; malformed lines are counted and skipped.
ScoreStats score_corpus(std::istream& in, std::ostream& out, const HateScorer& scorer, ScoreFormat format,
                        unsigned workers = 1, const LabelFn& label = nullptr);

}  // namespace offense::hatemodel
