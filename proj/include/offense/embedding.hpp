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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "offense/string_map.hpp"
#include "offense/textnorm.hpp"

namespace offense::embedding {

struct VocabEntry {
  std::string word;
  std::uint64_t count = 0;

  bool operator==(const VocabEntry&) const = default;
};

// Words with their corpus frequency. Indices are dense and ordered by
// descending frequency, ties broken lexicographically.
class Vocabulary {
 public:
  Vocabulary() = default;
  // `entries` must already be in index order.
  Vocabulary(std::vector<VocabEntry> entries, std::uint64_t min_count, std::uint64_t total_tokens);

  std::optional<std::uint32_t> index_of(std::string_view word) const;
  const VocabEntry& entry(std::uint32_t index) const { return entries_[index]; }
  const std::vector<VocabEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::uint64_t min_count() const { return min_count_; }
  // Tokens seen while counting, including words later dropped.
  std::uint64_t total_tokens() const { return total_tokens_; }

  bool operator==(const Vocabulary& o) const { return entries_ == o.entries_ && min_count_ == o.min_count_ && total_tokens_ == o.total_tokens_; }

 private:
  std::vector<VocabEntry> entries_;
  StringMap<std::uint32_t> index_;
  std::uint64_t min_count_ = 1;
  std::uint64_t total_tokens_ = 0;
};

// Mergeable word counter, so shards can be counted independently.
class VocabCounter {
 public:
  void add(const textnorm::TokenSequence& seq);
  void add(std::string_view word, std::uint64_t n = 1);
  void merge(const VocabCounter& other);
  std::uint64_t total_tokens() const { return total_; }
  const StringMap<std::uint64_t>& counts() const { return counts_; }

  // Throws EmptyVocabulary if no word reaches min_count.
  Vocabulary finalize(std::uint64_t min_count) const;

 private:
  StringMap<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

Vocabulary build_vocab(std::span<const textnorm::TokenSequence> corpus, std::uint64_t min_count);

struct TrainConfig {
  std::uint32_t dim = 100;
  std::uint32_t window = 5;
  std::uint32_t negative_samples = 5;
  std::uint32_t epochs = 5;
  double initial_learning_rate = 0.025;
  double subsample_threshold = 1e-3;  // 0 disables subsampling
  std::uint64_t min_count = 25;
  std::uint64_t seed = 1;
  unsigned workers = 1;  // >1 trains Hogwild-style and is not bit-reproducible

  void validate() const;
};

struct TrainingMetadata {
  TrainConfig config;
  std::uint64_t corpus_hash = 0;
  std::uint64_t corpus_tokens = 0;    // in-vocabulary tokens trained on per epoch
  std::uint64_t corpus_sentences = 0;
};

// Sentences as vocabulary indices; out-of-vocabulary words already removed.
struct EncodedCorpus {
  std::vector<std::uint32_t> tokens;
  std::vector<std::size_t> offsets{0};  // sentence i is tokens[offsets[i], offsets[i+1])

  void add_sentence(const Vocabulary& vocab, const textnorm::TokenSequence& seq);
  std::size_t sentences() const { return offsets.size() - 1; }
  std::span<const std::uint32_t> sentence(std::size_t i) const {
    return std::span(tokens).subspan(offsets[i], offsets[i + 1] - offsets[i]);
  }
  std::uint64_t hash() const;
};

class EmbeddingModel {
 public:
  EmbeddingModel() = default;
  // `vectors` is row-major, vocab.size() x dim; every component must be finite.
  EmbeddingModel(Vocabulary vocab, std::uint32_t dim, std::vector<float> vectors,
                 std::optional<TrainingMetadata> metadata = std::nullopt);

  std::uint32_t dim() const { return dim_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  std::size_t size() const { return vocab_.size(); }

  // Row for an in-vocabulary word; nullopt otherwise.
  std::optional<std::span<const float>> vector(std::string_view word) const;
  std::span<const float> row(std::uint32_t index) const {
    return std::span(vectors_).subspan(static_cast<std::size_t>(index) * dim_, dim_);
  }
  const std::vector<float>& vectors() const { return vectors_; }
  const std::optional<TrainingMetadata>& metadata() const { return metadata_; }

  // FNV-1a 64 of the serialized model bytes; equals the trailing checksum of
  // the model file. Identifies the embedding for provenance checks.
  std::uint64_t content_hash() const { return content_hash_; }

 private:
  Vocabulary vocab_;
  std::uint32_t dim_ = 0;
  std::vector<float> vectors_;
  std::optional<TrainingMetadata> metadata_;
  std::uint64_t content_hash_ = 0;
};

// dot(a,b)/(|a||b|), 0 if either norm is 0. Accumulates in double.
double cosine(std::span<const float> a, std::span<const float> b);
double cosine(std::span<const double> a, std::span<const double> b);

// Skip-gram with negative sampling.
EmbeddingModel train(const EncodedCorpus& corpus, const Vocabulary& vocab, const TrainConfig& cfg);
EmbeddingModel train(std::span<const textnorm::TokenSequence> corpus, const TrainConfig& cfg);

// The seeded starting point of input vectors: uniform in [-0.5, 0.5) / dim.
std::vector<float> initial_vectors(std::size_t vocab_size, std::uint32_t dim, std::uint64_t seed);

// One SGNS step: center input row `in` against the positive output row and
// each negative output row. Applies lr * gradient of
//   log s(u_pos . v) + sum_k log s(-u_neg_k . v)
// to v and to every u, evaluated at the pre-step point (a negative row drawn
// twice sees its own earlier update).
// Throws NonFiniteUpdate if any dot product is not finite.
void sgns_step(std::span<float> in, std::span<float> out_pos, std::span<std::span<float>> out_negs, float lr);

// Writes the OFFEMB1 model file and a JSON sidecar `<path>.meta.json` with
// word counts and training metadata. Returns the file checksum.
std::uint64_t save(const EmbeddingModel& model, const std::string& path);

// Throws ModelFormatError / ChecksumMismatch. Loads the sidecar when present.
EmbeddingModel load(const std::string& path);

std::string metadata_path(const std::string& model_path);

}  // namespace offense::embedding
