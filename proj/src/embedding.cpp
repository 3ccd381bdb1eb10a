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

#include "offense/embedding.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "offense/binary_io.hpp"
#include "offense/errors.hpp"
#include "offense/hash.hpp"
#include "offense/rng.hpp"

namespace offense::embedding {

namespace {

constexpr char kMagic[8] = {'O', 'F', 'F', 'E', 'M', 'B', '1', '\0'};

// Hashes the same byte sequence ChecksumWriter would emit.
class HashSink {
 public:
  void bytes(const void* d, std::size_t n) { h_.update(d, n); }
  void bytes(std::string_view s) { h_.update(s); }
  void u16(std::uint16_t v) { le(v); }
  void u32(std::uint32_t v) { le(v); }
  void u64(std::uint64_t v) { le(v); }
  void f32(float v) { le(std::bit_cast<std::uint32_t>(v)); }
  std::uint64_t value() const { return h_.value(); }

 private:
  template <typename U>
  void le(U v) {
    unsigned char b[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    h_.update(b, sizeof(U));
  }
  Fnv1a64 h_;
};

template <typename Sink>
void write_payload(const Vocabulary& vocab, std::uint32_t dim, const std::vector<float>& vectors, Sink& sink) {
  sink.bytes(kMagic, sizeof(kMagic));
  sink.u32(dim);
  sink.u64(vocab.size());
  for (std::uint32_t i = 0; i < vocab.size(); ++i) {
    const std::string& w = vocab.entry(i).word;
    if (w.size() > 0xFFFF) throw DataError("word longer than 65535 bytes cannot be stored");
    sink.u16(static_cast<std::uint16_t>(w.size()));
    sink.bytes(w);
    const float* row = vectors.data() + static_cast<std::size_t>(i) * dim;
    for (std::uint32_t k = 0; k < dim; ++k) sink.f32(row[k]);
  }
}

bool less_by_frequency(const VocabEntry& a, const VocabEntry& b) {
  if (a.count != b.count) return a.count > b.count;
  return a.word < b.word;
}

// Component access for the shared (Hogwild) path goes through atomic_ref so
// concurrent updates are data-race-free; each float is read and written whole.
template <bool kShared>
struct Access {
  static float load(float& x) {
    if constexpr (kShared)
      return std::atomic_ref<float>(x).load(std::memory_order_relaxed);
    else
      return x;
  }
  static void store(float& x, float v) {
    if constexpr (kShared)
      std::atomic_ref<float>(x).store(v, std::memory_order_relaxed);
    else
      x = v;
  }
};

template <bool kShared>
void sgns_kernel(float* in, float* const* outs_begin, std::size_t n_outs, std::size_t dim, float lr,
                 float* scratch) {
  using A = Access<kShared>;
  std::fill(scratch, scratch + dim, 0.0f);
  for (std::size_t j = 0; j < n_outs; ++j) {
    float* out = outs_begin[j];
    const float label = j == 0 ? 1.0f : 0.0f;
    float f = 0.0f;
    for (std::size_t k = 0; k < dim; ++k) f += A::load(in[k]) * A::load(out[k]);
    if (!std::isfinite(f)) throw NonFiniteUpdate("non-finite dot product during SGNS update; lower the learning rate");
    const float g = (label - 1.0f / (1.0f + std::exp(-f))) * lr;
    for (std::size_t k = 0; k < dim; ++k) scratch[k] += g * A::load(out[k]);
    for (std::size_t k = 0; k < dim; ++k) A::store(out[k], A::load(out[k]) + g * A::load(in[k]));
  }
  for (std::size_t k = 0; k < dim; ++k) A::store(in[k], A::load(in[k]) + scratch[k]);
}

// Table of word indices with multiplicity proportional to count^0.75.
std::vector<std::uint32_t> unigram_table(const Vocabulary& vocab) {
  const std::size_t size = std::clamp<std::size_t>(vocab.size() * 1000, 100000, 100000000);
  std::vector<std::uint32_t> table(size);
  double norm = 0.0;
  for (const auto& e : vocab.entries()) norm += std::pow(static_cast<double>(e.count), 0.75);
  std::uint32_t w = 0;
  double cum = std::pow(static_cast<double>(vocab.entry(0).count), 0.75) / norm;
  for (std::size_t a = 0; a < size; ++a) {
    table[a] = w;
    if (static_cast<double>(a) / static_cast<double>(size) > cum && w + 1 < vocab.size()) {
      ++w;
      cum += std::pow(static_cast<double>(vocab.entry(w).count), 0.75) / norm;
    }
  }
  return table;
}

struct TrainState {
  const EncodedCorpus& corpus;
  const Vocabulary& vocab;
  const TrainConfig& cfg;
  std::vector<float>& input;
  std::vector<float> output;
  std::vector<std::uint32_t> table;
  std::vector<double> keep_prob;
  std::uint64_t total_work = 0;
  std::atomic<std::uint64_t> processed{0};
};

template <bool kShared>
void train_range(TrainState& st, std::size_t first, std::size_t last, std::uint64_t seed) {
  const std::size_t dim = st.cfg.dim;
  const double lr0 = st.cfg.initial_learning_rate;
  Rng rng(seed);
  std::vector<float> scratch(dim);
  std::vector<std::uint32_t> kept;
  std::vector<float*> outs;
  outs.reserve(st.cfg.negative_samples + 1);
  for (std::size_t s = first; s < last; ++s) {
    const auto sentence = st.corpus.sentence(s);
    const std::uint64_t done = st.processed.fetch_add(sentence.size(), std::memory_order_relaxed);
    float lr = static_cast<float>(lr0 * (1.0 - static_cast<double>(done) / static_cast<double>(st.total_work + 1)));
    lr = std::max(lr, static_cast<float>(lr0 * 1e-4));

    kept.clear();
    for (std::uint32_t w : sentence) {
      if (st.keep_prob[w] >= 1.0 || rng.uniform() < st.keep_prob[w]) kept.push_back(w);
    }
    for (std::size_t pos = 0; pos < kept.size(); ++pos) {
      const std::size_t reach = st.cfg.window - static_cast<std::size_t>(rng.below(st.cfg.window));
      const std::size_t lo = pos >= reach ? pos - reach : 0;
      const std::size_t hi = std::min(kept.size() - 1, pos + reach);
      float* in = st.input.data() + static_cast<std::size_t>(kept[pos]) * dim;
      for (std::size_t c = lo; c <= hi; ++c) {
        if (c == pos) continue;
        const std::uint32_t context = kept[c];
        outs.clear();
        outs.push_back(st.output.data() + static_cast<std::size_t>(context) * dim);
        for (std::uint32_t k = 0; k < st.cfg.negative_samples; ++k) {
          const std::uint32_t neg = st.table[rng.below(st.table.size())];
          if (neg == context) continue;
          outs.push_back(st.output.data() + static_cast<std::size_t>(neg) * dim);
        }
        sgns_kernel<kShared>(in, outs.data(), outs.size(), dim, lr, scratch.data());
      }
    }
  }
}

}  // namespace

Vocabulary::Vocabulary(std::vector<VocabEntry> entries, std::uint64_t min_count, std::uint64_t total_tokens)
    : entries_(std::move(entries)), min_count_(min_count), total_tokens_(total_tokens) {
  index_.reserve(entries_.size());
  for (std::uint32_t i = 0; i < entries_.size(); ++i) {
    if (!index_.emplace(entries_[i].word, i).second)
      throw ModelFormatError("duplicate vocabulary word '" + entries_[i].word + "'");
  }
}

std::optional<std::uint32_t> Vocabulary::index_of(std::string_view word) const {
  auto it = index_.find(word);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void VocabCounter::add(const textnorm::TokenSequence& seq) {
  for (const auto& w : seq) add(w);
}

void VocabCounter::add(std::string_view word, std::uint64_t n) {
  auto it = counts_.find(word);
  if (it == counts_.end())
    counts_.emplace(std::string(word), n);
  else
    it->second += n;
  total_ += n;
}

void VocabCounter::merge(const VocabCounter& other) {
  for (const auto& [w, n] : other.counts_) counts_[w] += n;
  total_ += other.total_;
}

Vocabulary VocabCounter::finalize(std::uint64_t min_count) const {
  std::vector<VocabEntry> entries;
  for (const auto& [w, n] : counts_)
    if (n >= min_count) entries.push_back({w, n});
  if (entries.empty())
    throw EmptyVocabulary("no word occurs at least " + std::to_string(min_count) + " times");
  std::sort(entries.begin(), entries.end(), less_by_frequency);
  return Vocabulary(std::move(entries), min_count, total_);
}

Vocabulary build_vocab(std::span<const textnorm::TokenSequence> corpus, std::uint64_t min_count) {
  VocabCounter counter;
  for (const auto& seq : corpus) counter.add(seq);
  return counter.finalize(min_count);
}

void TrainConfig::validate() const {
  if (dim < 1) throw ConfigError("dim must be >= 1");
  if (window < 1) throw ConfigError("window must be >= 1");
  if (negative_samples < 1) throw ConfigError("negative_samples must be >= 1");
  if (!(initial_learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (subsample_threshold < 0.0) throw ConfigError("subsample threshold must be >= 0");
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
}

void EncodedCorpus::add_sentence(const Vocabulary& vocab, const textnorm::TokenSequence& seq) {
  for (const auto& w : seq)
    if (auto idx = vocab.index_of(w)) tokens.push_back(*idx);
  offsets.push_back(tokens.size());
}

std::uint64_t EncodedCorpus::hash() const {
  Fnv1a64 h;
  h.update(tokens.data(), tokens.size() * sizeof(std::uint32_t));
  for (std::size_t o : offsets) {
    const std::uint64_t v = o;
    h.update(&v, sizeof(v));
  }
  return h.value();
}

EmbeddingModel::EmbeddingModel(Vocabulary vocab, std::uint32_t dim, std::vector<float> vectors,
                               std::optional<TrainingMetadata> metadata)
    : vocab_(std::move(vocab)), dim_(dim), vectors_(std::move(vectors)), metadata_(std::move(metadata)) {
  if (dim_ == 0) throw ModelFormatError("embedding dimension must be >= 1");
  if (vectors_.size() != vocab_.size() * static_cast<std::size_t>(dim_))
    throw ModelFormatError("vector matrix does not match vocabulary size x dim");
  for (float v : vectors_)
    if (!std::isfinite(v)) throw ModelFormatError("embedding holds a non-finite component");
  HashSink sink;
  write_payload(vocab_, dim_, vectors_, sink);
  content_hash_ = sink.value();
}

std::optional<std::span<const float>> EmbeddingModel::vector(std::string_view word) const {
  auto idx = vocab_.index_of(word);
  if (!idx) return std::nullopt;
  return row(*idx);
}

template <typename T>
static double cosine_impl(std::span<const T> a, std::span<const T> b) {
  const std::size_t n = std::min(a.size(), b.size());
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a[i], y = b[i];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

double cosine(std::span<const float> a, std::span<const float> b) { return cosine_impl(a, b); }
double cosine(std::span<const double> a, std::span<const double> b) { return cosine_impl(a, b); }

std::vector<float> initial_vectors(std::size_t vocab_size, std::uint32_t dim, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "embedding-init"));
  std::vector<float> v(vocab_size * dim);
  for (auto& x : v) x = static_cast<float>((rng.uniform() - 0.5) / dim);
  return v;
}

void sgns_step(std::span<float> in, std::span<float> out_pos, std::span<std::span<float>> out_negs, float lr) {
  std::vector<float*> outs;
  outs.push_back(out_pos.data());
  for (auto& n : out_negs) outs.push_back(n.data());
  std::vector<float> scratch(in.size());
  sgns_kernel<false>(in.data(), outs.data(), outs.size(), in.size(), lr, scratch.data());
}

EmbeddingModel train(const EncodedCorpus& corpus, const Vocabulary& vocab, const TrainConfig& cfg) {
  cfg.validate();
  if (vocab.empty()) throw EmptyVocabulary("empty vocabulary");
  std::vector<float> input = initial_vectors(vocab.size(), cfg.dim, cfg.seed);

  TrainState st{corpus, vocab, cfg, input, {}, {}, {}};
  st.output.assign(input.size(), 0.0f);
  st.table = unigram_table(vocab);
  std::uint64_t in_vocab_tokens = corpus.tokens.size();
  st.keep_prob.resize(vocab.size(), 1.0);
  if (cfg.subsample_threshold > 0.0 && in_vocab_tokens > 0) {
    const double t = cfg.subsample_threshold * static_cast<double>(in_vocab_tokens);
    for (std::uint32_t i = 0; i < vocab.size(); ++i) {
      const double f = static_cast<double>(vocab.entry(i).count);
      st.keep_prob[i] = (std::sqrt(f / t) + 1.0) * t / f;
    }
  }
  st.total_work = static_cast<std::uint64_t>(cfg.epochs) * in_vocab_tokens;

  const std::size_t n = corpus.sentences();
  const unsigned workers = std::max(1u, cfg.workers);
  for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (workers == 1) {
      train_range<false>(st, 0, n, derive_seed(cfg.seed, epoch));
    } else {
      std::vector<std::jthread> threads;
      std::vector<std::exception_ptr> errors(workers);
      for (unsigned w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
          try {
            train_range<true>(st, n * w / workers, n * (w + 1) / workers,
                              derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch) * workers + w));
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
      threads.clear();
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    }
  }

  TrainingMetadata meta;
  meta.config = cfg;
  meta.corpus_hash = corpus.hash();
  meta.corpus_tokens = in_vocab_tokens;
  meta.corpus_sentences = n;
  return EmbeddingModel(vocab, cfg.dim, std::move(input), meta);
}

EmbeddingModel train(std::span<const textnorm::TokenSequence> corpus, const TrainConfig& cfg) {
  cfg.validate();
  Vocabulary vocab = build_vocab(corpus, cfg.min_count);
  EncodedCorpus encoded;
  for (const auto& seq : corpus) encoded.add_sentence(vocab, seq);
  return train(encoded, vocab, cfg);
}

std::string metadata_path(const std::string& model_path) { return model_path + ".meta.json"; }

std::uint64_t save(const EmbeddingModel& model, const std::string& path) {
  ChecksumWriter out(path);
  write_payload(model.vocabulary(), model.dim(), model.vectors(), out);
  const std::uint64_t sum = out.finish();

  nlohmann::ordered_json meta;
  meta["format"] = "OFFEMB1";
  meta["checksum"] = hex64(sum);
  meta["dim"] = model.dim();
  meta["vocab_size"] = model.size();
  meta["min_count"] = model.vocabulary().min_count();
  meta["total_tokens"] = model.vocabulary().total_tokens();
  auto counts = nlohmann::ordered_json::array();
  for (const auto& e : model.vocabulary().entries()) counts.push_back(e.count);
  meta["counts"] = std::move(counts);
  if (const auto& m = model.metadata()) {
    const auto& c = m->config;
    meta["training"] = {{"dim", c.dim},
                        {"window", c.window},
                        {"negative_samples", c.negative_samples},
                        {"epochs", c.epochs},
                        {"initial_learning_rate", c.initial_learning_rate},
                        {"subsample_threshold", c.subsample_threshold},
                        {"min_count", c.min_count},
                        {"seed", c.seed},
                        {"workers", c.workers},
                        {"corpus_hash", hex64(m->corpus_hash)},
                        {"corpus_tokens", m->corpus_tokens},
                        {"corpus_sentences", m->corpus_sentences}};
  }
  std::ofstream side(metadata_path(path), std::ios::trunc);
  if (!side) throw DataError("cannot write " + metadata_path(path));
  side << meta.dump(2) << "\n";
  return sum;
}

EmbeddingModel load(const std::string& path) {
  ChecksumReader in = ChecksumReader::open(path);
  char magic[8];
  in.bytes(magic, sizeof(magic));
  if (!std::equal(magic, magic + 8, kMagic)) throw ModelFormatError(path + ": not an OFFEMB1 model file");
  const std::uint32_t dim = in.u32();
  const std::uint64_t n = in.u64();
  if (dim == 0) throw ModelFormatError(path + ": zero dimension");
  // Each entry needs at least 2 + 4*dim bytes; reject absurd counts before allocating.
  if (n > in.remaining() / (2 + 4ull * dim)) throw ModelFormatError(path + ": vocabulary size exceeds file size");
  std::vector<VocabEntry> entries(n);
  std::vector<float> vectors(n * dim);
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint16_t len = in.u16();
    entries[i].word = in.string(len);
    for (std::uint32_t k = 0; k < dim; ++k) vectors[i * dim + k] = in.f32();
  }
  in.expect_end();

  std::uint64_t min_count = 1, total = 0;
  std::optional<TrainingMetadata> meta;
  const std::string side_path = metadata_path(path);
  if (std::filesystem::exists(side_path)) {
    std::ifstream side(side_path);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(side);
      if (doc.at("checksum").get<std::string>() == hex64(in.checksum())) {
        const auto& counts = doc.at("counts");
        if (counts.size() != n) throw ModelFormatError(side_path + ": count list does not match vocabulary");
        for (std::uint64_t i = 0; i < n; ++i) entries[i].count = counts[i].get<std::uint64_t>();
        min_count = doc.at("min_count").get<std::uint64_t>();
        total = doc.at("total_tokens").get<std::uint64_t>();
        if (doc.contains("training")) {
          const auto& t = doc["training"];
          TrainingMetadata m;
          m.config.dim = t.at("dim");
          m.config.window = t.at("window");
          m.config.negative_samples = t.at("negative_samples");
          m.config.epochs = t.at("epochs");
          m.config.initial_learning_rate = t.at("initial_learning_rate");
          m.config.subsample_threshold = t.at("subsample_threshold");
          m.config.min_count = t.at("min_count");
          m.config.seed = t.at("seed");
          m.config.workers = t.at("workers");
          m.corpus_hash = std::stoull(t.at("corpus_hash").get<std::string>(), nullptr, 16);
          m.corpus_tokens = t.at("corpus_tokens");
          m.corpus_sentences = t.at("corpus_sentences");
          meta = m;
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw ModelFormatError(side_path + ": " + e.what());
    }
  }
  return EmbeddingModel(Vocabulary(std::move(entries), min_count, total), dim, std::move(vectors), meta);
}

}  // namespace offense::embedding
