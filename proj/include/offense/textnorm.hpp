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

#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace offense::textnorm {

// Ordered list of lowercase lemmas with stopwords removed.
using TokenSequence = std::vector<std::string>;

struct SuffixRule {
  std::string suffix;
  std::string replacement;  // equal to suffix marks a guard: matching words stay as-is
  std::size_t min_stem_length = 1;
};

struct NormalizerConfig {
  std::unordered_set<std::string> stopwords;
  std::unordered_map<std::string, std::string> lemma_exceptions;
  std::vector<SuffixRule> suffix_rules;  // priority order

  // Throws ConfigError on rules that could break idempotence: a replacement
  // that is not shorter than its suffix (unless it is a guard), replacement
  // text the tokenizer would split or strip, or exception chains that cycle.
  void validate() const;
};

// stopwords: one token per line, '#' comments. exceptions: token<TAB>lemma.
// rules: JSON array of {"suffix", "replacement", "min_stem"} in priority order.
NormalizerConfig load_config(const std::string& stopwords_path, const std::string& exceptions_path,
                             const std::string& rules_path);

// Loads stopwords.txt, lemma_exceptions.tsv and suffix_rules.json from `dir`.
NormalizerConfig load_config_dir(const std::string& dir);

// Config shipped under data/ in the source tree.
NormalizerConfig load_default_config();
std::string default_data_dir();

// Lowercases (locale-independent), splits on Unicode whitespace, strips
// leading/trailing punctuation, drops URLs and punctuation-only tokens.
std::vector<std::string> tokenize(std::string_view text);

// Locale-independent lowercase of a UTF-8 string (ASCII, Latin-1, Latin
// Extended-A, Greek, Cyrillic).
std::string lowercase(std::string_view text);

class Lemmatizer {
 public:
  virtual ~Lemmatizer() = default;
  // Must be idempotent: lemma(lemma(t)) == lemma(t).
  virtual std::string lemma(std::string_view token) const = 0;
};

// Exception map first, then the first applicable suffix rule, repeated until
// the word stops changing.
class RuleLemmatizer final : public Lemmatizer {
 public:
  explicit RuleLemmatizer(const NormalizerConfig& cfg);
  std::string lemma(std::string_view token) const override;

 private:
  std::unordered_map<std::string, std::string> exceptions_;
  std::vector<SuffixRule> rules_;
  std::size_t step_limit_;
};

class Normalizer {
 public:
  explicit Normalizer(NormalizerConfig cfg);
  Normalizer(NormalizerConfig cfg, std::shared_ptr<const Lemmatizer> lemmatizer);

  TokenSequence normalize(std::string_view text) const;
  bool is_stopword(std::string_view token) const;
  const NormalizerConfig& config() const { return cfg_; }

 private:
  NormalizerConfig cfg_;
  std::shared_ptr<const Lemmatizer> lemmatizer_;
};

TokenSequence normalize(std::string_view text, const NormalizerConfig& cfg);

}  // namespace offense::textnorm
