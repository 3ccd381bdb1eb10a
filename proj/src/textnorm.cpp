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

#include "offense/textnorm.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "offense/errors.hpp"

#ifndef OFFENSE_DATA_DIR
#define OFFENSE_DATA_DIR "data"
#endif

namespace offense::textnorm {

namespace {

constexpr char32_t kInvalid = 0xFFFFFFFF;

// Decodes one code point at s[i], advancing i. Malformed bytes decode to
// kInvalid and consume one byte.
char32_t decode(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return kInvalid;
  }
  if (i + len > s.size()) {
    ++i;
    return kInvalid;
  }
  for (int k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) {
      ++i;
      return kInvalid;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  i += len;
  return cp;
}

void encode(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_space(char32_t c) {
  switch (c) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200A;
  }
}

bool is_punct(char32_t c) {
  if (c < 0x80) return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
                       (c >= 0x7B && c <= 0x7E);
  return (c >= 0xA1 && c <= 0xBF) || c == 0xD7 || c == 0xF7 || (c >= 0x2010 && c <= 0x2027) ||
         (c >= 0x2030 && c <= 0x205E) || (c >= 0x3001 && c <= 0x303F) || (c >= 0xFF01 && c <= 0xFF0F) ||
         (c >= 0xFF1A && c <= 0xFF20);
}

char32_t fold(char32_t c) {
  if (c < 0x80) return (c >= 'A' && c <= 'Z') ? c + 0x20 : c;
  if (c == 0x2018 || c == 0x2019) return '\'';
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 0x20;
  if (c >= 0x100 && c <= 0x137) return c | 1;
  if ((c >= 0x139 && c <= 0x148) || (c >= 0x179 && c <= 0x17E)) return (c & 1) ? c + 1 : c;
  if (c >= 0x14A && c <= 0x177) return c | 1;
  if (c == 0x178) return 0xFF;
  if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 0x20;
  if (c >= 0x410 && c <= 0x42F) return c + 0x20;
  if (c >= 0x400 && c <= 0x40F) return c + 0x50;
  return c;
}

bool starts_with(const std::u32string& s, std::u32string_view prefix) {
  return s.size() >= prefix.size() && std::u32string_view(s).substr(0, prefix.size()) == prefix;
}

void flush_token(std::u32string& tok, std::vector<std::string>& out) {
  std::size_t b = 0, e = tok.size();
  while (b < e && is_punct(tok[b])) ++b;
  while (e > b && is_punct(tok[e - 1])) --e;
  if (b < e) {
    std::u32string core = tok.substr(b, e - b);
    if (!starts_with(core, U"http://") && !starts_with(core, U"https://") && !starts_with(core, U"www.")) {
      std::string utf8;
      utf8.reserve(core.size());
      for (char32_t c : core) {
        if (c == kInvalid)
          utf8 += "\xEF\xBF\xBD";
        else
          encode(c, utf8);
      }
      out.push_back(std::move(utf8));
    }
  }
  tok.clear();
}

// Last code point of a UTF-8 string, or kInvalid if empty.
char32_t last_code_point(std::string_view s) {
  if (s.empty()) return kInvalid;
  std::size_t start = s.size() - 1;
  while (start > 0 && (static_cast<unsigned char>(s[start]) & 0xC0) == 0x80) --start;
  std::size_t i = start;
  return decode(s, i);
}

std::size_t scalar_count(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char b : s)
    if ((b & 0xC0) != 0x80) ++n;
  return n;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool is_clean_token(std::string_view s) {
  auto toks = tokenize(s);
  return toks.size() == 1 && toks[0] == s;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string lowercase(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t start = i;
    const char32_t c = decode(text, i);
    if (c == kInvalid)
      out.append(text.substr(start, i - start));
    else
      encode(fold(c), out);
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::u32string tok;
  std::size_t i = 0;
  while (i < text.size()) {
    const char32_t c = decode(text, i);
    if (c != kInvalid && is_space(c)) {
      if (!tok.empty()) flush_token(tok, out);
    } else {
      tok.push_back(c == kInvalid ? c : fold(c));
    }
  }
  if (!tok.empty()) flush_token(tok, out);
  return out;
}

void NormalizerConfig::validate() const {
  for (const auto& r : suffix_rules) {
    if (r.suffix.empty()) throw ConfigError("suffix rule with empty suffix");
    if (r.min_stem_length < 1) throw ConfigError("suffix rule '" + r.suffix + "' needs min_stem >= 1");
    if (r.replacement != r.suffix && r.replacement.size() >= r.suffix.size())
      throw ConfigError("suffix rule '" + r.suffix + "' -> '" + r.replacement + "' does not shorten the word");
    std::size_t i = 0;
    while (i < r.replacement.size()) {
      const char32_t c = decode(r.replacement, i);
      if (c == kInvalid || is_space(c) || is_punct(c) || fold(c) != c)
        throw ConfigError("suffix rule replacement '" + r.replacement + "' must be lowercase word characters");
    }
  }
  for (const auto& [from, to] : lemma_exceptions) {
    if (!is_clean_token(to)) throw ConfigError("lemma exception target '" + to + "' is not a normalized token");
    std::unordered_set<std::string> seen{from};
    std::string w = to;
    while (true) {
      auto it = lemma_exceptions.find(w);
      if (it == lemma_exceptions.end() || it->second == w) break;
      if (!seen.insert(w).second) throw ConfigError("lemma exception cycle through '" + w + "'");
      w = it->second;
    }
  }
}

NormalizerConfig load_config(const std::string& stopwords_path, const std::string& exceptions_path,
                             const std::string& rules_path) {
  NormalizerConfig cfg;
  {
    std::istringstream in(read_file(stopwords_path));
    std::string line;
    while (std::getline(in, line)) {
      if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      for (auto& t : tokenize(line)) cfg.stopwords.insert(std::move(t));
    }
  }
  {
    std::istringstream in(read_file(exceptions_path));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw ConfigError(exceptions_path + ":" + std::to_string(line_no) + ": expected token<TAB>lemma");
      cfg.lemma_exceptions[lowercase(line.substr(0, tab))] = lowercase(line.substr(tab + 1));
    }
  }
  {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(read_file(rules_path));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(rules_path + ": " + e.what());
    }
    if (!doc.is_array()) throw ConfigError(rules_path + ": expected a JSON array");
    for (const auto& r : doc) {
      try {
        cfg.suffix_rules.push_back(SuffixRule{r.at("suffix").get<std::string>(), r.at("replacement").get<std::string>(),
                                              r.value("min_stem", std::size_t{1})});
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(rules_path + ": bad rule: " + e.what());
      }
    }
  }
  cfg.validate();
  return cfg;
}

std::string default_data_dir() { return OFFENSE_DATA_DIR; }

NormalizerConfig load_config_dir(const std::string& dir) {
  return load_config(dir + "/stopwords.txt", dir + "/lemma_exceptions.tsv", dir + "/suffix_rules.json");
}

NormalizerConfig load_default_config() { return load_config_dir(default_data_dir()); }

RuleLemmatizer::RuleLemmatizer(const NormalizerConfig& cfg)
    : exceptions_(cfg.lemma_exceptions), rules_(cfg.suffix_rules), step_limit_(cfg.lemma_exceptions.size() + 2) {}

std::string RuleLemmatizer::lemma(std::string_view token) const {
  std::string w(token);
  // Each rule shortens the word, so the loop is bounded by the word length
  // plus the number of exception hops.
  for (std::size_t steps = 0; steps < step_limit_ + token.size() * 4 + 4; ++steps) {
    if (auto it = exceptions_.find(w); it != exceptions_.end()) {
      if (it->second == w) break;
      w = it->second;
      continue;
    }
    bool changed = false;
    bool guarded = false;
    for (const auto& rule : rules_) {
      if (!ends_with(w, rule.suffix)) continue;
      std::string_view stem = std::string_view(w).substr(0, w.size() - rule.suffix.size());
      if (scalar_count(stem) < rule.min_stem_length) continue;
      const char32_t last = last_code_point(stem);
      if (last == kInvalid || is_punct(last)) continue;
      if (rule.replacement == rule.suffix) {
        guarded = true;
      } else {
        w = std::string(stem) + rule.replacement;
        changed = true;
      }
      break;
    }
    if (!changed || guarded) break;
  }
  return w;
}

Normalizer::Normalizer(NormalizerConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  lemmatizer_ = std::make_shared<RuleLemmatizer>(cfg_);
}

Normalizer::Normalizer(NormalizerConfig cfg, std::shared_ptr<const Lemmatizer> lemmatizer)
    : cfg_(std::move(cfg)), lemmatizer_(std::move(lemmatizer)) {}

bool Normalizer::is_stopword(std::string_view token) const { return cfg_.stopwords.count(std::string(token)) > 0; }

TokenSequence Normalizer::normalize(std::string_view text) const {
  TokenSequence out;
  for (auto& tok : tokenize(text)) {
    if (cfg_.stopwords.count(tok)) continue;
    std::string lemma = lemmatizer_->lemma(tok);
    // A lemma can land on a stopword ("being" -> "be"); dropping it keeps the
    // output free of stopwords and re-normalization a fixed point.
    if (cfg_.stopwords.count(lemma)) continue;
    out.push_back(std::move(lemma));
  }
  return out;
}

TokenSequence normalize(std::string_view text, const NormalizerConfig& cfg) { return Normalizer(cfg).normalize(text); }

}  // namespace offense::textnorm
