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
#include <charconv>
#include <cmath>
#include <fstream>

#include "offense/classifier.hpp"
#include "offense/csv.hpp"
#include "offense/errors.hpp"

namespace offense::classifier {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t')) --e;
  return std::string(s.substr(b, e - b));
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (trim(header[i]) == name) return i;
  throw ConfigError("labeled dataset has no column '" + name + "'");
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

}  // namespace

std::string_view to_string(Label l) { return l == Label::Offensive ? "offensive" : "not_offensive"; }

Label parse_label(std::string_view s) {
  if (s == "offensive") return Label::Offensive;
  if (s == "not_offensive") return Label::NotOffensive;
  throw DataError("unknown label '" + std::string(s) + "'");
}

LabeledSample make_sample(double feature, Label label, double confidence) {
  LabeledSample s;
  s.features = {feature};
  s.label = label;
  s.confidence = confidence;
  return s;
}

std::vector<LabeledText> read_labeled_dataset(std::istream& in, const DatasetDescriptor& desc, DatasetStats* stats) {
  DatasetStats local;
  DatasetStats& st = stats ? *stats : local;
  st = {};
  CsvReader reader(in);
  auto header = reader.next();
  if (!header) return {};
  if (!header->empty() && header->front().rfind("\xEF\xBB\xBF", 0) == 0) header->front().erase(0, 3);
  const std::size_t text_col = column_index(*header, desc.text_column);
  const std::size_t class_col = column_index(*header, desc.class_column);
  const std::size_t conf_col = column_index(*header, desc.confidence_column);
  const std::size_t needed = std::max({text_col, class_col, conf_col}) + 1;

  std::vector<LabeledText> out;
  while (true) {
    std::optional<std::vector<std::string>> row;
    try {
      row = reader.next();
    } catch (const MalformedRow&) {
      ++st.rows;
      ++st.malformed;
      break;  // an unterminated quote consumes the rest of the file
    }
    if (!row) break;
    if (row->size() == 1 && (*row)[0].empty()) continue;
    ++st.rows;
    if (row->size() < needed) {
      ++st.malformed;
      continue;
    }
    const std::string cls = trim((*row)[class_col]);
    const std::string conf_text = trim((*row)[conf_col]);
    double conf = 0.0;
    auto res = std::from_chars(conf_text.data(), conf_text.data() + conf_text.size(), conf);
    if (conf_text.empty() || res.ec != std::errc() || res.ptr != conf_text.data() + conf_text.size() ||
        !(conf > 0.0 && conf <= 1.0)) {
      ++st.malformed;
      continue;
    }
    LabeledText t;
    if (contains(desc.offensive_classes, cls)) {
      t.label = Label::Offensive;
    } else if (contains(desc.not_offensive_classes, cls)) {
      t.label = Label::NotOffensive;
    } else {
      ++st.unknown_class;
      if (desc.strict_classes)
        throw UnknownClassLabel("unknown class '" + cls + "' on line " + std::to_string(reader.line()));
      continue;
    }
    t.text = std::move((*row)[text_col]);
    t.confidence = conf;
    out.push_back(std::move(t));
    ++st.loaded;
  }
  return out;
}

std::vector<LabeledText> load_labeled_dataset(const std::string& path, const DatasetDescriptor& desc,
                                              DatasetStats* stats) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open labeled dataset " + path);
  return read_labeled_dataset(in, desc, stats);
}

std::vector<LabeledSample> filter_by_confidence(std::span<const LabeledSample> samples, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("confidence threshold must be in [0, 1]");
  std::vector<LabeledSample> out;
  for (const auto& s : samples)
    if (s.confidence >= threshold) out.push_back(s);
  return out;
}

}  // namespace offense::classifier
