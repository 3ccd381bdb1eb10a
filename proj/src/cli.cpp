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

#include "offense/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "offense/analytics.hpp"
#include "offense/binary_io.hpp"
#include "offense/corpus.hpp"
#include "offense/csv.hpp"
#include "offense/embedding.hpp"
#include "offense/errors.hpp"
#include "offense/hash.hpp"
#include "offense/parallel.hpp"
#include "offense/textnorm.hpp"

namespace offense::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<classifier::LabeledSample> featurize(const std::vector<classifier::LabeledText>& texts,
                                                 const hatemodel::HateScorer& scorer, unsigned workers) {
  std::vector<classifier::LabeledSample> out(texts.size());
  constexpr std::size_t kChunk = 256;
  const std::size_t chunks = (texts.size() + kChunk - 1) / kChunk;
  parallel_for(chunks, workers, [&](std::size_t c) {
    const std::size_t end = std::min(texts.size(), (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      out[i] = classifier::make_sample(scorer.transform(texts[i].text), texts[i].label, texts[i].confidence);
    }
  });
  return out;
}

namespace {

// Reads a JSON object as CLI11 config: top-level keys are global options,
// nested objects are subcommand sections.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    json j = json::object();
    for (const CLI::Option* opt : app->get_options()) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const std::string& name = opt->get_lnames().front();
      if (opt->count() > 0) {
        j[name] = opt->results().size() == 1 ? json(opt->results().front()) : json(opt->results());
      } else if (default_also && !opt->get_default_str().empty()) {
        j[name] = opt->get_default_str();
      }
    }
    return j.dump(2) + "\n";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    flatten(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void flatten(const json& obj, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : obj.items()) {
      if (value.is_object()) {
        auto nested = parents;
        nested.push_back(key);
        flatten(value, nested, items);
        continue;
      }
      if (value.is_null()) continue;
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
  }
};

struct Globals {
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::string out_dir = ".";
  std::string data_dir = textnorm::default_data_dir();
};

std::uint64_t stage_seed(const Globals& g, std::string_view stage) { return derive_seed(g.seed, stage); }

json file_ref(const std::string& path) { return {{"path", path}, {"fnv1a64", hex64(hash_file(path))}}; }

json resolved_options(const CLI::App& app) {
  json j = json::object();
  for (const CLI::Option* opt : app.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    const bool flag = opt->get_expected_min() == 0;
    if (flag) {
      j[name] = opt->count() > 0 && opt->as<bool>();
    } else if (opt->count() > 0) {
      const auto& r = opt->results();
      if (opt->get_expected_max() > 1) {
        j[name] = r;
      } else {
        j[name] = r.back();
      }
    } else if (!opt->get_default_str().empty()) {
      j[name] = opt->get_default_str();
    } else {
      j[name] = nullptr;
    }
  }
  return j;
}

// Adds or replaces one stage entry in <out-dir>/manifest.json.
void record_stage(const Globals& g, const std::string& stage, json entry) {
  fs::create_directories(g.out_dir);
  const std::string path = (fs::path(g.out_dir) / "manifest.json").string();
  json manifest;
  if (fs::exists(path)) {
    try {
      manifest = json::parse(read_file(path));
    } catch (const json::exception&) {
      manifest = json();
    }
  }
  if (!manifest.is_object() || manifest.value("format", "") != "offense-manifest-1") {
    manifest = {{"format", "offense-manifest-1"}, {"stages", json::object()}};
  }
  manifest["stages"][stage] = std::move(entry);
  write_file_atomic(path, manifest.dump(2) + "\n");
}

json stage_entry(const Globals& g, std::string_view stage, const CLI::App& app, const CLI::App& root) {
  json e;
  e["seed"] = g.seed;
  e["stage_seed"] = hex64(stage_seed(g, stage));
  e["workers"] = g.workers;
  e["global_options"] = resolved_options(root);
  e["options"] = resolved_options(app);
  return e;
}

json normalizer_ref(const Globals& g) {
  json j = json::object();
  for (const char* name : {"stopwords.txt", "lemma_exceptions.tsv", "suffix_rules.json"}) {
    j[name] = file_ref((fs::path(g.data_dir) / name).string());
  }
  return j;
}

// Output file written under a temporary name and renamed on commit; removed
// if the stage fails first.
class PendingFile {
 public:
  explicit PendingFile(std::string path) : path_(std::move(path)), tmp_(path_ + ".partial") {
    if (auto parent = fs::path(path_).parent_path(); !parent.empty()) fs::create_directories(parent);
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!out_) throw DataError("cannot open " + tmp_ + " for writing");
  }
  PendingFile(const PendingFile&) = delete;
  PendingFile& operator=(const PendingFile&) = delete;
  ~PendingFile() {
    if (!committed_) {
      out_.close();
      std::error_code ec;
      fs::remove(tmp_, ec);
    }
  }

  std::ostream& stream() { return out_; }

  void commit() {
    out_.flush();
    if (!out_) throw DataError("write failed: " + tmp_);
    out_.close();
    fs::rename(tmp_, path_);
    committed_ = true;
  }

 private:
  std::string path_, tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

// Removes the listed paths unless released.
class Cleanup {
 public:
  explicit Cleanup(std::vector<std::string> paths) : paths_(std::move(paths)) {}
  ~Cleanup() {
    std::error_code ec;
    for (const auto& p : paths_) fs::remove(p, ec);
  }
  void release() { paths_.clear(); }

 private:
  std::vector<std::string> paths_;
};

std::string default_path(const Globals& g, const std::string& given, const char* name) {
  return given.empty() ? (fs::path(g.out_dir) / name).string() : given;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open input " + path);
  return in;
}

textnorm::Normalizer make_normalizer(const Globals& g) {
  return textnorm::Normalizer(textnorm::load_config_dir(g.data_dir));
}

json metrics_json(const classifier::Metrics& m) {
  return {{"accuracy", m.accuracy},
          {"precision", m.precision},
          {"recall", m.recall},
          {"f1", m.f1},
          {"tp", m.tp},
          {"fp", m.fp},
          {"tn", m.tn},
          {"fn", m.fn},
          {"precision_undefined", m.precision_undefined},
          {"recall_undefined", m.recall_undefined}};
}

json forest_config_json(const classifier::ForestConfig& c) {
  return {{"n_estimators", c.n_estimators},
          {"max_depth", c.tree.max_depth ? json(*c.tree.max_depth) : json(nullptr)},
          {"min_samples_leaf", c.tree.min_samples_leaf},
          {"max_features", c.tree.max_features},
          {"bootstrap", c.bootstrap}};
}

json cv_json(const classifier::CvResult& cv) {
  json folds = json::array();
  for (const auto& f : cv.folds) {
    folds.push_back({{"metrics", metrics_json(f.metrics)}, {"n_train", f.n_train}, {"n_validation", f.n_validation}});
  }
  return {{"mean", metrics_json(cv.mean)}, {"folds", folds}};
}

// ---------------------------------------------------------------------------

struct IngestArgs {
  std::string input, output, start, end;
  std::size_t min_length = 10;
  std::string excluded_author = "[deleted]";
  double sample_rate = 0.1;
};

json cmd_ingest(const Globals& g, const IngestArgs& a) {
  corpus::FilterConfig fc;
  fc.min_body_length = a.min_length;
  fc.excluded_author = a.excluded_author;
  fc.sample_rate = a.sample_rate;
  fc.sample_seed = stage_seed(g, "ingest");
  fc.validate();
  corpus::TimeWindow window;
  if (!a.start.empty()) window.start = corpus::parse_utc_timestamp(a.start);
  if (!a.end.empty()) window.end = corpus::parse_utc_timestamp(a.end);

  const std::string output = default_path(g, a.output, "comments.jsonl");
  auto in = open_input(a.input);
  PendingFile out(output);
  const auto s = corpus::ingest(in, out.stream(), fc, window, g.workers);
  out.commit();
  json stats = {{"read", s.read},
                {"malformed", s.malformed},
                {"out_of_window", s.out_of_window},
                {"filtered_short", s.filtered_short},
                {"filtered_deleted", s.filtered_deleted},
                {"sampled_out", s.sampled_out},
                {"accepted", s.accepted}};
  return {{"inputs", {{"comments", file_ref(a.input)}}},
          {"outputs", {{"comments", file_ref(output)}}},
          {"stats", stats}};
}

struct EmbeddingArgs {
  std::string input, output;
  embedding::TrainConfig train;
  bool deterministic = false;
};

json cmd_train_embedding(const Globals& g, const EmbeddingArgs& a) {
  const auto norm = make_normalizer(g);
  auto cfg = a.train;
  cfg.seed = stage_seed(g, "train-embedding");
  if (a.deterministic) cfg.workers = 1;
  cfg.validate();

  auto in = open_input(a.input);
  std::vector<textnorm::TokenSequence> sentences;
  std::uint64_t malformed = 0;
  struct Shard {
    std::vector<textnorm::TokenSequence> seqs;
    std::uint64_t malformed = 0;
  };
  process_line_shards<Shard>(
      in, g.workers, 2048,
      [&](const std::vector<std::string>& lines, std::size_t) {
        Shard s;
        for (const auto& line : lines) {
          if (line.empty() || line == "\r") continue;
          try {
            s.seqs.push_back(norm.normalize(corpus::parse_comment_line(line).body));
          } catch (const DataError&) {
            ++s.malformed;
          }
        }
        return s;
      },
      [&](Shard s) {
        malformed += s.malformed;
        for (auto& q : s.seqs) sentences.push_back(std::move(q));
      });

  const auto model = embedding::train(std::span<const textnorm::TokenSequence>(sentences), cfg);
  const std::string output = default_path(g, a.output, "embedding.bin");
  const std::string tmp = output + ".partial";
  Cleanup cleanup({tmp, embedding::metadata_path(tmp)});
  if (auto parent = fs::path(output).parent_path(); !parent.empty()) fs::create_directories(parent);
  embedding::save(model, tmp);
  fs::rename(tmp, output);
  fs::rename(embedding::metadata_path(tmp), embedding::metadata_path(output));
  cleanup.release();

  json stats = {{"sentences", sentences.size()},
                {"malformed", malformed},
                {"vocabulary", model.size()},
                {"dim", model.dim()},
                {"trained_tokens", model.metadata() ? model.metadata()->corpus_tokens : 0}};
  return {{"inputs", {{"comments", file_ref(a.input)}, {"normalizer", normalizer_ref(g)}}},
          {"outputs",
           {{"embedding", file_ref(output)},
            {"embedding_metadata", file_ref(embedding::metadata_path(output))},
            {"embedding_content_hash", hex64(model.content_hash())}}},
          {"stats", stats}};
}

struct HateVectorArgs {
  std::string embedding, output;
  std::vector<std::string> lexicons;
};

json cmd_build_hatevector(const Globals& g, const HateVectorArgs& a) {
  const auto norm = make_normalizer(g);
  const auto model = embedding::load(a.embedding);
  const auto lexicon = hatemodel::load_lexicon(a.lexicons, norm);
  const auto hv = hatemodel::build_hate_vector(lexicon, model);
  const std::string output = default_path(g, a.output, "hatevector.json");
  const std::string tmp = output + ".partial";
  Cleanup cleanup({tmp});
  if (auto parent = fs::path(output).parent_path(); !parent.empty()) fs::create_directories(parent);
  hatemodel::save_hate_vector(hv, tmp);
  fs::rename(tmp, output);
  cleanup.release();

  json lex = json::array();
  for (const auto& p : a.lexicons) lex.push_back(file_ref(p));
  return {{"inputs", {{"embedding", file_ref(a.embedding)}, {"lexicons", lex}, {"normalizer", normalizer_ref(g)}}},
          {"outputs", {{"hatevector", file_ref(output)}, {"hatevector_content_hash", hex64(hv.content_hash())}}},
          {"stats",
           {{"lexicon_words", lexicon.size()},
            {"contributing_words", hv.contributing_count},
            {"missing_words", hv.missing_words.size()}}}};
}

struct DatasetArgs {
  std::string dataset, embedding, hatevector;
  classifier::DatasetDescriptor desc;
  bool lenient = false;
  std::optional<double> min_confidence;
};

struct FeatureSet {
  std::vector<classifier::LabeledSample> samples;
  classifier::DatasetStats stats;
  std::uint64_t hv_hash = 0;
  std::size_t before_confidence_filter = 0;
};

FeatureSet load_features(const Globals& g, const DatasetArgs& a) {
  const auto norm = make_normalizer(g);
  const auto model = embedding::load(a.embedding);
  auto hv = hatemodel::load_hate_vector(a.hatevector);
  FeatureSet fs_;
  fs_.hv_hash = hv.content_hash();
  const hatemodel::HateScorer scorer(model, std::move(hv), norm);
  auto desc = a.desc;
  desc.strict_classes = !a.lenient;
  const auto texts = classifier::load_labeled_dataset(a.dataset, desc, &fs_.stats);
  fs_.samples = featurize(texts, scorer, g.workers);
  fs_.before_confidence_filter = fs_.samples.size();
  if (a.min_confidence) fs_.samples = classifier::filter_by_confidence(fs_.samples, *a.min_confidence);
  return fs_;
}

json dataset_inputs(const DatasetArgs& a) {
  return {{"dataset", file_ref(a.dataset)},
          {"embedding", file_ref(a.embedding)},
          {"hatevector", file_ref(a.hatevector)}};
}

json dataset_stats(const FeatureSet& f) {
  return {{"rows", f.stats.rows},
          {"malformed", f.stats.malformed},
          {"unknown_class", f.stats.unknown_class},
          {"loaded", f.stats.loaded},
          {"after_confidence_filter", f.samples.size()}};
}

struct ForestArgs {
  std::size_t n_estimators = 100;
  std::optional<std::uint32_t> max_depth;
  std::size_t min_samples_leaf = 1;
  std::size_t max_features = 0;
  bool no_bootstrap = false;

  classifier::ForestConfig config() const {
    classifier::ForestConfig c;
    c.n_estimators = n_estimators;
    c.tree.max_depth = max_depth;
    c.tree.min_samples_leaf = min_samples_leaf;
    c.tree.max_features = max_features;
    c.bootstrap = !no_bootstrap;
    return c;
  }
};

struct TrainClassifierArgs {
  DatasetArgs data;
  ForestArgs forest;
  std::string output;
  bool grid = false;
  std::size_t kfold = 10;
};

json cmd_train_classifier(const Globals& g, const TrainClassifierArgs& a) {
  const auto features = load_features(g, a.data);
  const std::uint64_t seed = stage_seed(g, "train-classifier");
  auto cfg = a.forest.config();
  json extra = json::object();
  if (a.grid) {
    const auto grid = classifier::grid_search(features.samples, classifier::default_grid(), a.kfold,
                                              derive_seed(seed, "grid"), g.workers);
    cfg = grid.best();
    extra["grid_best_cv"] = metrics_json(grid.rows[grid.best_index].cv.mean);
  }
  auto forest = classifier::train_forest(features.samples, cfg, derive_seed(seed, "forest"), g.workers);
  forest.set_feature_provenance(features.hv_hash);
  const std::string output = default_path(g, a.output, "forest.bin");
  const std::string tmp = output + ".partial";
  Cleanup cleanup({tmp});
  if (auto parent = fs::path(output).parent_path(); !parent.empty()) fs::create_directories(parent);
  classifier::save_forest(forest, tmp);
  fs::rename(tmp, output);
  cleanup.release();

  json stats = dataset_stats(features);
  stats["forest"] = forest_config_json(cfg);
  stats.update(extra);
  return {{"inputs", dataset_inputs(a.data)},
          {"outputs", {{"forest", file_ref(output)}, {"feature_provenance", hex64(features.hv_hash)}}},
          {"stats", stats}};
}

struct EvaluateArgs {
  DatasetArgs data;
  ForestArgs forest;
  std::optional<std::size_t> kfold;
  std::optional<double> holdout;
  bool sweep = false;
  bool baselines = false;
  bool grid = false;
  std::string model;
};

void check_forest_provenance(const classifier::ForestModel& forest, std::uint64_t hv_hash) {
  if (forest.feature_provenance() != hv_hash) {
    throw ProvenanceMismatch("forest was trained on features from hate vector " + hex64(forest.feature_provenance()) +
                             " but the supplied hate vector is " + hex64(hv_hash));
  }
}

json cmd_evaluate(const Globals& g, const EvaluateArgs& a) {
  const auto features = load_features(g, a.data);
  const auto& samples = features.samples;
  const std::uint64_t seed = stage_seed(g, "evaluate");
  const auto cfg = a.forest.config();
  const std::size_t k = a.kfold.value_or(10);
  const bool any = a.kfold || a.holdout || a.sweep || a.baselines || a.grid || !a.model.empty();

  json result;
  result["forest"] = forest_config_json(cfg);
  json outputs = json::object();
  std::vector<std::pair<std::string, std::string>> files;

  if (!a.model.empty()) {
    const auto forest = classifier::load_forest(a.model);
    check_forest_provenance(forest, features.hv_hash);
    result["model"] = metrics_json(classifier::evaluate(forest, samples));
  }
  if ((a.kfold || !any) && !a.holdout) {
    result["kfold"] = {{"k", k},
                       {"cv", cv_json(classifier::kfold_cv(samples, k, classifier::forest_trainer(cfg, g.workers),
                                                           derive_seed(seed, "kfold")))}};
  }
  if (a.grid && !a.holdout) {
    const auto grid =
        classifier::grid_search(samples, classifier::default_grid(), k, derive_seed(seed, "grid"), g.workers);
    result["grid"] = {{"k", k},
                      {"best", forest_config_json(grid.best())},
                      {"best_cv", metrics_json(grid.rows[grid.best_index].cv.mean)}};
    std::string csv = csv_line({"n_estimators", "max_depth", "min_samples_leaf", "accuracy", "precision", "recall", "f1"});
    for (const auto& row : grid.rows) {
      const auto& c = row.config;
      csv += csv_line({std::to_string(c.n_estimators), c.tree.max_depth ? std::to_string(*c.tree.max_depth) : "",
                      std::to_string(c.tree.min_samples_leaf), format_double(row.cv.mean.accuracy),
                      format_double(row.cv.mean.precision), format_double(row.cv.mean.recall),
                      format_double(row.cv.mean.f1)});
    }
    files.emplace_back("grid.csv", std::move(csv));
  }
  if (a.holdout) {
    const auto split = classifier::holdout_split(samples, *a.holdout, derive_seed(seed, "holdout"));
    json h = {{"fraction", *a.holdout}, {"n_train", split.train.size()}, {"n_holdout", split.holdout.size()}};
    auto chosen = cfg;
    if (a.grid) {
      const auto grid = classifier::grid_search(split.train, classifier::default_grid(), k, derive_seed(seed, "grid"),
                                                g.workers);
      chosen = grid.best();
      h["grid"] = {{"k", k}, {"best", forest_config_json(chosen)},
                   {"best_cv", metrics_json(grid.rows[grid.best_index].cv.mean)}};
    } else if (a.kfold) {
      h["train_kfold"] = cv_json(classifier::kfold_cv(split.train, k, classifier::forest_trainer(cfg, g.workers),
                                                      derive_seed(seed, "kfold")));
    }
    const auto forest = classifier::train_forest(split.train, chosen, derive_seed(seed, "holdout-forest"), g.workers);
    h["holdout"] = metrics_json(classifier::evaluate(forest, split.holdout));
    result["holdout"] = std::move(h);
  }
  if (a.sweep) {
    const auto rows = classifier::sweep_holdout_and_confidence(samples, classifier::default_sweep_fractions(),
                                                               classifier::default_confidence_thresholds(), cfg,
                                                               derive_seed(seed, "sweep"), g.workers);
    std::size_t skipped = 0;
    for (const auto& r : rows) skipped += r.skipped;
    result["sweep"] = {{"cells", rows.size()}, {"skipped", skipped}};
    files.emplace_back("sweep.csv", classifier::sweep_csv(rows));
  }
  if (a.baselines) {
    const auto rows = classifier::train_baselines(samples, derive_seed(seed, "baselines"), k, cfg, cfg.tree, g.workers);
    std::string csv = csv_line({"classifier", "accuracy", "precision", "recall", "f1"});
    json b = json::array();
    for (const auto& r : rows) {
      csv += csv_line({r.name, format_double(r.cv.mean.accuracy), format_double(r.cv.mean.precision),
                      format_double(r.cv.mean.recall), format_double(r.cv.mean.f1)});
      b.push_back({{"classifier", r.name}, {"mean", metrics_json(r.cv.mean)}});
    }
    result["baselines"] = {{"k", k}, {"rows", b}};
    files.emplace_back("baselines.csv", std::move(csv));
  }
  files.emplace_back("evaluation.json", result.dump(2) + "\n");

  fs::create_directories(g.out_dir);
  for (const auto& [name, body] : files) {
    const std::string path = (fs::path(g.out_dir) / name).string();
    write_file_atomic(path, body);
    outputs[name] = file_ref(path);
  }
  json inputs = dataset_inputs(a.data);
  if (!a.model.empty()) inputs["forest"] = file_ref(a.model);
  return {{"inputs", inputs}, {"outputs", outputs}, {"stats", dataset_stats(features)}, {"result", result}};
}

struct ClassifyArgs {
  std::string input, embedding, hatevector, forest, output;
  std::string format = "csv";
};

json cmd_classify(const Globals& g, const ClassifyArgs& a) {
  const auto norm = make_normalizer(g);
  const auto model = embedding::load(a.embedding);
  auto hv = hatemodel::load_hate_vector(a.hatevector);
  const std::uint64_t hv_hash = hv.content_hash();
  const hatemodel::HateScorer scorer(model, std::move(hv), norm);
  const auto forest = classifier::load_forest(a.forest);
  check_forest_provenance(forest, hv_hash);

  const auto format = a.format == "jsonl" ? hatemodel::ScoreFormat::JsonLines : hatemodel::ScoreFormat::Csv;
  const std::string output =
      default_path(g, a.output, format == hatemodel::ScoreFormat::Csv ? "classified.csv" : "classified.jsonl");
  auto in = open_input(a.input);
  PendingFile out(output);
  const auto stats = hatemodel::score_corpus(in, out.stream(), scorer, format, g.workers, [&](double s) {
    return std::string(classifier::to_string(forest.predict(s).label));
  });
  out.commit();
  return {{"inputs",
           {{"comments", file_ref(a.input)},
            {"embedding", file_ref(a.embedding)},
            {"hatevector", file_ref(a.hatevector)},
            {"forest", file_ref(a.forest)},
            {"normalizer", normalizer_ref(g)}}},
          {"outputs", {{"scores", file_ref(output)}}},
          {"stats",
           {{"read", stats.read},
            {"malformed", stats.malformed},
            {"scored", stats.scored},
            {"distance_computations", scorer.distance_computations()}}}};
}

struct AnalyzeArgs {
  std::string input, taxonomy, spill_dir, cutover = "2016-07-01T00:00:00Z", anchor = "2015-01-01";
  analytics::AnalyticsConfig cfg;
  std::size_t spill_partitions = 16;
};

json cmd_analyze(const Globals& g, const AnalyzeArgs& a) {
  auto cfg = a.cfg;
  cfg.cutover = corpus::parse_utc_timestamp(a.cutover);
  cfg.anchor = corpus::parse_utc_timestamp(a.anchor);
  const std::string taxonomy_path = a.taxonomy.empty() ? (fs::path(g.data_dir) / "taxonomy.json").string() : a.taxonomy;
  const auto taxonomy = corpus::SubredditTaxonomy::load(taxonomy_path);
  auto in = open_input(a.input);
  analytics::ReadStats stats;
  std::optional<std::string> spill;
  if (!a.spill_dir.empty()) spill = a.spill_dir;
  const auto agg = analytics::analyze_stream(in, taxonomy, cfg, g.workers, spill, &stats, a.spill_partitions);
  const auto report = analytics::build_report(agg);
  const auto names = analytics::emit_report(report, cfg, g.out_dir);
  json outputs = json::object();
  for (const auto& n : names) outputs[n] = file_ref((fs::path(g.out_dir) / n).string());
  return {{"inputs", {{"scores", file_ref(a.input)}, {"taxonomy", file_ref(taxonomy_path)}}},
          {"outputs", outputs},
          {"stats",
           {{"rows", stats.rows},
            {"malformed", stats.malformed},
            {"before_anchor", stats.before_anchor},
            {"used", stats.used},
            {"flow_error", report.flow_error ? json(*report.flow_error) : json(nullptr)}}},
          {"analytics",
           {{"week_anchor_utc", cfg.anchor},
            {"cutover_utc", cfg.cutover},
            {"destination", corpus::canonical_subreddit(cfg.destination)},
            {"min_flow", cfg.min_flow},
            {"min_comments", cfg.min_comments},
            {"subreddit_threshold", cfg.subreddit_threshold},
            {"top_n", cfg.top_n}}}};
}

void add_dataset_options(CLI::App* sub, DatasetArgs& d) {
  sub->add_option("--dataset", d.dataset, "Labeled CSV")->required()->check(CLI::ExistingFile);
  sub->add_option("--embedding", d.embedding, "Embedding model file")->required()->check(CLI::ExistingFile);
  sub->add_option("--hatevector", d.hatevector, "Hate vector file")->required()->check(CLI::ExistingFile);
  sub->add_option("--text-column", d.desc.text_column, "Text column name");
  sub->add_option("--class-column", d.desc.class_column, "Class column name");
  sub->add_option("--confidence-column", d.desc.confidence_column, "Confidence column name");
  sub->add_option("--offensive-classes", d.desc.offensive_classes, "Class values mapped to offensive");
  sub->add_option("--not-offensive-classes", d.desc.not_offensive_classes, "Class values mapped to not offensive");
  sub->add_flag("--lenient-classes", d.lenient, "Skip rows with unknown classes instead of failing");
  sub->add_option("--min-confidence", d.min_confidence, "Keep rows with confidence >= this value")
      ->check(CLI::Range(0.0, 1.0));
}

void add_forest_options(CLI::App* sub, ForestArgs& f) {
  sub->add_option("--n-estimators", f.n_estimators, "Trees in the forest")->check(CLI::PositiveNumber);
  sub->add_option("--max-depth", f.max_depth, "Maximum tree depth (unlimited when absent)");
  sub->add_option("--min-samples-leaf", f.min_samples_leaf, "Minimum samples per leaf")->check(CLI::PositiveNumber);
  sub->add_option("--max-features", f.max_features, "Features examined per split (0 = all)");
  sub->add_flag("--no-bootstrap", f.no_bootstrap, "Train every tree on the full sample");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Offensive speech pipeline: ingest, embed, score, classify and analyze comment dumps", "offensectl"};
  app.option_defaults()->always_capture_default();
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config file; command-line flags take precedence");
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Root seed for every randomized stage");
  app.add_option("--workers", g.workers, "Worker threads for sharded stages")->check(CLI::Range(1u, 1024u));
  app.add_option("--out-dir", g.out_dir, "Directory for stage outputs and manifest.json");
  app.add_option("--data-dir", g.data_dir, "Directory holding stopwords, lemma tables and taxonomy");

  IngestArgs ingest;
  auto* s_ingest = app.add_subcommand("ingest", "Filter and sample a JSON-lines comment dump");
  s_ingest->add_option("--input", ingest.input, "Comment dump (JSON lines)")->required()->check(CLI::ExistingFile);
  s_ingest->add_option("--output", ingest.output, "Output JSON lines (default <out-dir>/comments.jsonl)");
  s_ingest->add_option("--min-length", ingest.min_length, "Minimum body length in code points");
  s_ingest->add_option("--excluded-author", ingest.excluded_author, "Author placeholder to drop");
  s_ingest->add_option("--sample-rate", ingest.sample_rate, "Kept fraction in (0, 1]");
  s_ingest->add_option("--start", ingest.start, "Window start (epoch or YYYY-MM-DD[THH:MM:SSZ]), inclusive");
  s_ingest->add_option("--end", ingest.end, "Window end, exclusive");

  EmbeddingArgs emb;
  auto* s_emb = app.add_subcommand("train-embedding", "Train a skip-gram embedding on ingested comments");
  s_emb->add_option("--input", emb.input, "Ingested JSON lines")->required()->check(CLI::ExistingFile);
  s_emb->add_option("--output", emb.output, "Model file (default <out-dir>/embedding.bin)");
  s_emb->add_option("--dim", emb.train.dim, "Vector dimension")->check(CLI::PositiveNumber);
  s_emb->add_option("--window", emb.train.window, "Context window")->check(CLI::PositiveNumber);
  s_emb->add_option("--negative", emb.train.negative_samples, "Negative samples per pair");
  s_emb->add_option("--epochs", emb.train.epochs, "Training epochs");
  s_emb->add_option("--lr", emb.train.initial_learning_rate, "Initial learning rate");
  s_emb->add_option("--subsample", emb.train.subsample_threshold, "Frequent-word subsampling threshold (0 = off)");
  s_emb->add_option("--min-count", emb.train.min_count, "Minimum token count for the vocabulary");
  s_emb->add_option("--train-workers", emb.train.workers,
                    "Lock-free training threads; values above 1 are not bit-reproducible")
      ->check(CLI::Range(1u, 1024u));
  s_emb->add_flag("--deterministic", emb.deterministic, "Force single-threaded, bit-reproducible training");

  HateVectorArgs hva;
  auto* s_hv = app.add_subcommand("build-hatevector", "Average lexicon word vectors into a hate vector");
  s_hv->add_option("--embedding", hva.embedding, "Embedding model file")->required()->check(CLI::ExistingFile);
  s_hv->add_option("--lexicon", hva.lexicons, "Word list, one entry per line (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);
  s_hv->add_option("--output", hva.output, "Hate vector file (default <out-dir>/hatevector.json)");

  TrainClassifierArgs tc;
  auto* s_tc = app.add_subcommand("train-classifier", "Train the random forest on hate-vector scores");
  add_dataset_options(s_tc, tc.data);
  add_forest_options(s_tc, tc.forest);
  s_tc->add_option("--output", tc.output, "Forest file (default <out-dir>/forest.bin)");
  s_tc->add_flag("--grid", tc.grid, "Pick the forest configuration by grid search");
  s_tc->add_option("--kfold", tc.kfold, "Folds for grid search")->check(CLI::Range(2, 1000000));

  EvaluateArgs ev;
  auto* s_ev = app.add_subcommand("evaluate", "Cross-validate, hold out, sweep or compare classifiers");
  add_dataset_options(s_ev, ev.data);
  add_forest_options(s_ev, ev.forest);
  s_ev->add_option("--kfold", ev.kfold, "k-fold cross-validation (default k = 10)")->check(CLI::Range(2, 1000000));
  s_ev->add_option("--holdout", ev.holdout, "Holdout fraction")->check(CLI::Range(0.0, 1.0));
  s_ev->add_flag("--sweep", ev.sweep, "Holdout fraction x confidence threshold sweep (sweep.csv)");
  s_ev->add_flag("--baselines", ev.baselines, "Compare SGD, naive Bayes, decision tree and forest (baselines.csv)");
  s_ev->add_flag("--grid", ev.grid, "Grid search over forest configurations (grid.csv)");
  s_ev->add_option("--model", ev.model, "Evaluate a trained forest file on the dataset")->check(CLI::ExistingFile);

  ClassifyArgs cl;
  auto* s_cl = app.add_subcommand("classify", "Score and label ingested comments");
  s_cl->add_option("--input", cl.input, "Ingested JSON lines")->required()->check(CLI::ExistingFile);
  s_cl->add_option("--embedding", cl.embedding, "Embedding model file")->required()->check(CLI::ExistingFile);
  s_cl->add_option("--hatevector", cl.hatevector, "Hate vector file")->required()->check(CLI::ExistingFile);
  s_cl->add_option("--forest", cl.forest, "Forest file")->required()->check(CLI::ExistingFile);
  s_cl->add_option("--output", cl.output, "Score file (default <out-dir>/classified.csv)");
  s_cl->add_option("--format", cl.format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}));

  AnalyzeArgs an;
  auto* s_an = app.add_subcommand("analyze", "Measurement tables over classified comments");
  s_an->add_option("--input", an.input, "Classified score file (CSV or JSON lines)")
      ->required()
      ->check(CLI::ExistingFile);
  s_an->add_option("--taxonomy", an.taxonomy, "Subreddit taxonomy JSON (default <data-dir>/taxonomy.json)");
  s_an->add_option("--destination", an.cfg.destination, "Destination subreddit for the author flow");
  s_an->add_option("--min-flow", an.cfg.min_flow, "Smallest flow edge reported");
  s_an->add_option("--min-comments", an.cfg.min_comments, "Subreddits need more comments than this");
  s_an->add_option("--threshold", an.cfg.subreddit_threshold, "Offensive fraction threshold for subreddit shares");
  s_an->add_option("--top-n", an.cfg.top_n, "Rows in the most/least offensive tables");
  s_an->add_option("--cutover", an.cutover, "Pre/post boundary timestamp");
  s_an->add_option("--anchor", an.anchor, "Start of week 0");
  s_an->add_option("--spill-dir", an.spill_dir, "Partition per-author state to this directory");
  s_an->add_option("--spill-partitions", an.spill_partitions, "Number of author partitions")
      ->check(CLI::Range(std::size_t{1}, std::size_t{4096}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string stage = sub->get_name();
  try {
    json entry;
    if (sub == s_ingest) entry = cmd_ingest(g, ingest);
    else if (sub == s_emb) entry = cmd_train_embedding(g, emb);
    else if (sub == s_hv) entry = cmd_build_hatevector(g, hva);
    else if (sub == s_tc) entry = cmd_train_classifier(g, tc);
    else if (sub == s_ev) entry = cmd_evaluate(g, ev);
    else if (sub == s_cl) entry = cmd_classify(g, cl);
    else entry = cmd_analyze(g, an);
    json full = stage_entry(g, stage, *sub, app);
    full.update(entry);
    record_stage(g, stage, full);
    out << full.dump(2) << "\n";
    return kExitOk;
  } catch (const ProvenanceError& e) {
    err << "offensectl " << stage << ": provenance error: " << e.what() << "\n";
    return kExitProvenance;
  } catch (const UsageError& e) {
    err << "offensectl " << stage << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "offensectl " << stage << ": " << e.what() << "\n";
    return kExitData;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("offensectl");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace offense::cli
