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
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "offense/analytics.hpp"
#include "offense/classifier.hpp"
#include "offense/embedding.hpp"
#include "offense/rng.hpp"

namespace offense::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

void write_text(const std::string& path, const std::string& text);

// Small random embedding with the given words; rows drawn uniformly in [-1, 1).
embedding::EmbeddingModel random_model(const std::vector<std::string>& words, std::uint32_t dim, std::uint64_t seed);

// Each sentence holds "a b" or "c d" adjacent among filler words from a pool
// private to that pair, so the pairs never co-occur.
std::vector<textnorm::TokenSequence> planted_pairs_corpus(std::size_t sentences, std::uint64_t seed);

struct PlantedMargins {
  double ab = 0.0, cd = 0.0, ac = 0.0;
  bool separated(double margin) const { return ab - ac >= margin && cd - ac >= margin; }
};

// Trains a dim-16 single-worker model on the planted corpus.
PlantedMargins planted_pairs_margins(std::uint64_t seed, std::size_t sentences = 10000);

// Plain double loop over tokens: max of dot / (|v| |h|), OOV and zero rows count 0.
double max_cosine_oracle(const textnorm::TokenSequence& tokens, const embedding::EmbeddingModel& model,
                         const std::vector<double>& h);

// Sum-then-divide mean of the in-vocabulary words' rows; `found` gets the count.
std::vector<double> mean_oracle(const std::vector<std::string>& words, const embedding::EmbeddingModel& model,
                                std::size_t& found);

// Exhaustive scan over every midpoint between distinct sorted values of a
// one-feature sample set. `thresholds` holds every midpoint whose gain is
// within 1e-12 of the best.
struct SplitOracle {
  bool found = false;
  double gain = 0.0;
  std::vector<double> thresholds;
};
SplitOracle best_split_oracle(const std::vector<classifier::LabeledSample>& samples);

// Uniform features with labels drawn from a sigmoid of the feature, plus
// duplicated values.
std::vector<classifier::LabeledSample> random_scalar_samples(std::size_t n, std::uint64_t seed);

// Offensive ~ N(0.8, sigma), NotOffensive ~ N(0.2, sigma), balanced.
std::vector<classifier::LabeledSample> two_gaussian_samples(std::size_t n, std::uint64_t seed, double sigma = 0.1);

// Ignores features and predicts the training majority (NotOffensive on a tie).
classifier::Trainer majority_stub_trainer();

// Offensive iff feature > cut.
class ThresholdStub final : public classifier::Model {
 public:
  explicit ThresholdStub(double cut) : cut_(cut) {}
  using Model::predict;
  classifier::Prediction predict(std::span<const double> f) const override {
    const bool o = f[0] > cut_;
    return {o ? classifier::Label::Offensive : classifier::Label::NotOffensive, o ? 1.0 : 0.0};
  }

 private:
  double cut_;
};

// Runs offensectl in-process; returns the exit code, collecting stdout and stderr.
struct CliResult {
  int code = 0;
  std::string out, err;
};
CliResult run_cli(const std::vector<std::string>& args);

// The bundled fixture directory (comments.jsonl, labeled.csv, lexicons).
std::string fixture_dir();

// Every stage on the fixture, writing into `out_dir`. Returns the first
// failing stage's result, or the analyze result when all succeed.
CliResult run_fixture_pipeline(const std::string& out_dir, std::uint64_t seed = 7, unsigned workers = 1);

// Regular files of a directory, name -> bytes.
std::map<std::string, std::string> read_dir(const std::string& dir);

// Classified synthetic stream with heavy-tailed authors, mixed categories and
// deliberate timestamp ties.
std::vector<analytics::ClassifiedComment> synthetic_classified(std::size_t n, std::uint64_t seed,
                                                               std::size_t n_authors = 5000,
                                                               std::size_t n_subreddits = 60);

// Taxonomy matching synthetic_classified: pol_*, def_* and oth_* names.
corpus::SubredditTaxonomy synthetic_taxonomy(std::size_t n_subreddits = 60);

// Straight-line recomputation of every analytics table.
struct AnalyticsOracle {
  std::vector<analytics::TimelineRow> timeline;
  double political_fraction = 0.0, apolitical_fraction = 0.0;
  double pre_political = 0.0, pre_apolitical = 0.0, post_political = 0.0, post_apolitical = 0.0;

  struct ScoreCell {
    std::uint32_t week;
    std::uint64_t political_n, apolitical_n;
    std::optional<double> political_avg, apolitical_avg;
  };
  std::vector<ScoreCell> scores;
  std::optional<double> offensive_avg, not_offensive_avg, offensive_political_avg, offensive_apolitical_avg;

  // fraction -> (authors, throwaway, mid, high)
  std::vector<std::pair<double, std::vector<std::uint64_t>>> cdf_counts;
  std::vector<double> cdf_values;
  std::uint64_t authors = 0, trolls = 0, over_075 = 0, over_075_throwaway = 0, over_075_mid = 0, over_075_high = 0;
  std::uint64_t quartile_authors[4] = {0, 0, 0, 0};

  std::vector<analytics::SubredditRow> subreddits;  // category, fraction asc, name
  std::uint64_t subreddits_above = 0;
  double comment_share_above = 0.0;

  std::map<std::string, std::uint64_t> flow_all;  // before min_flow filtering
  std::vector<analytics::FlowEdge> flow;           // filtered, count desc then name
  bool destination_has_offense = false;
};

AnalyticsOracle analytics_oracle(const std::vector<analytics::ClassifiedComment>& stream,
                                 const analytics::AnalyticsConfig& cfg);

// Differences between a report and the oracle, empty when they agree
// (counts exact, means within 1e-9).
std::vector<std::string> compare_with_oracle(const analytics::Report& report, const AnalyticsOracle& oracle);

// Serializes a classified stream as the CSV classify emits.
std::string classified_csv(const std::vector<analytics::ClassifiedComment>& stream);

}  // namespace offense::testing
