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
#include <functional>
#include <istream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace offense::classifier {

enum class Label : std::uint8_t { NotOffensive = 0, Offensive = 1 };

std::string_view to_string(Label l);
Label parse_label(std::string_view s);  // "offensive" / "not_offensive"; throws DataError

// Annotated text before featurization.
struct LabeledText {
  std::string text;
  Label label = Label::NotOffensive;
  double confidence = 1.0;
};

struct LabeledSample {
  std::vector<double> features;  // one scalar in this pipeline
  Label label = Label::NotOffensive;
  double confidence = 1.0;  // in (0, 1]
  std::optional<std::string> source_text;
};

LabeledSample make_sample(double feature, Label label, double confidence = 1.0);

// Column mapping for a CSV labeled dataset. A header row is required.
struct DatasetDescriptor {
  std::string text_column = "text";
  std::string class_column = "class";
  std::string confidence_column = "confidence";
  std::vector<std::string> not_offensive_classes{"NO"};
  std::vector<std::string> offensive_classes{"O", "OH"};
  // When false, rows with an unrecognised class are counted and skipped
  // instead of raising UnknownClassLabel.
  bool strict_classes = true;
};

struct DatasetStats {
  std::size_t rows = 0;
  std::size_t malformed = 0;
  std::size_t unknown_class = 0;
  std::size_t loaded = 0;
};

std::vector<LabeledText> read_labeled_dataset(std::istream& in, const DatasetDescriptor& desc,
                                              DatasetStats* stats = nullptr);
std::vector<LabeledText> load_labeled_dataset(const std::string& path, const DatasetDescriptor& desc,
                                              DatasetStats* stats = nullptr);

// Keeps samples with confidence >= threshold.
std::vector<LabeledSample> filter_by_confidence(std::span<const LabeledSample> samples, double threshold);

struct Prediction {
  Label label = Label::NotOffensive;
  double vote_fraction = 0.0;  // share of Offensive votes
};

class Model {
 public:
  virtual ~Model() = default;
  virtual Prediction predict(std::span<const double> features) const = 0;
  Prediction predict(double feature) const { return predict(std::span<const double>(&feature, 1)); }
};

struct TreeConfig {
  std::optional<std::uint32_t> max_depth;  // nullopt: grow until pure / min_samples_leaf
  std::size_t min_samples_leaf = 1;
  std::size_t max_features = 0;  // features examined per node; 0 means all

  bool operator==(const TreeConfig&) const = default;
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // x[feature] <= threshold goes left
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::uint64_t counts[2] = {0, 0};  // NotOffensive, Offensive
  double gain = 0.0;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

// Entropy-split binary tree. Nodes are stored in preorder; children always
// follow their parent.
class DecisionTree final : public Model {
 public:
  DecisionTree() = default;
  explicit DecisionTree(std::vector<TreeNode> nodes);

  using Model::predict;
  Prediction predict(std::span<const double> features) const override;
  // Leaf majority (NotOffensive on a tie).
  Label vote(std::span<const double> features) const;

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& root() const { return nodes_.front(); }
  std::size_t depth() const;
  std::size_t leaf_count() const;

  bool operator==(const DecisionTree& o) const { return nodes_ == o.nodes_; }

 private:
  std::vector<TreeNode> nodes_;
};

// Entropy in bits of a two-class count pair.
double entropy(std::uint64_t not_offensive, std::uint64_t offensive);

// Throws EmptyTrainingSet.
DecisionTree train_tree(std::span<const LabeledSample> samples, const TreeConfig& cfg, std::uint64_t seed);

struct ForestConfig {
  std::size_t n_estimators = 100;
  TreeConfig tree;
  bool bootstrap = true;

  bool operator==(const ForestConfig&) const = default;
};

std::string describe(const ForestConfig& cfg);

class ForestModel final : public Model {
 public:
  ForestModel() = default;
  ForestModel(ForestConfig cfg, std::uint64_t seed, std::size_t n_features, std::vector<DecisionTree> trees,
              std::vector<std::uint64_t> tree_seeds);

  // Majority vote; an exact tie is NotOffensive.
  using Model::predict;
  Prediction predict(std::span<const double> features) const override;

  const ForestConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t n_features() const { return n_features_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }
  const std::vector<std::uint64_t>& tree_seeds() const { return tree_seeds_; }

  // Hash of the feature extractor the forest was trained with (the hate
  // vector's content hash), or 0 when unknown.
  std::uint64_t feature_provenance() const { return feature_provenance_; }
  void set_feature_provenance(std::uint64_t h) { feature_provenance_ = h; }

 private:
  ForestConfig cfg_;
  std::uint64_t seed_ = 0;
  std::size_t n_features_ = 1;
  std::vector<DecisionTree> trees_;
  std::vector<std::uint64_t> tree_seeds_;
  std::uint64_t feature_provenance_ = 0;
};

// Tree i trains on a bootstrap resample drawn with derive_seed(seed, i).
// Trees train on up to `workers` threads; the result does not depend on it.
ForestModel train_forest(std::span<const LabeledSample> samples, const ForestConfig& cfg, std::uint64_t seed,
                         unsigned workers = 1);

// OFFRF1 binary format with trailing checksum.
void save_forest(const ForestModel& forest, const std::string& path);
ForestModel load_forest(const std::string& path);

struct Metrics {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Zero denominators are reported as 0 with these flags set.
  bool precision_undefined = false;
  bool recall_undefined = false;

  std::uint64_t total() const { return tp + fp + tn + fn; }
};

Metrics metrics_from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t tn, std::uint64_t fn);

// Offensive is the positive class. Throws EmptyEvaluationSet.
Metrics evaluate(const Model& model, std::span<const LabeledSample> samples);

using Trainer = std::function<std::unique_ptr<Model>(std::span<const LabeledSample> train, std::uint64_t seed)>;

Trainer forest_trainer(const ForestConfig& cfg, unsigned workers = 1);
Trainer tree_trainer(const TreeConfig& cfg);

struct FoldResult {
  Metrics metrics;
  std::size_t n_train = 0;
  std::size_t n_validation = 0;
  std::size_t validation_offensive = 0;
  std::size_t validation_not_offensive = 0;
};

struct CvResult {
  std::vector<FoldResult> folds;
  // accuracy/precision/recall/f1 are means over folds; confusion counts are
  // summed; a degenerate flag is set if any fold had it.
  Metrics mean;
};

// Seeded shuffle of [0, n) cut into k contiguous near-equal folds (the first
// n % k folds hold one extra sample).
std::vector<std::vector<std::size_t>> kfold_partition(std::size_t n, std::size_t k, std::uint64_t seed);

// Throws TooFewSamples when k < 2 or samples < k.
CvResult kfold_cv(std::span<const LabeledSample> samples, std::size_t k, const Trainer& trainer, std::uint64_t seed);

struct GridRow {
  ForestConfig config;
  CvResult cv;
};

struct GridResult {
  std::size_t best_index = 0;
  std::vector<GridRow> rows;
  const ForestConfig& best() const { return rows[best_index].config; }
};

// n_estimators {10,50,100,200} x max_depth {2,4,8,unlimited} x min_samples_leaf {1,5,20}.
std::vector<ForestConfig> default_grid();

// Highest mean F1 wins; ties go to fewer estimators, then shallower depth,
// then grid order.
GridResult grid_search(std::span<const LabeledSample> samples, const std::vector<ForestConfig>& grid, std::size_t k,
                       std::uint64_t seed, unsigned workers = 1);

struct Split {
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> holdout;
};

// Unstratified seeded split; train gets round(n * (1 - f)) samples.
// Throws DegenerateSplit when either side would be empty.
Split holdout_split(std::span<const LabeledSample> samples, double holdout_fraction, std::uint64_t seed);

struct SweepRow {
  double holdout_fraction = 0.0;
  double conf_threshold = 0.0;
  Metrics metrics;
  std::size_t n_train = 0;
  std::size_t n_holdout = 0;
  bool skipped = false;
  std::string skip_reason;
};

std::vector<double> default_sweep_fractions();  // 0.05, 0.10, ..., 0.95
std::vector<double> default_confidence_thresholds();  // 0, 0.35, 0.70

std::vector<SweepRow> sweep_holdout_and_confidence(std::span<const LabeledSample> samples,
                                                   const std::vector<double>& holdout_fractions,
                                                   const std::vector<double>& thresholds, const ForestConfig& cfg,
                                                   std::uint64_t seed, unsigned workers = 1);

// holdout_frac,conf_threshold,accuracy,precision,recall,f1,n_train,n_holdout
// Skipped cells are omitted.
std::string sweep_csv(const std::vector<SweepRow>& rows);

// Gaussian naive Bayes over the feature vector.
class GaussianNaiveBayes final : public Model {
 public:
  static GaussianNaiveBayes fit(std::span<const LabeledSample> samples);
  using Model::predict;
  Prediction predict(std::span<const double> features) const override;
  double posterior_offensive(std::span<const double> features) const;

 private:
  double log_prior_[2] = {0.0, 0.0};
  bool present_[2] = {false, false};
  std::vector<double> mean_[2];
  std::vector<double> var_[2];
};

struct SgdConfig {
  std::size_t epochs = 20;
  double eta0 = 0.1;
  double l2 = 1e-4;
};

// Logistic regression trained by SGD on standardized features.
class LogisticSgd final : public Model {
 public:
  static LogisticSgd fit(std::span<const LabeledSample> samples, const SgdConfig& cfg, std::uint64_t seed);
  using Model::predict;
  Prediction predict(std::span<const double> features) const override;
  double probability(std::span<const double> features) const;

 private:
  std::vector<double> mean_, scale_, weights_;
  double bias_ = 0.0;
};

struct BaselineRow {
  std::string name;
  CvResult cv;
};

// SGD-logistic, Gaussian naive Bayes, decision tree and random forest under
// the same k-fold protocol, in that order.
std::vector<BaselineRow> train_baselines(std::span<const LabeledSample> samples, std::uint64_t seed, std::size_t k = 10,
                                         const ForestConfig& forest = {}, const TreeConfig& tree = {},
                                         unsigned workers = 1);

}  // namespace offense::classifier
