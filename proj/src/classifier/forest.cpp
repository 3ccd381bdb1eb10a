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
#include <cstring>
#include <sstream>

#include "offense/binary_io.hpp"
#include "offense/classifier.hpp"
#include "offense/errors.hpp"
#include "offense/hash.hpp"
#include "offense/parallel.hpp"
#include "offense/rng.hpp"

namespace offense::classifier {

namespace detail {
DecisionTree train_tree_on_rows(std::span<const LabeledSample> samples, std::span<const std::size_t> rows,
                                const TreeConfig& cfg, std::uint64_t seed);
}

namespace {

constexpr char kMagic[7] = {'O', 'F', 'F', 'R', 'F', '1', '\0'};
constexpr std::uint32_t kFormatVersion = 1;

}  // namespace

std::string describe(const ForestConfig& cfg) {
  std::ostringstream os;
  os << "n_estimators=" << cfg.n_estimators << " max_depth="
     << (cfg.tree.max_depth ? std::to_string(*cfg.tree.max_depth) : std::string("none"))
     << " min_samples_leaf=" << cfg.tree.min_samples_leaf << " max_features=" << cfg.tree.max_features
     << " bootstrap=" << (cfg.bootstrap ? "true" : "false");
  return os.str();
}

ForestModel::ForestModel(ForestConfig cfg, std::uint64_t seed, std::size_t n_features, std::vector<DecisionTree> trees,
                         std::vector<std::uint64_t> tree_seeds)
    : cfg_(std::move(cfg)),
      seed_(seed),
      n_features_(n_features),
      trees_(std::move(trees)),
      tree_seeds_(std::move(tree_seeds)) {
  if (trees_.size() != cfg_.n_estimators) throw DataError("forest tree count does not match n_estimators");
  if (tree_seeds_.size() != trees_.size()) throw DataError("forest needs one seed per tree");
}

Prediction ForestModel::predict(std::span<const double> features) const {
  std::size_t offensive = 0;
  for (const auto& t : trees_)
    if (t.vote(features) == Label::Offensive) ++offensive;
  const std::size_t n = trees_.size();
  Prediction p;
  p.vote_fraction = n ? static_cast<double>(offensive) / static_cast<double>(n) : 0.0;
  p.label = 2 * offensive > n ? Label::Offensive : Label::NotOffensive;
  return p;
}

ForestModel train_forest(std::span<const LabeledSample> samples, const ForestConfig& cfg, std::uint64_t seed,
                         unsigned workers) {
  if (samples.empty()) throw EmptyTrainingSet("cannot train a forest on zero samples");
  if (cfg.n_estimators == 0) throw ConfigError("n_estimators must be >= 1");
  const std::size_t n = samples.size();
  std::vector<DecisionTree> trees(cfg.n_estimators);
  std::vector<std::uint64_t> seeds(cfg.n_estimators);
  for (std::size_t i = 0; i < cfg.n_estimators; ++i) seeds[i] = derive_seed(seed, i);
  parallel_for(cfg.n_estimators, workers, [&](std::size_t i) {
    std::vector<std::size_t> rows(n);
    if (cfg.bootstrap) {
      Rng rng(derive_seed(seeds[i], "bootstrap"));
      for (auto& r : rows) r = static_cast<std::size_t>(rng.below(n));
    } else {
      for (std::size_t j = 0; j < n; ++j) rows[j] = j;
    }
    trees[i] = detail::train_tree_on_rows(samples, rows, cfg.tree, seeds[i]);
  });
  return ForestModel(cfg, seed, samples.front().features.size(), std::move(trees), std::move(seeds));
}

void save_forest(const ForestModel& forest, const std::string& path) {
  ChecksumWriter out(path);
  const auto& cfg = forest.config();
  out.bytes(kMagic, sizeof(kMagic));
  out.u32(kFormatVersion);
  out.u32(static_cast<std::uint32_t>(forest.n_features()));
  out.u64(cfg.n_estimators);
  out.u8(cfg.bootstrap ? 1 : 0);
  out.i32(cfg.tree.max_depth ? static_cast<std::int32_t>(*cfg.tree.max_depth) : -1);
  out.u64(cfg.tree.min_samples_leaf);
  out.u64(cfg.tree.max_features);
  out.u64(forest.seed());
  out.u64(forest.feature_provenance());
  out.u64(forest.trees().size());
  for (std::size_t t = 0; t < forest.trees().size(); ++t) {
    out.u64(forest.tree_seeds()[t]);
    const auto& nodes = forest.trees()[t].nodes();
    out.u32(static_cast<std::uint32_t>(nodes.size()));
    for (const auto& n : nodes) {
      out.i32(n.feature);
      out.f64(n.threshold);
      out.i32(n.left);
      out.i32(n.right);
      out.u64(n.counts[0]);
      out.u64(n.counts[1]);
      out.f64(n.gain);
    }
  }
  out.finish();
}

ForestModel load_forest(const std::string& path) {
  ChecksumReader in = ChecksumReader::open(path);
  char magic[sizeof(kMagic)];
  in.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw ModelFormatError(path + ": not an OFFRF1 forest file");
  const std::uint32_t version = in.u32();
  if (version != kFormatVersion)
    throw ModelFormatError(path + ": unsupported forest format version " + std::to_string(version));
  ForestConfig cfg;
  const std::uint32_t n_features = in.u32();
  cfg.n_estimators = in.u64();
  cfg.bootstrap = in.u8() != 0;
  const std::int32_t depth = in.i32();
  if (depth >= 0) cfg.tree.max_depth = static_cast<std::uint32_t>(depth);
  cfg.tree.min_samples_leaf = in.u64();
  cfg.tree.max_features = in.u64();
  const std::uint64_t seed = in.u64();
  const std::uint64_t provenance = in.u64();
  const std::uint64_t n_trees = in.u64();
  if (n_trees != cfg.n_estimators) throw ModelFormatError(path + ": tree count does not match n_estimators");
  constexpr std::size_t kNodeBytes = 4 + 8 + 4 + 4 + 8 + 8 + 8;
  if (n_trees > in.remaining() / 12) throw ModelFormatError(path + ": tree count exceeds file size");
  std::vector<DecisionTree> trees;
  std::vector<std::uint64_t> seeds;
  trees.reserve(n_trees);
  for (std::uint64_t t = 0; t < n_trees; ++t) {
    seeds.push_back(in.u64());
    const std::uint32_t n_nodes = in.u32();
    if (n_nodes == 0 || n_nodes > in.remaining() / kNodeBytes) throw ModelFormatError(path + ": bad node count");
    std::vector<TreeNode> nodes(n_nodes);
    for (std::uint32_t i = 0; i < n_nodes; ++i) {
      auto& n = nodes[i];
      n.feature = in.i32();
      n.threshold = in.f64();
      n.left = in.i32();
      n.right = in.i32();
      n.counts[0] = in.u64();
      n.counts[1] = in.u64();
      n.gain = in.f64();
      if (!n.is_leaf()) {
        const auto self = static_cast<std::int32_t>(i);
        if (n.feature >= static_cast<std::int32_t>(n_features) || n.left <= self || n.right <= self ||
            n.left >= static_cast<std::int32_t>(n_nodes) || n.right >= static_cast<std::int32_t>(n_nodes))
          throw ModelFormatError(path + ": malformed tree structure");
      } else if (n.counts[0] + n.counts[1] == 0) {
        throw ModelFormatError(path + ": empty leaf");
      }
    }
    trees.emplace_back(std::move(nodes));
  }
  in.expect_end();
  ForestModel forest(cfg, seed, n_features, std::move(trees), std::move(seeds));
  forest.set_feature_provenance(provenance);
  return forest;
}

}  // namespace offense::classifier
