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
#include <cmath>
#include <numeric>

#include "offense/classifier.hpp"
#include "offense/errors.hpp"
#include "offense/rng.hpp"

namespace offense::classifier {

namespace {

// Gains below this are treated as zero; they are rounding noise from
// children whose class proportions equal the parent's.
constexpr double kMinGain = 1e-12;

struct SplitCandidate {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double gain = 0.0;
  std::size_t left_size = 0;  // position in the sorted segment
};

class TreeBuilder {
 public:
  TreeBuilder(std::span<const LabeledSample> samples, std::span<const std::size_t> rows, const TreeConfig& cfg,
              std::uint64_t seed)
      : cfg_(cfg), rng_(seed) {
    n_features_ = samples[rows[0]].features.size();
    const std::size_t n = rows.size();
    x_.assign(n_features_, std::vector<double>(n));
    y_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& s = samples[rows[i]];
      if (s.features.size() != n_features_) throw DataError("samples disagree on feature count");
      for (std::size_t f = 0; f < n_features_; ++f) {
        if (!std::isfinite(s.features[f])) throw DataError("non-finite feature value");
        x_[f][i] = s.features[f];
      }
      y_[i] = static_cast<std::uint8_t>(s.label);
    }
    order_.assign(n_features_, std::vector<std::uint32_t>(n));
    for (std::size_t f = 0; f < n_features_; ++f) {
      auto& ord = order_[f];
      std::iota(ord.begin(), ord.end(), 0u);
      const auto& col = x_[f];
      std::stable_sort(ord.begin(), ord.end(), [&](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
    }
    goes_left_.resize(n);
    feature_pool_.resize(n_features_);
    std::iota(feature_pool_.begin(), feature_pool_.end(), std::size_t{0});
  }

  std::vector<TreeNode> build() {
    struct Work {
      std::int32_t node;
      std::size_t begin, end, depth;
    };
    std::vector<TreeNode> nodes(1);
    std::vector<Work> stack{{0, 0, y_.size(), 0}};
    while (!stack.empty()) {
      const Work w = stack.back();
      stack.pop_back();
      TreeNode& node = nodes[w.node];
      for (std::size_t i = w.begin; i < w.end; ++i) ++node.counts[y_[order_[0][i]]];

      const bool pure = node.counts[0] == 0 || node.counts[1] == 0;
      const bool depth_cap = cfg_.max_depth && w.depth >= *cfg_.max_depth;
      const std::size_t min_leaf = std::max<std::size_t>(1, cfg_.min_samples_leaf);
      if (pure || depth_cap || w.end - w.begin < 2 * min_leaf) continue;

      const SplitCandidate best = find_split(w.begin, w.end, node.counts, min_leaf);
      if (!best.found) continue;

      const std::size_t mid = w.begin + best.left_size;
      partition(w.begin, w.end, best.feature, mid);
      node.feature = static_cast<std::int32_t>(best.feature);
      node.threshold = best.threshold;
      node.gain = best.gain;
      const auto left = static_cast<std::int32_t>(nodes.size());
      nodes[w.node].left = left;
      nodes[w.node].right = left + 1;
      nodes.emplace_back();
      nodes.emplace_back();
      // Right pushed first so the left subtree is expanded first; indices are
      // already fixed so children still follow their parent.
      stack.push_back({left + 1, mid, w.end, w.depth + 1});
      stack.push_back({left, w.begin, mid, w.depth + 1});
    }
    return nodes;
  }

 private:
  SplitCandidate find_split(std::size_t begin, std::size_t end, const std::uint64_t counts[2], std::size_t min_leaf) {
    const std::size_t n = end - begin;
    const double parent = entropy(counts[0], counts[1]);
    std::size_t n_try = n_features_;
    if (cfg_.max_features > 0 && cfg_.max_features < n_features_) {
      n_try = cfg_.max_features;
      for (std::size_t i = 0; i < n_try; ++i) {
        const auto j = i + static_cast<std::size_t>(rng_.below(n_features_ - i));
        std::swap(feature_pool_[i], feature_pool_[j]);
      }
      std::sort(feature_pool_.begin(), feature_pool_.begin() + static_cast<std::ptrdiff_t>(n_try));
    }
    SplitCandidate best;
    for (std::size_t fi = 0; fi < n_try; ++fi) {
      const std::size_t f = feature_pool_[fi];
      const auto& ord = order_[f];
      const auto& col = x_[f];
      std::uint64_t left[2] = {0, 0};
      for (std::size_t i = begin; i + 1 < end; ++i) {
        ++left[y_[ord[i]]];
        const double v = col[ord[i]];
        const double next = col[ord[i + 1]];
        if (!(v < next)) continue;
        const std::size_t n_left = i + 1 - begin;
        if (n_left < min_leaf || n - n_left < min_leaf) continue;
        const std::uint64_t right0 = counts[0] - left[0], right1 = counts[1] - left[1];
        const double gain = parent - (static_cast<double>(n_left) / n) * entropy(left[0], left[1]) -
                            (static_cast<double>(n - n_left) / n) * entropy(right0, right1);
        if (gain > kMinGain && (!best.found || gain > best.gain)) {
          double thr = v + (next - v) / 2.0;
          if (!(thr < next)) thr = v;
          best = {true, f, thr, gain, n_left};
        }
      }
    }
    return best;
  }

  // Stable-partitions every feature's segment so the left child's samples
  // come first, preserving sorted order on both sides.
  void partition(std::size_t begin, std::size_t end, std::size_t feature, std::size_t mid) {
    const auto& split_ord = order_[feature];
    for (std::size_t i = begin; i < end; ++i) goes_left_[split_ord[i]] = i < mid;
    for (std::size_t f = 0; f < n_features_; ++f) {
      if (f == feature) continue;
      auto first = order_[f].begin() + static_cast<std::ptrdiff_t>(begin);
      auto last = order_[f].begin() + static_cast<std::ptrdiff_t>(end);
      std::stable_partition(first, last, [&](std::uint32_t r) { return goes_left_[r] != 0; });
    }
  }

  const TreeConfig& cfg_;
  Rng rng_;
  std::size_t n_features_ = 0;
  std::vector<std::vector<double>> x_;
  std::vector<std::uint8_t> y_;
  std::vector<std::vector<std::uint32_t>> order_;
  std::vector<std::uint8_t> goes_left_;
  std::vector<std::size_t> feature_pool_;
};

}  // namespace

double entropy(std::uint64_t not_offensive, std::uint64_t offensive) {
  const double n = static_cast<double>(not_offensive + offensive);
  if (n == 0.0) return 0.0;
  double h = 0.0;
  for (std::uint64_t c : {not_offensive, offensive}) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h;
}

DecisionTree::DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw DataError("decision tree needs at least one node");
}

Label DecisionTree::vote(std::span<const double> features) const {
  std::size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const auto& n = nodes_[i];
    i = static_cast<std::size_t>(features[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return nodes_[i].counts[1] > nodes_[i].counts[0] ? Label::Offensive : Label::NotOffensive;
}

Prediction DecisionTree::predict(std::span<const double> features) const {
  const Label l = vote(features);
  return {l, l == Label::Offensive ? 1.0 : 0.0};
}

std::size_t DecisionTree::depth() const {
  std::vector<std::size_t> d(nodes_.size(), 0);
  std::size_t best = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    best = std::max(best, d[i]);
    if (!nodes_[i].is_leaf()) {
      d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
    }
  }
  return best;
}

std::size_t DecisionTree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

namespace detail {

DecisionTree train_tree_on_rows(std::span<const LabeledSample> samples, std::span<const std::size_t> rows,
                                const TreeConfig& cfg, std::uint64_t seed) {
  if (rows.empty()) throw EmptyTrainingSet("cannot train a tree on zero samples");
  TreeBuilder builder(samples, rows, cfg, seed);
  return DecisionTree(builder.build());
}

}  // namespace detail

DecisionTree train_tree(std::span<const LabeledSample> samples, const TreeConfig& cfg, std::uint64_t seed) {
  std::vector<std::size_t> rows(samples.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return detail::train_tree_on_rows(samples, rows, cfg, seed);
}

}  // namespace offense::classifier
