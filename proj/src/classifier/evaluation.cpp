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
#include <limits>
#include <numeric>

#include "offense/classifier.hpp"
#include "offense/csv.hpp"
#include "offense/errors.hpp"
#include "offense/hash.hpp"
#include "offense/rng.hpp"

namespace offense::classifier {

Metrics metrics_from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t tn, std::uint64_t fn) {
  Metrics m;
  m.tp = tp;
  m.fp = fp;
  m.tn = tn;
  m.fn = fn;
  const auto n = static_cast<double>(tp + fp + tn + fn);
  m.accuracy = n > 0 ? static_cast<double>(tp + tn) / n : 0.0;
  if (tp + fp == 0)
    m.precision_undefined = true;
  else
    m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn == 0)
    m.recall_undefined = true;
  else
    m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

Metrics evaluate(const Model& model, std::span<const LabeledSample> samples) {
  if (samples.empty()) throw EmptyEvaluationSet("cannot evaluate on zero samples");
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (const auto& s : samples) {
    const bool predicted = model.predict(s.features).label == Label::Offensive;
    const bool actual = s.label == Label::Offensive;
    if (predicted && actual)
      ++tp;
    else if (predicted)
      ++fp;
    else if (actual)
      ++fn;
    else
      ++tn;
  }
  return metrics_from_counts(tp, fp, tn, fn);
}

Trainer forest_trainer(const ForestConfig& cfg, unsigned workers) {
  return [cfg, workers](std::span<const LabeledSample> train, std::uint64_t seed) -> std::unique_ptr<Model> {
    return std::make_unique<ForestModel>(train_forest(train, cfg, seed, workers));
  };
}

Trainer tree_trainer(const TreeConfig& cfg) {
  return [cfg](std::span<const LabeledSample> train, std::uint64_t seed) -> std::unique_ptr<Model> {
    return std::make_unique<DecisionTree>(train_tree(train, cfg, seed));
  };
}

std::vector<std::vector<std::size_t>> kfold_partition(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw TooFewSamples("k-fold needs k >= 2");
  if (n < k) throw TooFewSamples(std::to_string(n) + " samples cannot fill " + std::to_string(k) + " folds");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "kfold"));
  rng.shuffle(std::span(idx));
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    folds[f].assign(idx.begin() + static_cast<std::ptrdiff_t>(pos), idx.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  return folds;
}

CvResult kfold_cv(std::span<const LabeledSample> samples, std::size_t k, const Trainer& trainer, std::uint64_t seed) {
  const auto folds = kfold_partition(samples.size(), k, seed);
  CvResult result;
  double acc = 0, prec = 0, rec = 0, f1 = 0;
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<LabeledSample> train, validation;
    train.reserve(samples.size() - folds[f].size());
    for (std::size_t g = 0; g < k; ++g)
      for (std::size_t i : folds[g]) (g == f ? validation : train).push_back(samples[i]);

    auto model = trainer(train, derive_seed(seed, f));
    FoldResult fr;
    fr.metrics = evaluate(*model, validation);
    fr.n_train = train.size();
    fr.n_validation = validation.size();
    for (const auto& s : validation) (s.label == Label::Offensive ? fr.validation_offensive : fr.validation_not_offensive)++;

    acc += fr.metrics.accuracy;
    prec += fr.metrics.precision;
    rec += fr.metrics.recall;
    f1 += fr.metrics.f1;
    result.mean.tp += fr.metrics.tp;
    result.mean.fp += fr.metrics.fp;
    result.mean.tn += fr.metrics.tn;
    result.mean.fn += fr.metrics.fn;
    result.mean.precision_undefined |= fr.metrics.precision_undefined;
    result.mean.recall_undefined |= fr.metrics.recall_undefined;
    result.folds.push_back(fr);
  }
  const auto kd = static_cast<double>(k);
  result.mean.accuracy = acc / kd;
  result.mean.precision = prec / kd;
  result.mean.recall = rec / kd;
  result.mean.f1 = f1 / kd;
  return result;
}

std::vector<ForestConfig> default_grid() {
  std::vector<ForestConfig> grid;
  const std::optional<std::uint32_t> depths[] = {2u, 4u, 8u, std::nullopt};
  for (std::size_t est : {10, 50, 100, 200})
    for (const auto& depth : depths)
      for (std::size_t leaf : {1, 5, 20}) {
        ForestConfig c;
        c.n_estimators = est;
        c.tree.max_depth = depth;
        c.tree.min_samples_leaf = leaf;
        grid.push_back(c);
      }
  return grid;
}

GridResult grid_search(std::span<const LabeledSample> samples, const std::vector<ForestConfig>& grid, std::size_t k,
                       std::uint64_t seed, unsigned workers) {
  if (grid.empty()) throw ConfigError("parameter grid is empty");
  GridResult result;
  auto depth_key = [](const ForestConfig& c) {
    return c.tree.max_depth ? static_cast<std::uint64_t>(*c.tree.max_depth) : std::numeric_limits<std::uint64_t>::max();
  };
  for (std::size_t i = 0; i < grid.size(); ++i) {
    // Every configuration sees the same folds.
    result.rows.push_back({grid[i], kfold_cv(samples, k, forest_trainer(grid[i], workers), seed)});
    const auto& cand = result.rows[i];
    const auto& best = result.rows[result.best_index];
    if (i == 0) continue;
    const bool better =
        cand.cv.mean.f1 > best.cv.mean.f1 ||
        (cand.cv.mean.f1 == best.cv.mean.f1 &&
         (cand.config.n_estimators < best.config.n_estimators ||
          (cand.config.n_estimators == best.config.n_estimators && depth_key(cand.config) < depth_key(best.config))));
    if (better) result.best_index = i;
  }
  return result;
}

Split holdout_split(std::span<const LabeledSample> samples, double holdout_fraction, std::uint64_t seed) {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) throw ConfigError("holdout fraction must be in (0, 1)");
  const std::size_t n = samples.size();
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * (1.0 - holdout_fraction)));
  if (n_train == 0 || n_train >= n)
    throw DegenerateSplit("holdout fraction " + format_double(holdout_fraction) + " of " + std::to_string(n) +
                          " samples leaves one side empty");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "holdout"));
  rng.shuffle(std::span(idx));
  Split s;
  s.train.reserve(n_train);
  s.holdout.reserve(n - n_train);
  for (std::size_t i = 0; i < n; ++i) (i < n_train ? s.train : s.holdout).push_back(samples[idx[i]]);
  return s;
}

std::vector<double> default_sweep_fractions() {
  std::vector<double> f;
  for (int i = 1; i <= 19; ++i) f.push_back(i * 5 / 100.0);
  return f;
}

std::vector<double> default_confidence_thresholds() { return {0.0, 0.35, 0.70}; }

std::vector<SweepRow> sweep_holdout_and_confidence(std::span<const LabeledSample> samples,
                                                   const std::vector<double>& holdout_fractions,
                                                   const std::vector<double>& thresholds, const ForestConfig& cfg,
                                                   std::uint64_t seed, unsigned workers) {
  std::vector<SweepRow> rows;
  for (std::size_t ti = 0; ti < thresholds.size(); ++ti) {
    const auto kept = filter_by_confidence(samples, thresholds[ti]);
    for (std::size_t fi = 0; fi < holdout_fractions.size(); ++fi) {
      SweepRow row;
      row.holdout_fraction = holdout_fractions[fi];
      row.conf_threshold = thresholds[ti];
      const std::uint64_t cell_seed = derive_seed(derive_seed(seed, ti), fi);
      try {
        const Split split = holdout_split(kept, holdout_fractions[fi], cell_seed);
        row.n_train = split.train.size();
        row.n_holdout = split.holdout.size();
        const ForestModel forest = train_forest(split.train, cfg, cell_seed, workers);
        row.metrics = evaluate(forest, split.holdout);
      } catch (const DataError& e) {
        row.skipped = true;
        row.skip_reason = e.what();
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "holdout_frac,conf_threshold,accuracy,precision,recall,f1,n_train,n_holdout\n";
  for (const auto& r : rows) {
    if (r.skipped) continue;
    out += csv_row({format_double(r.holdout_fraction), format_double(r.conf_threshold),
                    format_double(r.metrics.accuracy), format_double(r.metrics.precision),
                    format_double(r.metrics.recall), format_double(r.metrics.f1), std::to_string(r.n_train),
                    std::to_string(r.n_holdout)});
    out += "\n";
  }
  return out;
}

}  // namespace offense::classifier
