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
#include "offense/hash.hpp"
#include "offense/rng.hpp"

namespace offense::classifier {

GaussianNaiveBayes GaussianNaiveBayes::fit(std::span<const LabeledSample> samples) {
  if (samples.empty()) throw EmptyTrainingSet("cannot fit naive Bayes on zero samples");
  const std::size_t d = samples.front().features.size();
  GaussianNaiveBayes nb;
  std::size_t count[2] = {0, 0};
  for (int c = 0; c < 2; ++c) {
    nb.mean_[c].assign(d, 0.0);
    nb.var_[c].assign(d, 0.0);
  }
  for (const auto& s : samples) {
    const int c = static_cast<int>(s.label);
    ++count[c];
    for (std::size_t j = 0; j < d; ++j) nb.mean_[c][j] += s.features[j];
  }
  for (int c = 0; c < 2; ++c)
    if (count[c])
      for (auto& m : nb.mean_[c]) m /= static_cast<double>(count[c]);
  for (const auto& s : samples) {
    const int c = static_cast<int>(s.label);
    for (std::size_t j = 0; j < d; ++j) {
      const double e = s.features[j] - nb.mean_[c][j];
      nb.var_[c][j] += e * e;
    }
  }
  // Variance smoothing: a small fraction of the largest overall feature variance.
  double max_var = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0, sq = 0.0;
    for (const auto& s : samples) mean += s.features[j];
    mean /= static_cast<double>(samples.size());
    for (const auto& s : samples) sq += (s.features[j] - mean) * (s.features[j] - mean);
    max_var = std::max(max_var, sq / static_cast<double>(samples.size()));
  }
  const double eps = 1e-9 * (max_var > 0.0 ? max_var : 1.0);
  for (int c = 0; c < 2; ++c) {
    nb.present_[c] = count[c] > 0;
    for (auto& v : nb.var_[c]) v = (count[c] ? v / static_cast<double>(count[c]) : 0.0) + eps;
    nb.log_prior_[c] = count[c] ? std::log(static_cast<double>(count[c]) / static_cast<double>(samples.size())) : 0.0;
  }
  return nb;
}

double GaussianNaiveBayes::posterior_offensive(std::span<const double> features) const {
  if (!present_[1]) return 0.0;
  if (!present_[0]) return 1.0;
  double ll[2];
  for (int c = 0; c < 2; ++c) {
    ll[c] = log_prior_[c];
    for (std::size_t j = 0; j < mean_[c].size(); ++j) {
      const double e = features[j] - mean_[c][j];
      ll[c] -= 0.5 * std::log(2.0 * 3.14159265358979323846 * var_[c][j]) + e * e / (2.0 * var_[c][j]);
    }
  }
  const double m = std::max(ll[0], ll[1]);
  const double p0 = std::exp(ll[0] - m), p1 = std::exp(ll[1] - m);
  return p1 / (p0 + p1);
}

Prediction GaussianNaiveBayes::predict(std::span<const double> features) const {
  const double p = posterior_offensive(features);
  return {p > 0.5 ? Label::Offensive : Label::NotOffensive, p};
}

LogisticSgd LogisticSgd::fit(std::span<const LabeledSample> samples, const SgdConfig& cfg, std::uint64_t seed) {
  if (samples.empty()) throw EmptyTrainingSet("cannot fit logistic regression on zero samples");
  const std::size_t d = samples.front().features.size();
  const auto n = static_cast<double>(samples.size());
  LogisticSgd m;
  m.mean_.assign(d, 0.0);
  m.scale_.assign(d, 1.0);
  m.weights_.assign(d, 0.0);
  for (const auto& s : samples)
    for (std::size_t j = 0; j < d; ++j) m.mean_[j] += s.features[j] / n;
  for (std::size_t j = 0; j < d; ++j) {
    double sq = 0.0;
    for (const auto& s : samples) sq += (s.features[j] - m.mean_[j]) * (s.features[j] - m.mean_[j]);
    const double sd = std::sqrt(sq / n);
    m.scale_[j] = sd > 0.0 ? sd : 1.0;
  }
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "sgd"));
  std::vector<double> x(d);
  std::uint64_t t = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    for (std::size_t i : order) {
      const auto& s = samples[i];
      double z = m.bias_;
      for (std::size_t j = 0; j < d; ++j) {
        x[j] = (s.features[j] - m.mean_[j]) / m.scale_[j];
        z += m.weights_[j] * x[j];
      }
      const double p = 1.0 / (1.0 + std::exp(-z));
      const double err = (s.label == Label::Offensive ? 1.0 : 0.0) - p;
      const double eta = cfg.eta0 / (1.0 + cfg.eta0 * cfg.l2 * static_cast<double>(t++));
      for (std::size_t j = 0; j < d; ++j) m.weights_[j] += eta * (err * x[j] - cfg.l2 * m.weights_[j]);
      m.bias_ += eta * err;
    }
  }
  return m;
}

double LogisticSgd::probability(std::span<const double> features) const {
  double z = bias_;
  for (std::size_t j = 0; j < weights_.size(); ++j) z += weights_[j] * (features[j] - mean_[j]) / scale_[j];
  return 1.0 / (1.0 + std::exp(-z));
}

Prediction LogisticSgd::predict(std::span<const double> features) const {
  const double p = probability(features);
  return {p > 0.5 ? Label::Offensive : Label::NotOffensive, p};
}

std::vector<BaselineRow> train_baselines(std::span<const LabeledSample> samples, std::uint64_t seed, std::size_t k,
                                         const ForestConfig& forest, const TreeConfig& tree, unsigned workers) {
  if (samples.empty()) throw EmptyTrainingSet("no samples for baseline comparison");
  const Trainer sgd = [](std::span<const LabeledSample> train, std::uint64_t s) -> std::unique_ptr<Model> {
    return std::make_unique<LogisticSgd>(LogisticSgd::fit(train, SgdConfig{}, s));
  };
  const Trainer nb = [](std::span<const LabeledSample> train, std::uint64_t) -> std::unique_ptr<Model> {
    return std::make_unique<GaussianNaiveBayes>(GaussianNaiveBayes::fit(train));
  };
  std::vector<BaselineRow> rows;
  rows.push_back({"Stochastic Gradient Descent", kfold_cv(samples, k, sgd, seed)});
  rows.push_back({"Naive Bayes", kfold_cv(samples, k, nb, seed)});
  rows.push_back({"Decision Tree", kfold_cv(samples, k, tree_trainer(tree), seed)});
  rows.push_back({"Random Forest", kfold_cv(samples, k, forest_trainer(forest, workers), seed)});
  return rows;
}

}  // namespace offense::classifier
