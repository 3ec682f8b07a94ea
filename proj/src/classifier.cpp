#include "duoguard/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "duoguard/rng.hpp"

namespace duoguard {

FeatureVector FeatureVector::from_tokens(std::span<const Token> tokens, std::size_t alphabet_size) {
  std::map<std::uint32_t, double> counts;
  for (Token t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= alphabet_size) {
      throw std::out_of_range("token " + std::to_string(t) + " outside alphabet of size " +
                              std::to_string(alphabet_size));
    }
    counts[static_cast<std::uint32_t>(t)] += 1.0;
  }
  FeatureVector fv;
  fv.dimension_ = alphabet_size + 1;
  fv.entries_.assign(counts.begin(), counts.end());
  fv.entries_.emplace_back(static_cast<std::uint32_t>(alphabet_size), 1.0);
  return fv;
}

FeatureVector FeatureVector::bias_only(std::size_t alphabet_size) { return from_tokens({}, alphabet_size); }

double FeatureVector::operator[](std::size_t i) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), i,
                             [](const auto& e, std::size_t idx) { return e.first < idx; });
  return (it != entries_.end() && it->first == i) ? it->second : 0.0;
}

MultiLabelClassifier::MultiLabelClassifier(std::size_t feature_dim, double threshold)
    : feature_dim_(feature_dim), weights_(kNumCategories * feature_dim, 0.0) {
  set_threshold(threshold);
}

void MultiLabelClassifier::set_threshold(double t) {
  for (std::size_t c = 0; c < kNumCategories; ++c) set_threshold(c, t);
}

void MultiLabelClassifier::set_threshold(std::size_t category, double t) {
  if (!(t > 0.0 && t < 1.0)) throw std::invalid_argument("threshold must lie in (0, 1)");
  thresholds_.at(category) = t;
}

bool MultiLabelClassifier::uniform_threshold() const {
  return std::all_of(thresholds_.begin(), thresholds_.end(), [&](double t) { return t == thresholds_[0]; });
}

double MultiLabelClassifier::logit(std::size_t category, const FeatureVector& x) const {
  if (x.dimension() != feature_dim_) throw std::invalid_argument("feature dimension mismatch");
  const double* w = weights_.data() + category * feature_dim_;
  double s = 0.0;
  for (const auto& [idx, v] : x.nonzeros()) s += w[idx] * v;
  return s;
}

std::array<double, kNumCategories> MultiLabelClassifier::probabilities(const FeatureVector& x) const {
  std::array<double, kNumCategories> p{};
  for (std::size_t c = 0; c < kNumCategories; ++c) p[c] = sigmoid(logit(c, x));
  return p;
}

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double log_sigmoid(double t) {
  if (t >= 0.0) return -std::log1p(std::exp(-t));
  return t - std::log1p(std::exp(t));
}

double bce_multilabel_loss(const MultiLabelClassifier& model, std::span<const LabeledExample> dataset) {
  if (dataset.empty()) throw std::invalid_argument("bce loss needs a non-empty dataset");
  double total = 0.0;
  for (const auto& ex : dataset) {
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      const double z = model.logit(c, ex.features);
      // -[y log s(z) + (1-y) log s(-z)]
      total -= ex.labels[c] ? log_sigmoid(z) : log_sigmoid(-z);
    }
  }
  return total / static_cast<double>(dataset.size());
}

namespace {

// Loss and gradient in one pass over the data.
double loss_and_gradient(const MultiLabelClassifier& model, std::span<const LabeledExample> dataset,
                         std::vector<double>& grad) {
  const std::size_t dim = model.feature_dim();
  grad.assign(kNumCategories * dim, 0.0);
  const double inv_n = 1.0 / static_cast<double>(dataset.size());
  double total = 0.0;
  for (const auto& ex : dataset) {
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      const double z = model.logit(c, ex.features);
      total -= ex.labels[c] ? log_sigmoid(z) : log_sigmoid(-z);
      const double residual = (sigmoid(z) - ex.labels[c]) * inv_n;
      double* g = grad.data() + c * dim;
      for (const auto& [idx, v] : ex.features.nonzeros()) g[idx] += residual * v;
    }
  }
  return total * inv_n;
}

}  // namespace

std::vector<double> bce_gradient(const MultiLabelClassifier& model, std::span<const LabeledExample> dataset) {
  if (dataset.empty()) throw std::invalid_argument("bce gradient needs a non-empty dataset");
  std::vector<double> grad;
  loss_and_gradient(model, dataset, grad);
  return grad;
}

Classification classify(const MultiLabelClassifier& model, const FeatureVector& x) {
  Classification out;
  out.probabilities = model.probabilities(x);
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    out.max_probability = std::max(out.max_probability, out.probabilities[c]);
    if (out.probabilities[c] > model.threshold(c)) out.verdict = SafetyLabel::unsafe;
  }
  return out;
}

ClassifierTrainResult train_classifier(std::span<const LabeledExample> dataset, std::size_t feature_dim,
                                       const ClassifierTrainConfig& config) {
  if (dataset.empty()) throw std::invalid_argument("cannot train a classifier on an empty dataset");
  ClassifierTrainResult result;
  result.model = MultiLabelClassifier(feature_dim, config.threshold);
  if (config.category_thresholds) {
    for (std::size_t c = 0; c < kNumCategories; ++c) result.model.set_threshold(c, (*config.category_thresholds)[c]);
  }
  Rng rng(config.init_seed);
  for (double& w : result.model.weights()) w = rng.uniform(-config.init_scale, config.init_scale);

  std::size_t consecutive_increases = 0;
  std::vector<double> grad;
  double prev = loss_and_gradient(result.model, dataset, grad);
  result.loss_history.push_back(prev);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    auto w = result.model.weights();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= config.learning_rate * grad[i];
    const double loss = epoch + 1 < config.epochs ? loss_and_gradient(result.model, dataset, grad)
                                                  : bce_multilabel_loss(result.model, dataset);
    result.loss_history.push_back(loss);
    consecutive_increases = loss > prev ? consecutive_increases + 1 : 0;
    prev = loss;
    if (consecutive_increases >= 10 || !std::isfinite(loss)) {
      result.diverged = true;
      break;
    }
  }
  return result;
}

}  // namespace duoguard
