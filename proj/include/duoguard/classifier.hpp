#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "duoguard/proposal.hpp"

namespace duoguard {

/// Bag-of-tokens counts over an alphabet plus a constant bias feature.
///
/// Stored sparsely; dimension() = alphabet_size + 1 and the bias lives at
/// index alphabet_size.
class FeatureVector {
 public:
  FeatureVector() = default;
  /// Throws std::out_of_range for tokens outside [0, alphabet_size).
  static FeatureVector from_tokens(std::span<const Token> tokens, std::size_t alphabet_size);
  /// Bias only.
  static FeatureVector bias_only(std::size_t alphabet_size);

  std::size_t dimension() const { return dimension_; }
  std::size_t bias_index() const { return dimension_ - 1; }
  double operator[](std::size_t i) const;
  /// Sorted (index, count) pairs, including the bias entry.
  std::span<const std::pair<std::uint32_t, double>> nonzeros() const { return entries_; }

 private:
  std::size_t dimension_ = 0;
  std::vector<std::pair<std::uint32_t, double>> entries_;
};

using CategoryLabels = std::array<std::uint8_t, kNumCategories>;

struct LabeledExample {
  FeatureVector features;
  CategoryLabels labels{};  // all zero for safe content
};

struct Classification {
  std::array<double, kNumCategories> probabilities{};
  double max_probability = 0.0;
  SafetyLabel verdict = SafetyLabel::safe;
};

/// Twelve independent logistic heads over a shared feature space.
class MultiLabelClassifier {
 public:
  MultiLabelClassifier() = default;
  explicit MultiLabelClassifier(std::size_t feature_dim, double threshold = 0.5);

  std::size_t feature_dim() const { return feature_dim_; }
  double& weight(std::size_t category, std::size_t feature) { return weights_[category * feature_dim_ + feature]; }
  double weight(std::size_t category, std::size_t feature) const { return weights_[category * feature_dim_ + feature]; }
  std::span<double> weights() { return weights_; }
  std::span<const double> weights() const { return weights_; }

  double threshold(std::size_t category) const { return thresholds_[category]; }
  /// Same threshold for every category; must lie in (0, 1).
  void set_threshold(double t);
  void set_threshold(std::size_t category, double t);
  bool uniform_threshold() const;

  double logit(std::size_t category, const FeatureVector& x) const;
  std::array<double, kNumCategories> probabilities(const FeatureVector& x) const;

  bool operator==(const MultiLabelClassifier&) const = default;

 private:
  std::size_t feature_dim_ = 0;
  std::vector<double> weights_;  // row-major kNumCategories x feature_dim_
  std::array<double, kNumCategories> thresholds_{};
};

double sigmoid(double t);
/// log(sigmoid(t)) without overflow.
double log_sigmoid(double t);

/// Mean over examples of the summed per-category binary cross-entropy.
double bce_multilabel_loss(const MultiLabelClassifier& model, std::span<const LabeledExample> dataset);

/// Gradient of bce_multilabel_loss with respect to the weights (same layout).
std::vector<double> bce_gradient(const MultiLabelClassifier& model, std::span<const LabeledExample> dataset);

/// Unsafe iff some category probability strictly exceeds its threshold.
Classification classify(const MultiLabelClassifier& model, const FeatureVector& x);

struct ClassifierTrainConfig {
  double learning_rate = 0.5;
  std::size_t epochs = 300;
  std::uint64_t init_seed = 1;
  double init_scale = 0.01;
  double threshold = 0.5;
  /// Overrides `threshold` per category when set.
  std::optional<std::array<double, kNumCategories>> category_thresholds;
};

struct ClassifierTrainResult {
  MultiLabelClassifier model;
  std::vector<double> loss_history;  // loss before each epoch, then final
  bool diverged = false;

  double final_loss() const { return loss_history.empty() ? 0.0 : loss_history.back(); }
};

/// Full-batch gradient descent from a fresh uniform(-init_scale, init_scale)
/// initialization. Flags divergence after 10 consecutive loss increases.
ClassifierTrainResult train_classifier(std::span<const LabeledExample> dataset, std::size_t feature_dim,
                                       const ClassifierTrainConfig& config);

}  // namespace duoguard
