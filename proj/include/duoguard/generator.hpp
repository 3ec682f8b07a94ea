#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "duoguard/distributions.hpp"
#include "duoguard/proposal.hpp"
#include "duoguard/rng.hpp"

namespace duoguard {

struct PolicyKey {
  std::string seed_id;
  PromptTag tag = PromptTag::safe;

  auto operator<=>(const PolicyKey&) const = default;
};

/// Conditional softmax policy over a finite candidate space.
///
/// Rows are keyed by (seed id, prompt tag). Seeds without their own row read
/// the per-tag default row, so a freshly admitted seed starts from the
/// reference behavior.
class GeneratorPolicy {
 public:
  GeneratorPolicy() = default;
  GeneratorPolicy(std::vector<double> safe_default, std::vector<double> unsafe_default, double temperature = 1.0);
  static GeneratorPolicy uniform(std::size_t num_candidates, double temperature = 1.0);

  std::size_t num_candidates() const { return defaults_[0].size(); }
  double temperature() const { return temperature_; }

  std::span<const double> logits(const std::string& seed_id, PromptTag tag) const;
  /// Creates the seed's own row (copied from the default) on first use.
  std::vector<double>& mutable_logits(const std::string& seed_id, PromptTag tag);
  std::span<const double> default_logits(PromptTag tag) const { return defaults_[static_cast<std::size_t>(tag)]; }
  const std::map<PolicyKey, std::vector<double>>& rows() const { return rows_; }

  /// softmax(logits / temperature); temperature defaults to the policy's own.
  ProbVector distribution(const std::string& seed_id, PromptTag tag) const;
  ProbVector distribution(const std::string& seed_id, PromptTag tag, double temperature) const;
  double log_prob(const std::string& seed_id, PromptTag tag, std::size_t candidate) const;

  bool operator==(const GeneratorPolicy&) const = default;

 private:
  std::array<std::vector<double>, 2> defaults_;
  double temperature_ = 1.0;
  std::map<PolicyKey, std::vector<double>> rows_;
};

/// Gradient over policy logits, one entry per touched row.
using PolicyGradient = std::map<PolicyKey, std::vector<double>>;

/// Numerically stable softmax(logits / temperature).
std::vector<double> softmax(std::span<const double> logits, double temperature = 1.0);

/// P(w > l) = sigmoid(r_w - r_l).
double bradley_terry_prob(double r_w, double r_l);

/// beta * (log-ratio of preferred - log-ratio of dispreferred) for one pair.
double dpo_margin(const GeneratorPolicy& policy, const GeneratorPolicy& reference, const PreferencePair& pair,
                  double beta);

/// Mean over pairs of -log sigmoid(margin), plus `nll_weight` times the mean
/// negative log-likelihood of the preferred candidates.
double dpo_objective(const GeneratorPolicy& policy, const GeneratorPolicy& reference,
                     std::span<const PreferencePair> pairs, double beta, double nll_weight);
PolicyGradient dpo_objective_gradient(const GeneratorPolicy& policy, const GeneratorPolicy& reference,
                                      std::span<const PreferencePair> pairs, double beta, double nll_weight);

/// Pure DPO loss with the logistic link. Throws std::invalid_argument on an
/// empty pair list and std::domain_error when the reference gives a
/// referenced candidate zero probability.
double dpo_loss(const GeneratorPolicy& policy, const GeneratorPolicy& reference, std::span<const PreferencePair> pairs,
                double beta);
PolicyGradient dpo_gradient(const GeneratorPolicy& policy, const GeneratorPolicy& reference,
                            std::span<const PreferencePair> pairs, double beta);

struct DpoTrainConfig {
  double beta = 0.1;
  double learning_rate = 1.0;
  std::size_t steps = 50;
  double nll_weight = 0.0;
};

struct GeneratorTrainResult {
  GeneratorPolicy policy;
  std::vector<double> loss_history;
  bool diverged = false;
};

/// Gradient descent on the DPO objective against a frozen reference.
GeneratorTrainResult train_generator_dpo(const GeneratorPolicy& policy, const GeneratorPolicy& reference,
                                         std::span<const PreferencePair> pairs, const DpoTrainConfig& config);

inline constexpr std::size_t kDefaultSamplesPerSeed = 8;
inline constexpr double kDefaultSamplingTemperature = 0.7;

/// Draws k i.i.d. candidates from softmax(logits / temperature). Returned
/// proposals carry seed id, tag and candidate index; rendering tokens and
/// assigning ids is left to the caller.
std::vector<Proposal> sample_proposals(const GeneratorPolicy& policy, const std::string& seed_id, PromptTag tag,
                                       std::size_t k, double temperature, Rng& rng);
std::vector<Proposal> sample_proposals(const GeneratorPolicy& policy, const std::string& seed_id, PromptTag tag,
                                       std::size_t k = kDefaultSamplesPerSeed,
                                       double temperature = kDefaultSamplingTemperature, std::uint64_t rng_seed = 0);

}  // namespace duoguard
