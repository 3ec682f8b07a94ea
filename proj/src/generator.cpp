#include "duoguard/generator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "duoguard/classifier.hpp"

namespace duoguard {

namespace {

std::size_t tag_index(PromptTag t) { return static_cast<std::size_t>(t); }

double log_softmax_at(std::span<const double> logits, double temperature, std::size_t i) {
  double max_z = -INFINITY;
  for (double z : logits) max_z = std::max(max_z, z / temperature);
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z / temperature - max_z);
  return logits[i] / temperature - max_z - std::log(sum);
}

void require_pairs(std::span<const PreferencePair> pairs) {
  if (pairs.empty()) throw std::invalid_argument("DPO needs at least one preference pair");
}

double reference_log_prob(const GeneratorPolicy& reference, const Proposal& p) {
  const double lp = reference.log_prob(p.seed_id, p.tag, p.candidate);
  if (!std::isfinite(lp)) {
    throw std::domain_error("reference assigns zero probability to candidate " + std::to_string(p.candidate) +
                            " of seed " + p.seed_id);
  }
  return lp;
}

// d log p(candidate) / d logits = (e_candidate - p) / temperature.
void add_log_prob_gradient(const GeneratorPolicy& policy, const Proposal& p, double scale, PolicyGradient& grad) {
  const auto probs = softmax(policy.logits(p.seed_id, p.tag), policy.temperature());
  auto& g = grad[PolicyKey{p.seed_id, p.tag}];
  if (g.empty()) g.assign(probs.size(), 0.0);
  const double s = scale / policy.temperature();
  for (std::size_t j = 0; j < probs.size(); ++j) g[j] -= s * probs[j];
  g[p.candidate] += s;
}

}  // namespace

GeneratorPolicy::GeneratorPolicy(std::vector<double> safe_default, std::vector<double> unsafe_default,
                                 double temperature)
    : defaults_{std::move(safe_default), std::move(unsafe_default)}, temperature_(temperature) {
  if (defaults_[0].empty() || defaults_[0].size() != defaults_[1].size()) {
    throw std::invalid_argument("default logit rows must be non-empty and equally sized");
  }
  if (!(temperature_ > 0.0)) throw std::invalid_argument("temperature must be positive");
}

GeneratorPolicy GeneratorPolicy::uniform(std::size_t num_candidates, double temperature) {
  return GeneratorPolicy(std::vector<double>(num_candidates, 0.0), std::vector<double>(num_candidates, 0.0),
                         temperature);
}

std::span<const double> GeneratorPolicy::logits(const std::string& seed_id, PromptTag tag) const {
  auto it = rows_.find(PolicyKey{seed_id, tag});
  if (it != rows_.end()) return it->second;
  return defaults_[tag_index(tag)];
}

std::vector<double>& GeneratorPolicy::mutable_logits(const std::string& seed_id, PromptTag tag) {
  auto [it, inserted] = rows_.try_emplace(PolicyKey{seed_id, tag});
  if (inserted) it->second = defaults_[tag_index(tag)];
  return it->second;
}

ProbVector GeneratorPolicy::distribution(const std::string& seed_id, PromptTag tag) const {
  return distribution(seed_id, tag, temperature_);
}

ProbVector GeneratorPolicy::distribution(const std::string& seed_id, PromptTag tag, double temperature) const {
  return ProbVector::from_masses(softmax(logits(seed_id, tag), temperature));
}

double GeneratorPolicy::log_prob(const std::string& seed_id, PromptTag tag, std::size_t candidate) const {
  const auto row = logits(seed_id, tag);
  if (candidate >= row.size()) throw std::out_of_range("candidate index outside the policy's candidate space");
  return log_softmax_at(row, temperature_, candidate);
}

std::vector<double> softmax(std::span<const double> logits, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  double max_z = -INFINITY;
  for (double z : logits) max_z = std::max(max_z, z / temperature);
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] / temperature - max_z);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

double bradley_terry_prob(double r_w, double r_l) { return sigmoid(r_w - r_l); }

double dpo_margin(const GeneratorPolicy& policy, const GeneratorPolicy& reference, const PreferencePair& pair,
                  double beta) {
  const auto& w = pair.preferred;
  const auto& l = pair.dispreferred;
  const double delta_w = policy.log_prob(w.seed_id, w.tag, w.candidate) - reference_log_prob(reference, w);
  const double delta_l = policy.log_prob(l.seed_id, l.tag, l.candidate) - reference_log_prob(reference, l);
  return beta * (delta_w - delta_l);
}

double dpo_objective(const GeneratorPolicy& policy, const GeneratorPolicy& reference,
                     std::span<const PreferencePair> pairs, double beta, double nll_weight) {
  require_pairs(pairs);
  double total = 0.0;
  for (const auto& pair : pairs) {
    total -= log_sigmoid(dpo_margin(policy, reference, pair, beta));
    if (nll_weight != 0.0) {
      const auto& w = pair.preferred;
      total -= nll_weight * policy.log_prob(w.seed_id, w.tag, w.candidate);
    }
  }
  return total / static_cast<double>(pairs.size());
}

PolicyGradient dpo_objective_gradient(const GeneratorPolicy& policy, const GeneratorPolicy& reference,
                                      std::span<const PreferencePair> pairs, double beta, double nll_weight) {
  require_pairs(pairs);
  PolicyGradient grad;
  const double inv_n = 1.0 / static_cast<double>(pairs.size());
  for (const auto& pair : pairs) {
    // d/dm [-log sigmoid(m)] = -sigmoid(-m)
    const double dm = -sigmoid(-dpo_margin(policy, reference, pair, beta)) * inv_n;
    add_log_prob_gradient(policy, pair.preferred, dm * beta, grad);
    add_log_prob_gradient(policy, pair.dispreferred, -dm * beta, grad);
    if (nll_weight != 0.0) add_log_prob_gradient(policy, pair.preferred, -nll_weight * inv_n, grad);
  }
  return grad;
}

double dpo_loss(const GeneratorPolicy& policy, const GeneratorPolicy& reference, std::span<const PreferencePair> pairs,
                double beta) {
  return dpo_objective(policy, reference, pairs, beta, 0.0);
}

PolicyGradient dpo_gradient(const GeneratorPolicy& policy, const GeneratorPolicy& reference,
                            std::span<const PreferencePair> pairs, double beta) {
  return dpo_objective_gradient(policy, reference, pairs, beta, 0.0);
}

GeneratorTrainResult train_generator_dpo(const GeneratorPolicy& policy, const GeneratorPolicy& reference,
                                         std::span<const PreferencePair> pairs, const DpoTrainConfig& config) {
  require_pairs(pairs);
  GeneratorTrainResult result{policy, {}, false};
  double prev = dpo_objective(result.policy, reference, pairs, config.beta, config.nll_weight);
  result.loss_history.push_back(prev);
  std::size_t consecutive_increases = 0;
  for (std::size_t step = 0; step < config.steps; ++step) {
    const auto grad = dpo_objective_gradient(result.policy, reference, pairs, config.beta, config.nll_weight);
    for (const auto& [key, g] : grad) {
      auto& row = result.policy.mutable_logits(key.seed_id, key.tag);
      for (std::size_t j = 0; j < row.size(); ++j) row[j] -= config.learning_rate * g[j];
    }
    const double loss = dpo_objective(result.policy, reference, pairs, config.beta, config.nll_weight);
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

std::vector<Proposal> sample_proposals(const GeneratorPolicy& policy, const std::string& seed_id, PromptTag tag,
                                       std::size_t k, double temperature, Rng& rng) {
  if (k == 0) throw std::invalid_argument("k must be at least 1");
  const auto probs = softmax(policy.logits(seed_id, tag), temperature);
  std::vector<Proposal> out(k);
  for (auto& p : out) {
    p.seed_id = seed_id;
    p.tag = tag;
    p.candidate = rng.categorical(probs);
  }
  return out;
}

std::vector<Proposal> sample_proposals(const GeneratorPolicy& policy, const std::string& seed_id, PromptTag tag,
                                       std::size_t k, double temperature, std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  return sample_proposals(policy, seed_id, tag, k, temperature, rng);
}

}  // namespace duoguard
