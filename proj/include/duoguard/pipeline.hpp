#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "duoguard/classifier.hpp"
#include "duoguard/generator.hpp"
#include "duoguard/metrics.hpp"
#include "duoguard/proposal.hpp"
#include "duoguard/toy_text.hpp"

namespace duoguard {

/// A scorer broke its output contract (score outside 1..5).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Pluggable harmfulness judge. Implementations must be deterministic
/// functions of the proposal so that scoring order does not matter.
class HarmScorer {
 public:
  virtual ~HarmScorer() = default;
  virtual int score(const Proposal& proposal) const = 0;
};

/// Returns 1 for ground-truth-safe and 5 for ground-truth-unsafe proposals,
/// flipped to the opposite extreme with probability `epsilon`. The flip is a
/// hash of (seed, proposal id), so it does not depend on call order.
class LabelEchoScorer final : public HarmScorer {
 public:
  explicit LabelEchoScorer(double epsilon = 0.0, std::uint64_t seed = 0);
  int score(const Proposal& proposal) const override;
  double epsilon() const { return epsilon_; }

 private:
  double epsilon_;
  std::uint64_t seed_;
};

/// Calls the scorer and checks the 1..5 range.
int score_harmfulness(const HarmScorer& scorer, const Proposal& proposal);

struct FilterConfig {
  int safe_max_score = 2;
  int unsafe_min_score = 3;
  std::size_t max_length_delta = 200;
  std::vector<TokenSeq> refusal_phrases;

  void validate() const;
};

/// True when the score agrees with the seed label under the filter bounds.
bool score_matches(int score, SafetyLabel seed_label, const FilterConfig& config);

enum class RejectReason { refusal, length, score_mismatch };
std::string_view to_string(RejectReason r);

struct Rejection {
  Proposal proposal;
  RejectReason reason;
};

struct FilterResult {
  std::vector<Proposal> kept;
  std::vector<Rejection> rejected;
};

bool contains_subsequence(const TokenSeq& haystack, const TokenSeq& needle);

/// Applies, in order, the refusal, length and score rules; a rejected
/// proposal carries the first rule it fails. Throws std::invalid_argument
/// for unscored proposals or unknown seeds.
FilterResult filter_proposals(std::span<const Proposal> proposals, std::span<const SeedExample> seeds,
                              const FilterConfig& config);

struct Partition {
  std::vector<Proposal> mis;
  std::vector<Proposal> cor;
};

/// Sets each proposal's verdict (and max probability) from the classifier
/// and splits by disagreement with the seed label.
Partition partition_by_classification(std::span<const Proposal> kept, std::span<const SeedExample> seeds,
                                      const MultiLabelClassifier& classifier);

/// 1 = misclassified & matching, 2 = correct & matching,
/// 3 = misclassified & mismatched, 4 = correct & mismatched.
int level_for(bool misclassified, bool score_match);

/// Requires verdict and harm score on every proposal.
std::vector<Proposal> assign_levels(std::vector<Proposal> proposals, std::span<const SeedExample> seeds,
                                    const FilterConfig& config);

/// Per seed: each Level-1 proposal against each Level-2 (strong); with no
/// Level 2, against each Level 3 (weak); no Level 1 excludes the seed.
/// `per_seed_cap` bounds the pairs emitted for a single seed.
std::vector<PreferencePair> build_preference_pairs(std::span<const Proposal> leveled,
                                                   std::optional<std::size_t> per_seed_cap = std::nullopt);

/// The evolving training multiset. origin_iteration[i] is 0 for seed data
/// and k for examples admitted at iteration k.
struct DatasetState {
  int iteration = 0;
  std::vector<SeedExample> examples;
  std::vector<int> origin_iteration;

  std::size_t size() const { return examples.size(); }
  std::map<std::string, std::size_t> language_counts() const;
  const SeedExample& find(const std::string& id) const;
};

/// Validates seeds and drops exact token-sequence duplicates (first kept).
DatasetState initial_state(std::vector<SeedExample> seeds, std::size_t* duplicates_removed = nullptr);

/// S(t) = S(t-1) + mis. New examples take the proposal's id, tokens and
/// language, and the seed's label and categories.
DatasetState augment_dataset(const DatasetState& state, std::span<const Proposal> mis);

CategoryLabels category_labels(const SeedExample& example);
std::vector<LabeledExample> to_training_set(std::span<const SeedExample> examples, std::size_t alphabet_size);

enum class QuotaMode { uniform, inverse_proportional };

/// Splits k generation slots over languages by largest remainder. Inverse
/// mode weights each language by 1 / max(count, 1).
std::vector<std::size_t> language_quota(const std::vector<std::string>& languages,
                                        const std::map<std::string, std::size_t>& counts, std::size_t k,
                                        QuotaMode mode);

struct PipelineConfig {
  std::size_t k = kDefaultSamplesPerSeed;
  double temperature = kDefaultSamplingTemperature;
  FilterConfig filter;
  ClassifierTrainConfig classifier;
  DpoTrainConfig generator;
  QuotaMode quota = QuotaMode::inverse_proportional;
  std::optional<std::size_t> pair_cap;
  std::size_t verbose_extra = 240;
};

/// Fixed collaborators shared by every iteration of one run.
struct PipelineContext {
  const Lexicon& lexicon;
  const HarmScorer& scorer;
  const GeneratorPolicy& reference;
  std::span<const SeedExample> eval_set = {};
  std::vector<CandidateStyle> styles = default_candidate_styles();
};

struct IterationReport {
  int iteration = 0;
  std::size_t dataset_size = 0;
  std::map<std::string, std::size_t> language_counts;
  std::size_t proposals = 0;
  std::map<std::string, std::size_t> proposal_languages;
  std::size_t rejected_refusal = 0;
  std::size_t rejected_length = 0;
  std::size_t rejected_score = 0;
  std::size_t kept = 0;
  std::size_t mis = 0;
  std::size_t cor = 0;
  std::map<std::string, std::size_t> added_languages;
  std::array<std::size_t, 4> levels{};
  std::size_t pairs_strong = 0;
  std::size_t pairs_weak = 0;
  double classifier_loss = 0.0;
  bool classifier_diverged = false;
  double generator_loss_before = 0.0;
  double generator_loss_after = 0.0;
  double f1_overall = 0.0;
  std::map<std::string, double> f1_languages;
  double f1_minority = 0.0;
  std::vector<std::string> warnings;

  std::size_t rejected() const { return rejected_refusal + rejected_length + rejected_score; }
  std::size_t pairs() const { return pairs_strong + pairs_weak; }
  /// kept = proposals - rejects and mis + cor = kept.
  bool arithmetic_consistent() const;

  bool operator==(const IterationReport&) const = default;
};

struct IterationResult {
  DatasetState state;
  MultiLabelClassifier classifier;
  GeneratorPolicy generator;
  IterationReport report;
  std::vector<Proposal> proposals;  // every proposal with its stage outcomes
  std::vector<Proposal> mis;
  std::vector<PreferencePair> pairs;
};

/// Trains a classifier from scratch on the state's examples.
ClassifierTrainResult train_on_state(const DatasetState& state, const Lexicon& lexicon,
                                     const ClassifierTrainConfig& config, std::uint64_t init_seed);

/// Fills held-out F1 fields of a report (no-op for an empty eval set).
void record_eval(IterationReport& report, const MultiLabelClassifier& classifier, std::span<const SeedExample> eval,
                 const std::string& primary_language);

/// One round: sample -> score -> filter -> partition -> augment -> retrain
/// classifier -> levels -> pairs -> DPO against the frozen reference.
IterationResult run_iteration(const DatasetState& state, const GeneratorPolicy& generator,
                              const MultiLabelClassifier& classifier, const PipelineConfig& config,
                              const PipelineContext& context, std::uint64_t rng_seed);

struct TrainingResult {
  MultiLabelClassifier classifier;
  GeneratorPolicy generator;
  DatasetState state;
  /// reports[0] describes the seed-only classifier; reports[t] iteration t.
  std::vector<IterationReport> reports;
  std::vector<std::vector<Proposal>> proposals;  // per iteration 1..T
};

/// Seeds for the initial classifier and for iteration t, from a root seed.
std::uint64_t initial_classifier_seed(std::uint64_t root_seed);
std::uint64_t iteration_seed(std::uint64_t root_seed, int iteration);

/// Outer training loop for T >= 1 iterations. The DPO reference stays the
/// initial generator throughout.
TrainingResult run_training(std::vector<SeedExample> seeds, std::size_t iterations, const PipelineConfig& config,
                            const PipelineContext& context, const GeneratorPolicy& initial_generator,
                            std::uint64_t root_seed);

}  // namespace duoguard
