#include "duoguard/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "duoguard/rng.hpp"

namespace duoguard {

namespace {

using SeedLookup = std::unordered_map<std::string, const SeedExample*>;

SeedLookup index_seeds(std::span<const SeedExample> seeds) {
  SeedLookup lookup;
  lookup.reserve(seeds.size());
  for (const auto& s : seeds) lookup.emplace(s.id, &s);
  return lookup;
}

const SeedExample& seed_of(const SeedLookup& lookup, const Proposal& p) {
  auto it = lookup.find(p.seed_id);
  if (it == lookup.end()) throw std::invalid_argument("proposal '" + p.id + "' references unknown seed '" + p.seed_id + "'");
  return *it->second;
}

std::size_t abs_diff(std::size_t a, std::size_t b) { return a > b ? a - b : b - a; }

}  // namespace

LabelEchoScorer::LabelEchoScorer(double epsilon, std::uint64_t seed) : epsilon_(epsilon), seed_(seed) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("scorer epsilon must lie in [0, 1]");
}

int LabelEchoScorer::score(const Proposal& proposal) const {
  const std::uint64_t h = mix64(seed_ ^ hash_string(proposal.id));
  const bool flip = static_cast<double>(h >> 11) * 0x1.0p-53 < epsilon_;
  const bool unsafe = (proposal.ground_truth == SafetyLabel::unsafe) != flip;
  return unsafe ? 5 : 1;
}

int score_harmfulness(const HarmScorer& scorer, const Proposal& proposal) {
  if (proposal.tokens.empty()) throw std::invalid_argument("cannot score proposal '" + proposal.id + "' without tokens");
  const int s = scorer.score(proposal);
  if (s < 1 || s > 5) {
    throw ContractViolation("scorer returned " + std::to_string(s) + " for proposal '" + proposal.id +
                            "'; scores must lie in 1..5");
  }
  return s;
}

void FilterConfig::validate() const {
  if (!(1 <= safe_max_score && safe_max_score < unsafe_min_score && unsafe_min_score <= 5)) {
    throw std::invalid_argument("filter score bounds must satisfy 1 <= safe_max_score < unsafe_min_score <= 5");
  }
}

bool score_matches(int score, SafetyLabel seed_label, const FilterConfig& config) {
  return seed_label == SafetyLabel::safe ? score <= config.safe_max_score : score >= config.unsafe_min_score;
}

std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::refusal: return "refusal";
    case RejectReason::length: return "length";
    case RejectReason::score_mismatch: return "score_mismatch";
  }
  return "unknown";
}

bool contains_subsequence(const TokenSeq& haystack, const TokenSeq& needle) {
  if (needle.empty()) return false;
  return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) != haystack.end();
}

FilterResult filter_proposals(std::span<const Proposal> proposals, std::span<const SeedExample> seeds,
                              const FilterConfig& config) {
  config.validate();
  const auto lookup = index_seeds(seeds);
  FilterResult out;
  for (const auto& p : proposals) {
    const auto& seed = seed_of(lookup, p);
    if (!p.harm_score) throw std::invalid_argument("proposal '" + p.id + "' reached the filter unscored");
    const bool refusal = std::any_of(config.refusal_phrases.begin(), config.refusal_phrases.end(),
                                     [&](const TokenSeq& phrase) { return contains_subsequence(p.tokens, phrase); });
    if (refusal) {
      out.rejected.push_back({p, RejectReason::refusal});
    } else if (abs_diff(p.tokens.size(), seed.tokens.size()) > config.max_length_delta) {
      out.rejected.push_back({p, RejectReason::length});
    } else if (!score_matches(*p.harm_score, seed.label, config)) {
      out.rejected.push_back({p, RejectReason::score_mismatch});
    } else {
      out.kept.push_back(p);
    }
  }
  return out;
}

Partition partition_by_classification(std::span<const Proposal> kept, std::span<const SeedExample> seeds,
                                      const MultiLabelClassifier& classifier) {
  const auto lookup = index_seeds(seeds);
  Partition out;
  for (auto p : kept) {
    const auto& seed = seed_of(lookup, p);
    const auto c = classify(classifier, features_for(classifier, p.tokens));
    p.verdict = c.verdict;
    p.max_probability = c.max_probability;
    (c.verdict != seed.label ? out.mis : out.cor).push_back(std::move(p));
  }
  return out;
}

int level_for(bool misclassified, bool score_match) {
  if (score_match) return misclassified ? 1 : 2;
  return misclassified ? 3 : 4;
}

std::vector<Proposal> assign_levels(std::vector<Proposal> proposals, std::span<const SeedExample> seeds,
                                    const FilterConfig& config) {
  const auto lookup = index_seeds(seeds);
  for (auto& p : proposals) {
    if (!p.verdict || !p.harm_score) {
      throw std::invalid_argument("proposal '" + p.id + "' needs a verdict and a harm score before leveling");
    }
    const auto& seed = seed_of(lookup, p);
    p.level = level_for(*p.verdict != seed.label, score_matches(*p.harm_score, seed.label, config));
  }
  return proposals;
}

std::vector<PreferencePair> build_preference_pairs(std::span<const Proposal> leveled,
                                                   std::optional<std::size_t> per_seed_cap) {
  // Group by seed in first-appearance order.
  std::vector<std::string> order;
  std::unordered_map<std::string, std::array<std::vector<const Proposal*>, 4>> groups;
  for (const auto& p : leveled) {
    if (!p.level || *p.level < 1 || *p.level > 4) {
      throw std::invalid_argument("proposal '" + p.id + "' has no level");
    }
    auto [it, inserted] = groups.try_emplace(p.seed_id);
    if (inserted) order.push_back(p.seed_id);
    it->second[static_cast<std::size_t>(*p.level - 1)].push_back(&p);
  }

  std::vector<PreferencePair> pairs;
  for (const auto& seed_id : order) {
    const auto& g = groups.at(seed_id);
    if (g[0].empty()) continue;
    const bool strong = !g[1].empty();
    const auto& losers = strong ? g[1] : g[2];
    std::size_t emitted = 0;
    for (const Proposal* w : g[0]) {
      for (const Proposal* l : losers) {
        if (per_seed_cap && emitted >= *per_seed_cap) break;
        pairs.push_back({seed_id, *w, *l, strong ? PairStrength::strong : PairStrength::weak});
        ++emitted;
      }
    }
  }
  return pairs;
}

std::map<std::string, std::size_t> DatasetState::language_counts() const {
  std::map<std::string, std::size_t> counts;
  for (const auto& ex : examples) counts[ex.language]++;
  return counts;
}

const SeedExample& DatasetState::find(const std::string& id) const {
  auto it = std::find_if(examples.begin(), examples.end(), [&](const SeedExample& e) { return e.id == id; });
  if (it == examples.end()) throw std::out_of_range("no example with id '" + id + "'");
  return *it;
}

DatasetState initial_state(std::vector<SeedExample> seeds, std::size_t* duplicates_removed) {
  DatasetState state;
  std::set<TokenSeq> seen_tokens;
  std::set<std::string> seen_ids;
  std::size_t dropped = 0;
  for (auto& s : seeds) {
    validate_example(s);
    if (!seen_ids.insert(s.id).second) throw std::invalid_argument("duplicate seed id '" + s.id + "'");
    if (!seen_tokens.insert(s.tokens).second) {
      ++dropped;
      continue;
    }
    state.examples.push_back(std::move(s));
    state.origin_iteration.push_back(0);
  }
  if (state.examples.empty()) throw std::invalid_argument("seed dataset is empty");
  if (duplicates_removed) *duplicates_removed = dropped;
  return state;
}

DatasetState augment_dataset(const DatasetState& state, std::span<const Proposal> mis) {
  DatasetState next = state;
  next.iteration = state.iteration + 1;
  if (mis.empty()) return next;
  const auto lookup = index_seeds(state.examples);
  next.examples.reserve(state.examples.size() + mis.size());
  for (const auto& p : mis) {
    const auto& seed = seed_of(lookup, p);
    next.examples.push_back(SeedExample{p.id, p.tokens, seed.label, seed.categories, p.language});
    next.origin_iteration.push_back(next.iteration);
  }
  return next;
}

CategoryLabels category_labels(const SeedExample& example) {
  CategoryLabels labels{};
  if (example.label == SafetyLabel::unsafe) {
    for (auto c : example.categories) labels.at(c) = 1;
  }
  return labels;
}

std::vector<LabeledExample> to_training_set(std::span<const SeedExample> examples, std::size_t alphabet_size) {
  std::vector<LabeledExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    out.push_back({FeatureVector::from_tokens(ex.tokens, alphabet_size), category_labels(ex)});
  }
  return out;
}

std::vector<std::size_t> language_quota(const std::vector<std::string>& languages,
                                        const std::map<std::string, std::size_t>& counts, std::size_t k,
                                        QuotaMode mode) {
  if (languages.empty()) throw std::invalid_argument("quota needs at least one language");
  std::vector<double> weights(languages.size(), 1.0);
  if (mode == QuotaMode::inverse_proportional) {
    for (std::size_t i = 0; i < languages.size(); ++i) {
      auto it = counts.find(languages[i]);
      const std::size_t c = it == counts.end() ? 0 : it->second;
      weights[i] = 1.0 / static_cast<double>(std::max<std::size_t>(c, 1));
    }
  }
  double total = 0.0;
  for (double w : weights) total += w;
  std::vector<std::size_t> quota(languages.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < languages.size(); ++i) {
    const double exact = static_cast<double>(k) * weights[i] / total;
    quota[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[i];
    remainders.emplace_back(exact - static_cast<double>(quota[i]), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t j = 0; assigned < k; ++j, ++assigned) quota[remainders[j % remainders.size()].second]++;
  return quota;
}

bool IterationReport::arithmetic_consistent() const {
  return kept + rejected() == proposals && mis + cor == kept;
}

ClassifierTrainResult train_on_state(const DatasetState& state, const Lexicon& lexicon,
                                     const ClassifierTrainConfig& config, std::uint64_t init_seed) {
  const auto data = to_training_set(state.examples, lexicon.alphabet_size());
  auto cfg = config;
  cfg.init_seed = init_seed;
  return train_classifier(data, lexicon.alphabet_size() + 1, cfg);
}

void record_eval(IterationReport& report, const MultiLabelClassifier& classifier, std::span<const SeedExample> eval,
                 const std::string& primary_language) {
  if (eval.empty()) return;
  const auto f1 = eval_f1(classifier, eval);
  report.f1_overall = f1.overall_f1();
  for (const auto& [lang, counts] : f1.per_language) report.f1_languages[lang] = f1_score(counts);
  report.f1_minority = f1.minority_f1(primary_language);
}

IterationResult run_iteration(const DatasetState& state, const GeneratorPolicy& generator,
                              const MultiLabelClassifier& classifier, const PipelineConfig& config,
                              const PipelineContext& context, std::uint64_t rng_seed) {
  config.filter.validate();
  if (config.k == 0) throw std::invalid_argument("k must be at least 1");
  if (generator.num_candidates() != context.styles.size()) {
    throw std::invalid_argument("generator candidate space does not match the candidate styles");
  }
  const Lexicon& lexicon = context.lexicon;
  const int t = state.iteration + 1;

  IterationResult result;
  IterationReport& report = result.report;
  report.iteration = t;

  // Sample and render k proposals per dataset member.
  Rng sampling = Rng::substream(rng_seed, "sampling");
  Rng rendering = Rng::substream(rng_seed, "rendering");
  const auto quota = language_quota(lexicon.languages(), state.language_counts(), config.k, config.quota);
  std::vector<std::size_t> slot_language;
  for (std::size_t lang = 0; lang < quota.size(); ++lang) slot_language.insert(slot_language.end(), quota[lang], lang);

  std::vector<Proposal>& all = result.proposals;
  all.reserve(state.size() * config.k);
  std::size_t serial = 0;
  for (const auto& ex : state.examples) {
    auto drawn = sample_proposals(generator, ex.id, prompt_for(ex.label), config.k, config.temperature, sampling);
    for (std::size_t j = 0; j < drawn.size(); ++j) {
      Proposal& p = drawn[j];
      p.id = "syn" + std::to_string(t) + "-" + std::to_string(serial++);
      p.language = lexicon.languages()[slot_language[j]];
      p.ground_truth = ex.label;
      RenderRequest req{&ex.tokens, ex.label, ex.categories, slot_language[j], config.verbose_extra};
      p.tokens = render_candidate(lexicon, req, context.styles[p.candidate], rendering);
      p.refusal = std::any_of(config.filter.refusal_phrases.begin(), config.filter.refusal_phrases.end(),
                              [&](const TokenSeq& phrase) { return contains_subsequence(p.tokens, phrase); });
      p.harm_score = score_harmfulness(context.scorer, p);
      report.proposal_languages[p.language]++;
      all.push_back(std::move(p));
    }
  }
  report.proposals = all.size();

  auto filtered = filter_proposals(all, state.examples, config.filter);
  std::vector<Proposal> score_rejects;
  for (const auto& r : filtered.rejected) {
    switch (r.reason) {
      case RejectReason::refusal: ++report.rejected_refusal; break;
      case RejectReason::length: ++report.rejected_length; break;
      case RejectReason::score_mismatch:
        ++report.rejected_score;
        score_rejects.push_back(r.proposal);
        break;
    }
  }
  report.kept = filtered.kept.size();
  if (filtered.kept.empty()) report.warnings.push_back("no proposals survived filtering");

  auto partition = partition_by_classification(filtered.kept, state.examples, classifier);
  report.mis = partition.mis.size();
  report.cor = partition.cor.size();
  for (const auto& p : partition.mis) report.added_languages[p.language]++;

  result.state = augment_dataset(state, partition.mis);
  report.dataset_size = result.state.size();
  report.language_counts = result.state.language_counts();

  auto trained = train_on_state(result.state, lexicon, config.classifier,
                                Rng::substream(rng_seed, "classifier-init").next_u64());
  result.classifier = std::move(trained.model);
  report.classifier_loss = trained.final_loss();
  report.classifier_diverged = trained.diverged;
  if (trained.diverged) report.warnings.push_back("classifier training diverged");

  // Score-mismatched proposals still take part in leveling (Levels 3 and 4).
  auto mismatched = partition_by_classification(score_rejects, state.examples, classifier);
  std::vector<Proposal> pool;
  pool.reserve(partition.mis.size() + partition.cor.size() + score_rejects.size());
  for (auto* group : {&partition.mis, &partition.cor, &mismatched.mis, &mismatched.cor}) {
    pool.insert(pool.end(), group->begin(), group->end());
  }
  auto leveled = assign_levels(std::move(pool), state.examples, config.filter);
  std::sort(leveled.begin(), leveled.end(), [&](const Proposal& a, const Proposal& b) {
    // Restore generation order: ids are "syn<t>-<serial>".
    return std::stoul(a.id.substr(a.id.find('-') + 1)) < std::stoul(b.id.substr(b.id.find('-') + 1));
  });
  for (const auto& p : leveled) report.levels[static_cast<std::size_t>(*p.level - 1)]++;

  result.pairs = build_preference_pairs(leveled, config.pair_cap);
  for (const auto& pair : result.pairs) {
    (pair.strength == PairStrength::strong ? report.pairs_strong : report.pairs_weak)++;
  }

  if (result.pairs.empty()) {
    result.generator = generator;
    report.warnings.push_back("no preference pairs; generator unchanged");
  } else {
    auto g = train_generator_dpo(generator, context.reference, result.pairs, config.generator);
    report.generator_loss_before = g.loss_history.front();
    report.generator_loss_after = g.loss_history.back();
    if (g.diverged) report.warnings.push_back("generator training diverged");
    result.generator = std::move(g.policy);
  }

  // Write stage outcomes back onto the full proposal list.
  std::unordered_map<std::string, const Proposal*> by_id;
  for (const auto& p : leveled) by_id.emplace(p.id, &p);
  for (auto& p : all) {
    if (auto it = by_id.find(p.id); it != by_id.end()) p = *it->second;
  }
  result.mis = std::move(partition.mis);

  record_eval(report, result.classifier, context.eval_set, lexicon.languages().front());
  return result;
}

std::uint64_t initial_classifier_seed(std::uint64_t root_seed) {
  return Rng::substream(root_seed, "classifier-init", 0).next_u64();
}

std::uint64_t iteration_seed(std::uint64_t root_seed, int iteration) {
  return Rng::substream(root_seed, "iteration", static_cast<std::uint64_t>(iteration)).next_u64();
}

TrainingResult run_training(std::vector<SeedExample> seeds, std::size_t iterations, const PipelineConfig& config,
                            const PipelineContext& context, const GeneratorPolicy& initial_generator,
                            std::uint64_t root_seed) {
  if (iterations == 0) throw std::invalid_argument("training needs at least one iteration");
  TrainingResult out;
  std::size_t duplicates = 0;
  out.state = initial_state(std::move(seeds), &duplicates);

  auto initial = train_on_state(out.state, context.lexicon, config.classifier, initial_classifier_seed(root_seed));
  out.classifier = std::move(initial.model);
  out.generator = initial_generator;

  IterationReport baseline;
  baseline.dataset_size = out.state.size();
  baseline.language_counts = out.state.language_counts();
  baseline.classifier_loss = initial.final_loss();
  baseline.classifier_diverged = initial.diverged;
  if (duplicates > 0) baseline.warnings.push_back("removed " + std::to_string(duplicates) + " duplicate seeds");
  record_eval(baseline, out.classifier, context.eval_set, context.lexicon.languages().front());
  out.reports.push_back(std::move(baseline));

  for (std::size_t t = 1; t <= iterations; ++t) {
    auto step = run_iteration(out.state, out.generator, out.classifier, config, context,
                              iteration_seed(root_seed, static_cast<int>(t)));
    out.state = std::move(step.state);
    out.classifier = std::move(step.classifier);
    out.generator = std::move(step.generator);
    out.reports.push_back(std::move(step.report));
    out.proposals.push_back(std::move(step.proposals));
  }
  return out;
}

}  // namespace duoguard
