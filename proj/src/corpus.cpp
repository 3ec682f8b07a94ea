#include "duoguard/corpus.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "duoguard/rng.hpp"

namespace duoguard {

void CorpusConfig::validate() const {
  if (languages.empty()) throw std::invalid_argument("languages: must not be empty");
  if (proportions.size() != languages.size()) {
    throw std::invalid_argument("proportions: expected one entry per language");
  }
  double total = 0.0;
  for (double p : proportions) {
    if (!(p >= 0.0)) throw std::invalid_argument("proportions: entries must be non-negative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("proportions: must sum to 1");
  if (size == 0) throw std::invalid_argument("size: must be positive");
  if (!(unsafe_fraction >= 0.0 && unsafe_fraction <= 1.0)) {
    throw std::invalid_argument("unsafe_fraction: must lie in [0, 1]");
  }
  if (min_length == 0 || min_length > max_length) {
    throw std::invalid_argument("min_length/max_length: need 1 <= min_length <= max_length");
  }
  if (tokens_per_language < Lexicon::kMinTokensPerLanguage) {
    throw std::invalid_argument("tokens_per_language: must be at least " +
                                std::to_string(Lexicon::kMinTokensPerLanguage));
  }
  if (!(second_category_prob >= 0.0 && second_category_prob <= 1.0)) {
    throw std::invalid_argument("second_category_prob: must lie in [0, 1]");
  }
}

namespace {

constexpr int kMaxRedraws = 1000;

SeedExample draw_example(const CorpusConfig& config, const Lexicon& lexicon, std::size_t language, Rng& rng,
                         std::set<TokenSeq>& seen, std::string id) {
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    SeedExample ex;
    ex.id = id;
    ex.language = config.languages[language];
    ex.label = rng.bernoulli(config.unsafe_fraction) ? SafetyLabel::unsafe : SafetyLabel::safe;
    if (ex.label == SafetyLabel::unsafe) {
      const std::size_t first = rng.below(kNumCategories);
      ex.categories.push_back(first);
      if (rng.bernoulli(config.second_category_prob)) {
        const std::size_t second = (first + 1 + rng.below(kNumCategories - 1)) % kNumCategories;
        ex.categories.push_back(second);
      }
    }
    const std::size_t length = config.min_length + rng.below(config.max_length - config.min_length + 1);
    ex.tokens = render_content(lexicon, {language, ex.label, ex.categories, length, 1.0}, rng);
    if (seen.insert(ex.tokens).second) return ex;
  }
  throw std::runtime_error("could not draw a fresh token sequence; widen the length range");
}

}  // namespace

Corpus synth_corpus(const CorpusConfig& config, std::uint64_t seed) {
  config.validate();
  const Lexicon lexicon = config.lexicon();
  Rng rng = Rng::substream(seed, "corpus");
  std::set<TokenSeq> seen;
  Corpus out;

  // Held-out examples first so the training split never reuses them.
  out.test.reserve(config.test_size);
  for (std::size_t i = 0; i < config.test_size; ++i) {
    const std::size_t lang = config.balanced_test ? i % config.languages.size() : rng.categorical(config.proportions);
    out.test.push_back(draw_example(config, lexicon, lang, rng, seen, "test-" + std::to_string(i)));
  }
  out.train.reserve(config.size);
  for (std::size_t i = 0; i < config.size; ++i) {
    const std::size_t lang = rng.categorical(config.proportions);
    out.train.push_back(draw_example(config, lexicon, lang, rng, seen, "seed-" + std::to_string(i)));
  }
  return out;
}

}  // namespace duoguard
