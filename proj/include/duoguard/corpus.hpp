#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "duoguard/proposal.hpp"
#include "duoguard/toy_text.hpp"

namespace duoguard {

struct CorpusConfig {
  std::vector<std::string> languages{"en", "fr", "es", "de"};
  std::vector<double> proportions{0.814, 0.089, 0.052, 0.045};
  std::size_t size = 2000;
  std::size_t test_size = 2000;
  /// Held-out set split evenly over languages instead of following the
  /// training proportions.
  bool balanced_test = true;
  double unsafe_fraction = 0.5;
  std::size_t min_length = 6;
  std::size_t max_length = 24;
  std::size_t tokens_per_language = 26;
  double second_category_prob = 0.3;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  Lexicon lexicon() const { return Lexicon(languages, tokens_per_language); }
};

struct Corpus {
  std::vector<SeedExample> train;
  std::vector<SeedExample> test;
};

/// Deterministic per (config, seed). No token sequence appears twice across
/// or within the two splits.
Corpus synth_corpus(const CorpusConfig& config, std::uint64_t seed);

}  // namespace duoguard
