#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "duoguard/classifier.hpp"
#include "duoguard/proposal.hpp"

namespace duoguard {

/// Confusion counts with "unsafe" as the positive class.
struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  void add(SafetyLabel truth, SafetyLabel predicted);
};

/// 2PR / (P + R). No predicted and no actual positives gives 1; no predicted
/// positives with actual positives present gives 0.
double f1_score(std::size_t tp, std::size_t fp, std::size_t fn);
inline double f1_score(const ConfusionCounts& c) { return f1_score(c.tp, c.fp, c.fn); }

struct F1Report {
  ConfusionCounts overall;
  std::map<std::string, ConfusionCounts> per_language;

  double overall_f1() const { return f1_score(overall); }
  double language_f1(const std::string& language) const;
  /// Mean per-language F1 over the languages other than `primary` that occur.
  double minority_f1(std::string_view primary) const;
};

/// Features use the classifier's own alphabet (feature_dim - 1).
FeatureVector features_for(const MultiLabelClassifier& model, const TokenSeq& tokens);

F1Report eval_f1(const MultiLabelClassifier& model, std::span<const SeedExample> examples);

/// Histograms of the max category probability over false positives and false
/// negatives. Bin i covers [i/bins, (i+1)/bins); probability 1 falls in the
/// last bin.
struct ConfidenceHistogram {
  std::size_t bins = 0;
  std::vector<std::size_t> false_positive;
  std::vector<std::size_t> false_negative;

  std::size_t total_false_positive() const;
  std::size_t total_false_negative() const;
  std::string to_csv() const;
};

ConfidenceHistogram confidence_histogram(const MultiLabelClassifier& model, std::span<const SeedExample> examples,
                                         std::size_t bins);

}  // namespace duoguard
