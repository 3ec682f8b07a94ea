#include "duoguard/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace duoguard {

void ConfusionCounts::add(SafetyLabel truth, SafetyLabel predicted) {
  const bool t = truth == SafetyLabel::unsafe;
  const bool p = predicted == SafetyLabel::unsafe;
  if (t && p) ++tp;
  else if (!t && p) ++fp;
  else if (t && !p) ++fn;
  else ++tn;
}

double f1_score(std::size_t tp, std::size_t fp, std::size_t fn) {
  if (tp + fp == 0) return fn == 0 ? 1.0 : 0.0;
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

double F1Report::language_f1(const std::string& language) const {
  auto it = per_language.find(language);
  if (it == per_language.end()) throw std::out_of_range("no examples for language '" + language + "'");
  return f1_score(it->second);
}

double F1Report::minority_f1(std::string_view primary) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [lang, counts] : per_language) {
    if (lang == primary) continue;
    sum += f1_score(counts);
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

FeatureVector features_for(const MultiLabelClassifier& model, const TokenSeq& tokens) {
  return FeatureVector::from_tokens(tokens, model.feature_dim() - 1);
}

F1Report eval_f1(const MultiLabelClassifier& model, std::span<const SeedExample> examples) {
  F1Report report;
  for (const auto& ex : examples) {
    const auto verdict = classify(model, features_for(model, ex.tokens)).verdict;
    report.overall.add(ex.label, verdict);
    report.per_language[ex.language].add(ex.label, verdict);
  }
  return report;
}

std::size_t ConfidenceHistogram::total_false_positive() const {
  return std::accumulate(false_positive.begin(), false_positive.end(), std::size_t{0});
}

std::size_t ConfidenceHistogram::total_false_negative() const {
  return std::accumulate(false_negative.begin(), false_negative.end(), std::size_t{0});
}

std::string ConfidenceHistogram::to_csv() const {
  std::ostringstream os;
  os << "bin_lo,bin_hi,false_positive,false_negative\n";
  for (std::size_t i = 0; i < bins; ++i) {
    os << static_cast<double>(i) / static_cast<double>(bins) << ',' << static_cast<double>(i + 1) / static_cast<double>(bins)
       << ',' << false_positive[i] << ',' << false_negative[i] << '\n';
  }
  return os.str();
}

ConfidenceHistogram confidence_histogram(const MultiLabelClassifier& model, std::span<const SeedExample> examples,
                                         std::size_t bins) {
  if (bins < 2) throw std::invalid_argument("confidence histogram needs at least 2 bins");
  ConfidenceHistogram h{bins, std::vector<std::size_t>(bins, 0), std::vector<std::size_t>(bins, 0)};
  for (const auto& ex : examples) {
    const auto c = classify(model, features_for(model, ex.tokens));
    if (c.verdict == ex.label) continue;
    const auto bin = std::min(bins - 1, static_cast<std::size_t>(c.max_probability * static_cast<double>(bins)));
    (ex.label == SafetyLabel::safe ? h.false_positive : h.false_negative)[bin]++;
  }
  return h;
}

}  // namespace duoguard
