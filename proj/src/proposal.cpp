#include "duoguard/proposal.hpp"

#include <algorithm>
#include <stdexcept>

namespace duoguard {

std::string_view to_string(SafetyLabel y) { return y == SafetyLabel::unsafe ? "unsafe" : "safe"; }

std::string_view to_string(PromptTag t) { return t == PromptTag::unsafe ? "unsafe" : "safe"; }

SafetyLabel parse_safety_label(std::string_view s) {
  if (s == "safe") return SafetyLabel::safe;
  if (s == "unsafe") return SafetyLabel::unsafe;
  throw std::invalid_argument("label must be 'safe' or 'unsafe', got '" + std::string(s) + "'");
}

void validate_example(const SeedExample& example) {
  if (example.label == SafetyLabel::unsafe && example.categories.empty()) {
    throw std::invalid_argument("unsafe example '" + example.id + "' has no categories");
  }
  if (example.label == SafetyLabel::safe && !example.categories.empty()) {
    throw std::invalid_argument("safe example '" + example.id + "' carries categories");
  }
  for (auto c : example.categories) {
    if (c >= kNumCategories) throw std::invalid_argument("example '" + example.id + "' has category out of range");
  }
}

CategorySet::CategorySet()
    : names_{"violent_crimes",        "non_violent_crimes", "sex_related_crimes",     "child_sexual_exploitation",
             "specialized_advice",    "privacy",            "intellectual_property",  "indiscriminate_weapons",
             "hate",                  "suicide_self_harm",  "sexual_content",         "jailbreak_prompts"} {}

const CategorySet& CategorySet::standard() {
  static const CategorySet set;
  return set;
}

std::size_t CategorySet::index_of(std::string_view name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw std::out_of_range("unknown category '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - names_.begin());
}

}  // namespace duoguard
