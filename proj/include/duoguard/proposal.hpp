#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace duoguard {

using Token = std::int32_t;
using TokenSeq = std::vector<Token>;

enum class SafetyLabel : std::uint8_t { safe = 0, unsafe = 1 };

/// Generator conditioning prompt; one per seed label.
enum class PromptTag : std::uint8_t { safe = 0, unsafe = 1 };

inline constexpr PromptTag prompt_for(SafetyLabel y) {
  return y == SafetyLabel::unsafe ? PromptTag::unsafe : PromptTag::safe;
}

std::string_view to_string(SafetyLabel y);
std::string_view to_string(PromptTag t);
SafetyLabel parse_safety_label(std::string_view s);

inline constexpr std::size_t kNumCategories = 12;

/// The twelve harm subcategories, in their fixed order.
class CategorySet {
 public:
  static const CategorySet& standard();

  std::size_t size() const { return names_.size(); }
  std::string_view name(std::size_t i) const { return names_.at(i); }
  const std::array<std::string, kNumCategories>& names() const { return names_; }
  /// Throws std::out_of_range for unknown names.
  std::size_t index_of(std::string_view name) const;

 private:
  CategorySet();
  std::array<std::string, kNumCategories> names_;
};

/// A labeled text example. Unsafe examples carry at least one category;
/// safe examples carry none.
struct SeedExample {
  std::string id;
  TokenSeq tokens;
  SafetyLabel label = SafetyLabel::safe;
  std::vector<std::size_t> categories;
  std::string language;
};

/// Throws std::invalid_argument when the label/category invariant is broken.
void validate_example(const SeedExample& example);

/// One generator sample moving through the pipeline. Optional fields are
/// filled by later stages (scoring, classification, leveling).
struct Proposal {
  std::string id;
  std::string seed_id;
  std::size_t candidate = 0;  // index into the generator's candidate space
  TokenSeq tokens;
  PromptTag tag = PromptTag::safe;
  std::string language;
  SafetyLabel ground_truth = SafetyLabel::safe;
  std::optional<int> harm_score;
  bool refusal = false;
  std::optional<SafetyLabel> verdict;
  double max_probability = 0.0;
  std::optional<int> level;
};

enum class PairStrength : std::uint8_t { strong, weak };

struct PreferencePair {
  std::string seed_id;
  Proposal preferred;
  Proposal dispreferred;
  PairStrength strength = PairStrength::strong;
};

}  // namespace duoguard
