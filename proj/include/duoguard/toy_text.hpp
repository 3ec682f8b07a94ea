#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "duoguard/proposal.hpp"
#include "duoguard/rng.hpp"

namespace duoguard {

/// Token layout of the synthetic multilingual text space.
///
/// Each language owns a contiguous block of `tokens_per_language` ids:
///   [0, 12)              one harm marker per category
///   [12, 14)             two "edgy" tokens, more frequent in unsafe text
///   [14, 14 + s)         safe-content tokens
///   [14 + s, block)      neutral filler
/// with s = (block - 14) / 2. Refusal phrases use shared ids after the last
/// language block.
class Lexicon {
 public:
  static constexpr std::size_t kMinTokensPerLanguage = kNumCategories + 4;

  explicit Lexicon(std::vector<std::string> languages, std::size_t tokens_per_language = 26);

  const std::vector<std::string>& languages() const { return languages_; }
  std::size_t num_languages() const { return languages_.size(); }
  std::size_t language_index(std::string_view language) const;
  std::size_t tokens_per_language() const { return block_; }
  std::size_t alphabet_size() const { return languages_.size() * block_ + kRefusalTokens; }

  Token marker(std::size_t language, std::size_t category) const;
  Token edgy(std::size_t language, std::size_t i) const;
  Token safe_token(std::size_t language, std::size_t i) const;
  Token filler(std::size_t language, std::size_t i) const;
  std::size_t num_safe_tokens() const { return (block_ - kNumCategories - 2) / 2; }
  std::size_t num_filler_tokens() const { return block_ - kNumCategories - 2 - num_safe_tokens(); }

  /// Token renderings of "I apologize" and "I cannot comply".
  const std::vector<TokenSeq>& refusal_phrases() const { return refusals_; }

  bool is_marker(Token t) const;

 private:
  static constexpr std::size_t kRefusalTokens = 5;
  std::vector<std::string> languages_;
  std::size_t block_;
  std::vector<TokenSeq> refusals_;
};

/// What to write: the rendering draws tokens from the cell profile of
/// (language, label, categories).
struct ContentSpec {
  std::size_t language = 0;
  SafetyLabel label = SafetyLabel::safe;
  std::vector<std::size_t> categories;
  std::size_t length = 1;
  /// 1 = plain; lower values thin out the label evidence (fewer markers in
  /// unsafe text, fewer safe-content and more edgy tokens in safe text).
  double strength = 1.0;
};

struct TextProfile {
  double marker_rate = 0.3;
  double unsafe_edgy_rate = 0.15;
  double safe_content_rate = 0.4;
  double safe_edgy_rate = 0.05;
  double subtle_edgy_boost = 0.3;
};

/// Unsafe renderings always contain at least one marker of their categories.
TokenSeq render_content(const Lexicon& lexicon, const ContentSpec& spec, Rng& rng, const TextProfile& profile = {});

/// Candidate space of the toy generator.
enum class CandidateKind { rewrite, refusal, verbose };

struct CandidateStyle {
  CandidateKind kind = CandidateKind::rewrite;
  double strength = 1.0;
};

/// Four rewrites of decreasing strength (1.0, 0.7, 0.4, 0.2), one refusal,
/// one verbose rewrite.
std::vector<CandidateStyle> default_candidate_styles();
/// Initial generator logits matching default_candidate_styles().
std::vector<double> default_initial_logits();

struct RenderRequest {
  const TokenSeq* seed_tokens = nullptr;
  SafetyLabel label = SafetyLabel::safe;
  std::vector<std::size_t> categories;
  std::size_t target_language = 0;
  std::size_t verbose_extra = 240;
};

/// Label-preserving rewrite of a seed into the target language, or a refusal
/// / overlong output depending on the candidate style.
TokenSeq render_candidate(const Lexicon& lexicon, const RenderRequest& request, const CandidateStyle& style, Rng& rng,
                          const TextProfile& profile = {});

}  // namespace duoguard
