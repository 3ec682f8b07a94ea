#include "duoguard/toy_text.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace duoguard {

Lexicon::Lexicon(std::vector<std::string> languages, std::size_t tokens_per_language)
    : languages_(std::move(languages)), block_(tokens_per_language) {
  if (languages_.empty()) throw std::invalid_argument("lexicon needs at least one language");
  if (block_ < kMinTokensPerLanguage) {
    throw std::invalid_argument("tokens_per_language must be at least " + std::to_string(kMinTokensPerLanguage));
  }
  for (std::size_t i = 0; i < languages_.size(); ++i) {
    for (std::size_t j = i + 1; j < languages_.size(); ++j) {
      if (languages_[i] == languages_[j]) throw std::invalid_argument("duplicate language " + languages_[i]);
    }
  }
  const auto base = static_cast<Token>(languages_.size() * block_);
  refusals_ = {{base, base + 1}, {base, base + 2, base + 3, base + 4}};
}

std::size_t Lexicon::language_index(std::string_view language) const {
  auto it = std::find(languages_.begin(), languages_.end(), language);
  if (it == languages_.end()) throw std::out_of_range("unknown language '" + std::string(language) + "'");
  return static_cast<std::size_t>(it - languages_.begin());
}

Token Lexicon::marker(std::size_t language, std::size_t category) const {
  return static_cast<Token>(language * block_ + category);
}

Token Lexicon::edgy(std::size_t language, std::size_t i) const {
  return static_cast<Token>(language * block_ + kNumCategories + i % 2);
}

Token Lexicon::safe_token(std::size_t language, std::size_t i) const {
  return static_cast<Token>(language * block_ + kNumCategories + 2 + i % num_safe_tokens());
}

Token Lexicon::filler(std::size_t language, std::size_t i) const {
  return static_cast<Token>(language * block_ + kNumCategories + 2 + num_safe_tokens() + i % num_filler_tokens());
}

bool Lexicon::is_marker(Token t) const {
  if (t < 0 || static_cast<std::size_t>(t) >= languages_.size() * block_) return false;
  return static_cast<std::size_t>(t) % block_ < kNumCategories;
}

TokenSeq render_content(const Lexicon& lexicon, const ContentSpec& spec, Rng& rng, const TextProfile& profile) {
  if (spec.length == 0) throw std::invalid_argument("content length must be positive");
  const bool unsafe = spec.label == SafetyLabel::unsafe;
  if (unsafe && spec.categories.empty()) throw std::invalid_argument("unsafe content needs a category");
  const double m = std::clamp(spec.strength, 0.0, 1.0);
  const std::size_t lang = spec.language;

  auto pick_marker = [&] { return lexicon.marker(lang, spec.categories[rng.below(spec.categories.size())]); };

  TokenSeq out;
  out.reserve(spec.length);
  bool has_marker = false;
  for (std::size_t i = 0; i < spec.length; ++i) {
    const double u = rng.uniform();
    if (unsafe) {
      const double p_marker = profile.marker_rate * m;
      if (u < p_marker) {
        out.push_back(pick_marker());
        has_marker = true;
      } else if (u < p_marker + profile.unsafe_edgy_rate) {
        out.push_back(lexicon.edgy(lang, rng.below(2)));
      } else {
        out.push_back(lexicon.filler(lang, rng.below(lexicon.num_filler_tokens())));
      }
    } else {
      const double p_safe = profile.safe_content_rate * m;
      const double p_edgy = profile.safe_edgy_rate + (1.0 - m) * profile.subtle_edgy_boost;
      if (u < p_safe) {
        out.push_back(lexicon.safe_token(lang, rng.below(lexicon.num_safe_tokens())));
      } else if (u < p_safe + p_edgy) {
        out.push_back(lexicon.edgy(lang, rng.below(2)));
      } else {
        out.push_back(lexicon.filler(lang, rng.below(lexicon.num_filler_tokens())));
      }
    }
  }
  if (unsafe && !has_marker) out[rng.below(out.size())] = pick_marker();
  return out;
}

std::vector<CandidateStyle> default_candidate_styles() {
  return {{CandidateKind::rewrite, 1.0},  {CandidateKind::rewrite, 0.7},  {CandidateKind::rewrite, 0.4},
          {CandidateKind::rewrite, 0.2},  {CandidateKind::refusal, 1.0},  {CandidateKind::verbose, 1.0}};
}

std::vector<double> default_initial_logits() { return {0.0, 0.0, 0.0, 0.0, -1.5, -1.5}; }

TokenSeq render_candidate(const Lexicon& lexicon, const RenderRequest& request, const CandidateStyle& style, Rng& rng,
                          const TextProfile& profile) {
  if (request.seed_tokens == nullptr) throw std::invalid_argument("render request without seed tokens");
  const std::size_t seed_len = std::max<std::size_t>(request.seed_tokens->size(), 1);
  const std::size_t lang = request.target_language;

  if (style.kind == CandidateKind::refusal) {
    TokenSeq out = lexicon.refusal_phrases()[rng.below(lexicon.refusal_phrases().size())];
    const std::size_t tail = 2 + rng.below(3);
    for (std::size_t i = 0; i < tail; ++i) out.push_back(lexicon.filler(lang, rng.below(lexicon.num_filler_tokens())));
    return out;
  }

  // Rewrites keep the seed length within +-3 tokens.
  const auto jitter = static_cast<long>(rng.below(7)) - 3;
  std::size_t length = static_cast<std::size_t>(std::max<long>(1, static_cast<long>(seed_len) + jitter));
  if (style.kind == CandidateKind::verbose) length = seed_len + request.verbose_extra;

  ContentSpec spec{lang, request.label, request.categories, length, style.strength};
  return render_content(lexicon, spec, rng, profile);
}

}  // namespace duoguard
