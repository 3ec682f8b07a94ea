#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "duoguard/corpus.hpp"
#include "duoguard/pipeline.hpp"
#include "duoguard/serialization.hpp"

using namespace duoguard;

namespace {

SeedExample seed(const std::string& id, SafetyLabel label, std::size_t length, const std::string& lang = "en") {
  SeedExample s;
  s.id = id;
  s.label = label;
  s.tokens.assign(length, 20);
  if (label == SafetyLabel::unsafe) s.categories = {0};
  s.language = lang;
  return s;
}

Proposal proposal(const std::string& id, const std::string& seed_id, TokenSeq tokens, int score) {
  Proposal p;
  p.id = id;
  p.seed_id = seed_id;
  p.tokens = std::move(tokens);
  p.harm_score = score;
  return p;
}

FilterConfig filter_config() {
  FilterConfig f;
  f.refusal_phrases = Lexicon({"en"}).refusal_phrases();
  return f;
}

/// Verdict controlled by token 0: present -> unsafe.
MultiLabelClassifier marker_classifier(std::size_t alphabet) {
  MultiLabelClassifier m(alphabet + 1);
  for (std::size_t c = 0; c < kNumCategories; ++c) m.weight(c, alphabet) = -20.0;
  m.weight(0, 0) = 40.0;
  return m;
}

Proposal leveled(const std::string& id, const std::string& seed_id, int level) {
  Proposal p;
  p.id = id;
  p.seed_id = seed_id;
  p.level = level;
  return p;
}

}  // namespace

TEST(LabelEchoScorer, EchoesAtZeroEpsilon) {
  LabelEchoScorer s(0.0);
  Proposal p = proposal("p", "s", {1}, 0);
  p.ground_truth = SafetyLabel::safe;
  EXPECT_EQ(s.score(p), 1);
  p.ground_truth = SafetyLabel::unsafe;
  EXPECT_EQ(s.score(p), 5);
  EXPECT_THROW(LabelEchoScorer(1.5), std::invalid_argument);
}

TEST(LabelEchoScorer, FlipRateWithinThreeSigma) {
  LabelEchoScorer s(0.5, 77);
  const int n = 20000;
  int flips = 0;
  for (int i = 0; i < n; ++i) {
    Proposal p = proposal("p" + std::to_string(i), "s", {1}, 0);
    flips += s.score(p) == 5;
  }
  EXPECT_LT(std::abs(flips - n * 0.5), 3 * std::sqrt(n * 0.25));
}

TEST(ScoreHarmfulness, RangeContract) {
  struct Bad : HarmScorer {
    int score(const Proposal&) const override { return 6; }
  } bad;
  Proposal p = proposal("p", "s", {1}, 0);
  EXPECT_THROW(score_harmfulness(bad, p), ContractViolation);
  p.tokens.clear();
  EXPECT_THROW(score_harmfulness(LabelEchoScorer(), p), std::invalid_argument);
}

TEST(FilterProposals, RuleExamples) {
  std::vector<SeedExample> seeds{seed("safe", SafetyLabel::safe, 10), seed("bad", SafetyLabel::unsafe, 10)};
  const auto cfg = filter_config();
  TokenSeq comply = cfg.refusal_phrases[1];
  comply.push_back(20);
  std::vector<Proposal> ps{proposal("a", "safe", TokenSeq(10, 20), 3), proposal("b", "safe", TokenSeq(260, 20), 1),
                           proposal("c", "bad", comply, 5), proposal("d", "bad", TokenSeq(12, 20), 4),
                           proposal("e", "safe", TokenSeq(210, 20), 2)};
  auto r = filter_proposals(ps, seeds, cfg);
  ASSERT_EQ(r.rejected.size(), 3u);
  EXPECT_EQ(r.rejected[0].proposal.id, "a");
  EXPECT_EQ(r.rejected[0].reason, RejectReason::score_mismatch);
  EXPECT_EQ(r.rejected[1].reason, RejectReason::length);
  EXPECT_EQ(r.rejected[2].reason, RejectReason::refusal);
  ASSERT_EQ(r.kept.size(), 2u);
  EXPECT_EQ(r.kept[0].id, "d");
  EXPECT_EQ(r.kept[1].id, "e");  // delta exactly 200 is kept
}

TEST(FilterProposals, UnscoredOrUnknownSeedRejected) {
  std::vector<SeedExample> seeds{seed("s", SafetyLabel::safe, 4)};
  Proposal p = proposal("p", "s", {1}, 1);
  p.harm_score.reset();
  EXPECT_THROW(filter_proposals(std::vector<Proposal>{p}, seeds, filter_config()), std::invalid_argument);
  EXPECT_THROW(filter_proposals(std::vector<Proposal>{proposal("q", "zz", {1}, 1)}, seeds, filter_config()),
               std::invalid_argument);
}

TEST(Partition, AgreeingAndDisagreeingClassifiers) {
  std::vector<SeedExample> seeds{seed("s", SafetyLabel::safe, 3), seed("u", SafetyLabel::unsafe, 3)};
  std::vector<Proposal> kept{proposal("a", "s", {1, 2}, 1), proposal("b", "u", {0, 2}, 5)};
  auto agree = partition_by_classification(kept, seeds, marker_classifier(30));
  EXPECT_TRUE(agree.mis.empty());
  EXPECT_EQ(agree.cor.size(), 2u);
  std::vector<Proposal> swapped{proposal("a", "s", {0, 2}, 1), proposal("b", "u", {1, 2}, 5)};
  auto disagree = partition_by_classification(swapped, seeds, marker_classifier(30));
  EXPECT_TRUE(disagree.cor.empty());
  ASSERT_EQ(disagree.mis.size(), 2u);
  EXPECT_EQ(disagree.mis[0].verdict, SafetyLabel::unsafe);
}

TEST(Partition, MatchesBruteForceRecheck) {
  Rng rng(4);
  std::vector<SeedExample> seeds;
  std::vector<Proposal> kept;
  for (int i = 0; i < 50; ++i) {
    seeds.push_back(seed("s" + std::to_string(i), rng.bernoulli(0.5) ? SafetyLabel::unsafe : SafetyLabel::safe, 3));
    TokenSeq t(4);
    for (auto& v : t) v = static_cast<Token>(rng.below(6));
    kept.push_back(proposal("p" + std::to_string(i), seeds.back().id, t, 1));
  }
  MultiLabelClassifier m(7);
  for (auto& w : m.weights()) w = rng.uniform(-1, 1);
  auto part = partition_by_classification(kept, seeds, m);
  std::set<std::string> mis_ids;
  for (const auto& p : part.mis) mis_ids.insert(p.id);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    bool unsafe = false;
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      double z = m.weight(c, 6);
      for (Token t : kept[i].tokens) z += m.weight(c, static_cast<std::size_t>(t));
      unsafe = unsafe || 1.0 / (1.0 + std::exp(-z)) > 0.5;
    }
    const bool mis = unsafe != (seeds[i].label == SafetyLabel::unsafe);
    EXPECT_EQ(mis_ids.count(kept[i].id) == 1, mis) << kept[i].id;
  }
  EXPECT_EQ(part.mis.size() + part.cor.size(), kept.size());
}

TEST(Levels, TableExamples) {
  EXPECT_EQ(level_for(true, true), 1);
  EXPECT_EQ(level_for(false, true), 2);
  EXPECT_EQ(level_for(true, false), 3);
  EXPECT_EQ(level_for(false, false), 4);

  std::vector<SeedExample> seeds{seed("s", SafetyLabel::safe, 3), seed("u", SafetyLabel::unsafe, 3)};
  auto mk = [](std::string id, std::string sid, SafetyLabel verdict, int score) {
    Proposal p = proposal(id, sid, {1}, score);
    p.verdict = verdict;
    return p;
  };
  auto out = assign_levels({mk("a", "s", SafetyLabel::unsafe, 2), mk("b", "u", SafetyLabel::unsafe, 4),
                            mk("c", "u", SafetyLabel::unsafe, 1)},
                           seeds, filter_config());
  EXPECT_EQ(out[0].level, 1);
  EXPECT_EQ(out[1].level, 2);
  EXPECT_EQ(out[2].level, 4);
  Proposal missing = proposal("d", "s", {1}, 1);
  EXPECT_THROW(assign_levels({missing}, seeds, filter_config()), std::invalid_argument);
}

TEST(Pairs, ConstructionRule) {
  auto strong = build_preference_pairs(std::vector<Proposal>{leveled("a", "s", 1), leveled("b", "s", 2)});
  ASSERT_EQ(strong.size(), 1u);
  EXPECT_EQ(strong[0].preferred.id, "a");
  EXPECT_EQ(strong[0].dispreferred.id, "b");
  EXPECT_EQ(strong[0].strength, PairStrength::strong);

  EXPECT_TRUE(build_preference_pairs(std::vector<Proposal>{leveled("b", "s", 2), leveled("c", "s", 3)}).empty());

  auto weak = build_preference_pairs(std::vector<Proposal>{leveled("a", "s", 1), leveled("c", "s", 3)});
  ASSERT_EQ(weak.size(), 1u);
  EXPECT_EQ(weak[0].dispreferred.id, "c");
  EXPECT_EQ(weak[0].strength, PairStrength::weak);
}

TEST(Pairs, AllPairsAndCap) {
  std::vector<Proposal> ps{leveled("a1", "s", 1), leveled("a2", "s", 1), leveled("b1", "s", 2),
                           leveled("b2", "s", 2), leveled("b3", "s", 2), leveled("c", "s", 3),
                           leveled("z", "t", 1), leveled("y", "t", 4)};
  auto all = build_preference_pairs(ps);
  EXPECT_EQ(all.size(), 6u);  // seed t has no Level 2 or 3 partner
  for (const auto& p : all) EXPECT_EQ(p.strength, PairStrength::strong);
  EXPECT_EQ(build_preference_pairs(ps, 4).size(), 4u);
}

TEST(Augment, MisOnlyAndMonotone) {
  auto state = initial_state({seed("s", SafetyLabel::safe, 3), seed("u", SafetyLabel::unsafe, 4)});
  auto same = augment_dataset(state, {});
  EXPECT_EQ(same.size(), state.size());
  EXPECT_EQ(same.iteration, 1);

  Proposal p = proposal("syn1-0", "u", {5, 6}, 5);
  p.language = "fr";
  auto grown = augment_dataset(state, std::vector<Proposal>{p});
  ASSERT_EQ(grown.size(), 3u);
  const auto& added = grown.find("syn1-0");
  EXPECT_EQ(added.label, SafetyLabel::unsafe);
  EXPECT_EQ(added.categories, std::vector<std::size_t>{0});
  EXPECT_EQ(added.language, "fr");
  EXPECT_EQ(grown.origin_iteration.back(), 1);
  for (std::size_t i = 0; i < state.size(); ++i) EXPECT_EQ(grown.examples[i].id, state.examples[i].id);
}

TEST(InitialState, DropsTokenDuplicates) {
  std::size_t dropped = 0;
  auto s = initial_state({seed("a", SafetyLabel::safe, 3), seed("b", SafetyLabel::safe, 3), seed("c", SafetyLabel::safe, 4)},
                         &dropped);
  EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(dropped, 1u);
  EXPECT_THROW(initial_state({}), std::invalid_argument);
  EXPECT_THROW(initial_state({seed("a", SafetyLabel::safe, 3), seed("a", SafetyLabel::safe, 4)}),
               std::invalid_argument);
}

TEST(LanguageQuota, Modes) {
  const std::vector<std::string> langs{"en", "fr", "es", "de"};
  std::map<std::string, std::size_t> counts{{"en", 814}, {"fr", 89}, {"es", 52}, {"de", 45}};
  auto u = language_quota(langs, counts, 8, QuotaMode::uniform);
  EXPECT_EQ(u, (std::vector<std::size_t>{2, 2, 2, 2}));
  auto inv = language_quota(langs, counts, 8, QuotaMode::inverse_proportional);
  std::size_t total = 0;
  for (auto q : inv) total += q;
  EXPECT_EQ(total, 8u);
  EXPECT_EQ(inv[0], 0u);
  EXPECT_GE(inv[3], inv[1]);
  // Missing languages count as 1 and draw the bulk of the quota.
  auto empty = language_quota(langs, {{"en", 100}}, 3, QuotaMode::inverse_proportional);
  EXPECT_EQ(empty, (std::vector<std::size_t>{0, 1, 1, 1}));
}

class IterationFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    cfg.size = 150;
    cfg.test_size = 80;
    corpus = synth_corpus(cfg, 5);
    pipeline.filter.refusal_phrases = lexicon.refusal_phrases();
    pipeline.classifier.epochs = 100;
  }

  CorpusConfig cfg;
  Lexicon lexicon = CorpusConfig{}.lexicon();
  Corpus corpus;
  PipelineConfig pipeline;
  LabelEchoScorer scorer{0.1, 3};
  GeneratorPolicy reference{default_initial_logits(), default_initial_logits()};
};

TEST_F(IterationFixture, ReportArithmeticAndDeterminism) {
  PipelineContext ctx{lexicon, scorer, reference, corpus.test};
  auto state = initial_state(corpus.train);
  auto clf = train_on_state(state, lexicon, pipeline.classifier, 1).model;
  auto a = run_iteration(state, reference, clf, pipeline, ctx, 42);
  auto b = run_iteration(state, reference, clf, pipeline, ctx, 42);
  EXPECT_EQ(a.report, b.report);
  EXPECT_EQ(to_json(a.report).dump(), to_json(b.report).dump());
  const auto& r = a.report;
  EXPECT_TRUE(r.arithmetic_consistent());
  EXPECT_EQ(r.proposals, state.size() * pipeline.k);
  EXPECT_EQ(r.dataset_size, state.size() + r.mis);
  EXPECT_EQ(r.levels[0] + r.levels[1] + r.levels[2] + r.levels[3], r.kept + r.rejected_score);
  EXPECT_EQ(r.pairs(), a.pairs.size());
  // Every added example came from the misclassified set.
  std::set<std::string> mis;
  for (const auto& p : a.mis) {
    mis.insert(p.id);
    EXPECT_NE(*p.verdict, state.find(p.seed_id).label);
  }
  for (std::size_t i = state.size(); i < a.state.size(); ++i) EXPECT_TRUE(mis.count(a.state.examples[i].id));
}

TEST_F(IterationFixture, ChanceClassifierSendsUnsafeKeptToMis) {
  // Zero weights give p = 0.5 everywhere, which the strict threshold calls safe:
  // exactly the kept proposals of unsafe seeds are misclassified.
  PipelineContext ctx{lexicon, scorer, reference};
  auto state = initial_state(corpus.train);
  MultiLabelClassifier chance(lexicon.alphabet_size() + 1);
  auto r = run_iteration(state, reference, chance, pipeline, ctx, 9);
  std::size_t unsafe_kept = 0;
  for (const auto& p : r.proposals) {
    if (p.level && (*p.level == 1 || *p.level == 2) && state.find(p.seed_id).label == SafetyLabel::unsafe) ++unsafe_kept;
  }
  EXPECT_EQ(r.report.mis, unsafe_kept);
  // Proposals cluster by seed, so the binomial band uses the seed count.
  const double frac = static_cast<double>(r.report.mis) / static_cast<double>(r.report.kept);
  EXPECT_LT(std::abs(frac - 0.5), 3 * std::sqrt(0.25 / static_cast<double>(state.size())));
}

TEST_F(IterationFixture, RetrainingDoesNotHurtOnAddedExamples) {
  PipelineContext ctx{lexicon, scorer, reference};
  auto state = initial_state(corpus.train);
  auto clf = train_on_state(state, lexicon, pipeline.classifier, 1).model;
  auto r = run_iteration(state, reference, clf, pipeline, ctx, 5);
  ASSERT_FALSE(r.mis.empty());
  std::size_t before = 0, after = 0;
  for (const auto& p : r.mis) {
    const auto truth = state.find(p.seed_id).label;
    before += classify(clf, features_for(clf, p.tokens)).verdict == truth;
    after += classify(r.classifier, features_for(r.classifier, p.tokens)).verdict == truth;
  }
  EXPECT_EQ(before, 0u);
  EXPECT_GE(after, before);
}

TEST_F(IterationFixture, TrainingOneIterationEqualsRunIteration) {
  PipelineContext ctx{lexicon, scorer, reference, corpus.test};
  auto t = run_training(corpus.train, 1, pipeline, ctx, reference, 21);
  auto state = initial_state(corpus.train);
  auto clf = train_on_state(state, lexicon, pipeline.classifier, initial_classifier_seed(21)).model;
  auto one = run_iteration(state, reference, clf, pipeline, ctx, iteration_seed(21, 1));
  ASSERT_EQ(t.reports.size(), 2u);
  EXPECT_EQ(t.reports[1], one.report);
  EXPECT_EQ(t.classifier, one.classifier);
  EXPECT_EQ(t.generator, one.generator);
  EXPECT_THROW(run_training(corpus.train, 0, pipeline, ctx, reference, 21), std::invalid_argument);
}

TEST_F(IterationFixture, InverseQuotaFavorsMinorityLanguages) {
  cfg.size = 400;
  corpus = synth_corpus(cfg, 8);
  PipelineContext ctx{lexicon, scorer, reference, corpus.test};
  auto t = run_training(corpus.train, 2, pipeline, ctx, reference, 3);
  const auto& added = t.reports[1].added_languages;
  std::size_t total = 0, primary = 0;
  for (const auto& [lang, n] : added) {
    total += n;
    if (lang == "en") primary += n;
  }
  ASSERT_GT(total, 0u);
  EXPECT_GT(total - primary, primary);
  for (std::size_t i = 1; i < t.reports.size(); ++i) EXPECT_GE(t.reports[i].dataset_size, t.reports[i - 1].dataset_size);
}
