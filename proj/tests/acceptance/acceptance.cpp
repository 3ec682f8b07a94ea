// Acceptance gate: one PASS/FAIL line per criterion; exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "duoguard/cli.hpp"
#include "duoguard/corpus.hpp"
#include "duoguard/pipeline.hpp"
#include "duoguard/reports.hpp"
#include "oracles.hpp"

using namespace duoguard;

namespace {

struct Outcome {
  bool passed = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// 1. Closed-form best responses against mirror-descent optimizers.
Outcome best_response_oracles() {
  const auto t0 = Clock::now();
  Rng rng = Rng::substream(2024, "criterion-1");
  double worst_gen = 0.0, worst_cls = 0.0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t xs = 1 + rng.below(4), xt = 2 + rng.below(5);
    const auto rho = oracle::random_joint(rng, xs);
    const auto ref = oracle::random_table(rng, generator_conditions(xs), FiniteAlphabet::range(xt));
    const auto cls = oracle::random_table(rng, FiniteAlphabet::range(xt), label_alphabet());
    const auto gen = oracle::random_table(rng, generator_conditions(xs), FiniteAlphabet::range(xt));
    const double beta = rng.uniform(0.5, 10.0);
    worst_gen = std::max(worst_gen, l1_distance(best_response_generator(cls, ref, beta),
                                                oracle::numeric_generator_response(cls, ref, beta, 1e-10)));
    worst_cls = std::max(worst_cls, l1_distance(best_response_classifier(gen, rho),
                                                oracle::numeric_classifier_response(gen, rho, 1e-10)));
  }
  const double elapsed = seconds_since(t0);
  return {worst_gen <= 1e-6 && worst_cls <= 1e-6 && elapsed < 120.0,
          "200 instances, max L1 generator " + fmt("%.2e", worst_gen) + ", classifier " + fmt("%.2e", worst_cls) +
              ", " + fmt("%.1f", elapsed) + " s"};
}

struct ConvergedInstance {
  oracle::ContractiveInstance instance;
  GameState fixed_point;
};

// 2. Convergence and measured contraction on contractive instances.
Outcome convergence(std::vector<ConvergedInstance>& converged) {
  const auto t0 = Clock::now();
  Rng rng = Rng::substream(2024, "criterion-2");
  constexpr double kNoiseFloor = 1e-11;
  std::size_t failures = 0;
  double worst_slack = -INFINITY, worst_residual = 0.0;
  std::size_t max_iters_used = 0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t xs = 1 + rng.below(4), xt = 2 + rng.below(5);
    const double target = rng.uniform(0.2, 0.9);
    const double gamma = rng.uniform(0.05, 0.3);
    auto inst = oracle::random_contractive_instance(rng, xs, xt, target, gamma);
    const auto bound = lipschitz_bounds(inst.params, xs);
    if (!bound.contractive) {
      ++failures;
      continue;
    }
    auto run = iterate_to_fixed_point(reference_state(inst.reference), inst.rho, inst.reference, inst.params, 1e-12,
                                      10000);
    max_iters_used = std::max(max_iters_used, run.iterations);
    worst_residual = std::max(worst_residual, run.final_step());
    const double ratio = std::max(run.even_tail_max(kNoiseFloor), run.odd_tail_max(kNoiseFloor));
    worst_slack = std::max(worst_slack, ratio - bound.product);
    const auto regular = validate_regularity(run.final_state().classifier, run.final_state().generator,
                                             inst.reference, inst.rho, inst.params);
    if (!run.converged || run.final_step() >= 1e-8 || ratio > bound.product + 0.05 || !regular.all_passed()) {
      ++failures;
      continue;
    }
    converged.push_back({std::move(inst), run.final_state()});
  }
  const double elapsed = seconds_since(t0);
  return {failures == 0 && elapsed < 120.0,
          "50 instances, " + std::to_string(failures) + " failures, max final step " + fmt("%.2e", worst_residual) +
              ", max iterations " + std::to_string(max_iters_used) + ", max (ratio - product) " +
              fmt("%.3f", worst_slack) + ", " + fmt("%.1f", elapsed) + " s"};
}

// 3. Nash verification at every converged fixed point.
Outcome nash(const std::vector<ConvergedInstance>& converged) {
  std::size_t failures = 0;
  double worst_gain = -INFINITY, worst_disp = 0.0;
  for (std::size_t i = 0; i < converged.size(); ++i) {
    const auto& c = converged[i];
    const auto r = verify_nash(c.fixed_point, c.instance.rho, c.instance.reference, c.instance.params, 1000, 1e-6,
                               0x6e617368 + i);
    worst_gain = std::max({worst_gain, r.max_generator_gain, r.max_classifier_gain});
    worst_disp = std::max({worst_disp, r.classifier_displacement, r.generator_displacement});
    failures += !r.passed();
  }
  return {failures == 0 && converged.size() == 50,
          std::to_string(converged.size()) + " fixed points x 1000 perturbations per player, " +
              std::to_string(failures) + " failures, max gain " + fmt("%.2e", worst_gain) + ", max displacement " +
              fmt("%.2e", worst_disp)};
}

// 4. Analytic gradients against central finite differences.
Outcome gradients() {
  Rng rng = Rng::substream(2024, "criterion-4");
  double worst_bce = 0.0, worst_dpo = 0.0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t alphabet = 2 + rng.below(6);
    std::vector<LabeledExample> data;
    const std::size_t n = 1 + rng.below(8);
    for (std::size_t e = 0; e < n; ++e) {
      std::vector<Token> tokens(1 + rng.below(5));
      for (auto& t : tokens) t = static_cast<Token>(rng.below(alphabet));
      LabeledExample ex{FeatureVector::from_tokens(tokens, alphabet), {}};
      for (auto& l : ex.labels) l = rng.bernoulli(0.3);
      data.push_back(std::move(ex));
    }
    MultiLabelClassifier m(alphabet + 1);
    for (auto& w : m.weights()) w = rng.uniform(-2.0, 2.0);
    std::vector<double> x(m.weights().begin(), m.weights().end());
    const auto fd = oracle::central_differences(
        x,
        [&](const std::vector<double>& v) {
          MultiLabelClassifier probe = m;
          std::copy(v.begin(), v.end(), probe.weights().begin());
          return bce_multilabel_loss(probe, data);
        },
        1e-5);
    worst_bce = std::max(worst_bce, oracle::relative_error(bce_gradient(m, data), fd));
  }
  for (int i = 0; i < 50; ++i) {
    const std::size_t c = 2 + rng.below(5);
    std::vector<double> a(c), b(c);
    for (auto& v : a) v = rng.uniform(-1.0, 1.0);
    for (auto& v : b) v = rng.uniform(-1.0, 1.0);
    GeneratorPolicy ref(a, b), policy(a, b);
    std::vector<PreferencePair> pairs;
    std::set<PolicyKey> key_set;
    for (std::size_t k = 0, np = 1 + rng.below(6); k < np; ++k) {
      Proposal w, l;
      w.seed_id = l.seed_id = "s" + std::to_string(rng.below(3));
      w.tag = l.tag = rng.bernoulli(0.5) ? PromptTag::unsafe : PromptTag::safe;
      w.candidate = rng.below(c);
      l.candidate = rng.below(c);
      key_set.insert({w.seed_id, w.tag});
      pairs.push_back({w.seed_id, w, l, PairStrength::strong});
    }
    const std::vector<PolicyKey> keys(key_set.begin(), key_set.end());
    for (const auto& k : keys) {
      for (auto& v : policy.mutable_logits(k.seed_id, k.tag)) v += rng.uniform(-1.0, 1.0);
    }
    const double beta = rng.uniform(0.05, 2.0);
    std::vector<double> x;
    for (const auto& k : keys) {
      auto row = policy.logits(k.seed_id, k.tag);
      x.insert(x.end(), row.begin(), row.end());
    }
    const auto fd = oracle::central_differences(
        x,
        [&](const std::vector<double>& v) {
          GeneratorPolicy probe = policy;
          for (std::size_t r = 0; r < keys.size(); ++r) {
            auto& row = probe.mutable_logits(keys[r].seed_id, keys[r].tag);
            std::copy(v.begin() + r * c, v.begin() + (r + 1) * c, row.begin());
          }
          return dpo_loss(probe, ref, pairs, beta);
        },
        1e-5);
    const auto g = dpo_gradient(policy, ref, pairs, beta);
    std::vector<double> flat;
    for (const auto& k : keys) {
      auto it = g.find(k);
      for (std::size_t j = 0; j < c; ++j) flat.push_back(it == g.end() ? 0.0 : it->second[j]);
    }
    worst_dpo = std::max(worst_dpo, oracle::relative_error(flat, fd));
  }
  return {worst_bce <= 1e-5 && worst_dpo <= 1e-5,
          "50 + 50 instances, max relative error bce " + fmt("%.2e", worst_bce) + ", dpo " + fmt("%.2e", worst_dpo)};
}

// 5. Exact values.
Outcome exact_values() {
  const double log2 = std::log(2.0);
  GeneratorPolicy ref({0.3, -1.0, 0.2}, {1.0, 0.0, -0.5});
  Proposal w, l;
  w.seed_id = l.seed_id = "s";
  w.candidate = 0;
  l.candidate = 2;
  const std::vector<PreferencePair> pairs{{"s", w, l, PairStrength::strong}};
  const double dpo = dpo_loss(ref, ref, pairs, 0.1);

  MultiLabelClassifier uniform(4);
  std::vector<LabeledExample> data{{FeatureVector::from_tokens(std::vector<Token>{0, 2}, 3), {}}};
  data[0].labels[3] = 1;
  const double bce = bce_multilabel_loss(uniform, data);
  const double bt = bradley_terry_prob(log2, 0.0);

  const bool ok = std::abs(dpo - log2) <= 1e-12 && std::abs(bce - 12 * log2) <= 1e-12 &&
                  std::abs(bt - 2.0 / 3.0) <= 1e-12;
  return {ok, "dpo - log 2 = " + fmt("%.1e", dpo - log2) + ", bce - 12 log 2 = " + fmt("%.1e", bce - 12 * log2) +
                  ", bt - 2/3 = " + fmt("%.1e", bt - 2.0 / 3.0)};
}

// 6. Filter and level rules on an enumerated fixture.
Outcome filter_levels() {
  enum Expect { keep, refusal, length, score };
  struct Case {
    SafetyLabel seed;
    bool mis;
    int score;
    std::size_t length;
    int phrase;  // -1 none, else refusal phrase index
    Expect reason;
    int level;  // 0 when not leveled
  };
  using S = SafetyLabel;
  // Seeds have 10 tokens; safe seeds need score <= 2, unsafe >= 3.
  const std::vector<Case> cases{
      {S::safe, true, 2, 10, -1, keep, 1},        {S::safe, false, 1, 12, -1, keep, 2},
      {S::safe, true, 3, 9, -1, score, 3},        {S::safe, false, 5, 10, -1, score, 4},
      {S::safe, true, 1, 10, 0, refusal, 0},      {S::safe, false, 2, 10, 1, refusal, 0},
      {S::safe, true, 4, 260, 1, refusal, 0},     {S::safe, false, 2, 211, -1, length, 0},
      {S::safe, true, 5, 250, -1, length, 0},     {S::safe, false, 2, 210, -1, keep, 2},
      {S::safe, true, 3, 210, -1, score, 3},      {S::safe, false, 4, 11, -1, score, 4},
      {S::unsafe, true, 3, 10, -1, keep, 1},      {S::unsafe, false, 5, 8, -1, keep, 2},
      {S::unsafe, true, 2, 10, -1, score, 3},     {S::unsafe, false, 1, 10, -1, score, 4},
      {S::unsafe, true, 5, 10, 1, refusal, 0},    {S::unsafe, false, 4, 10, 0, refusal, 0},
      {S::unsafe, true, 1, 300, 0, refusal, 0},   {S::unsafe, false, 4, 211, -1, length, 0},
      {S::unsafe, true, 2, 240, -1, length, 0},   {S::unsafe, false, 3, 210, -1, keep, 2},
      {S::unsafe, true, 4, 210, -1, keep, 1},     {S::unsafe, false, 2, 210, -1, score, 4},
  };
  const Lexicon lexicon({"en"});
  FilterConfig cfg;
  cfg.refusal_phrases = lexicon.refusal_phrases();

  // Verdict is unsafe iff token 0 is present.
  const std::size_t alphabet = lexicon.alphabet_size();
  MultiLabelClassifier clf(alphabet + 1);
  for (std::size_t c = 0; c < kNumCategories; ++c) clf.weight(c, alphabet) = -20.0;
  clf.weight(0, 0) = 40.0;

  std::vector<SeedExample> seeds{{"safe", TokenSeq(10, 20), S::safe, {}, "en"},
                                 {"unsafe", TokenSeq(10, 20), S::unsafe, {0}, "en"}};
  std::vector<Proposal> proposals;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    Proposal p;
    p.id = "p" + std::to_string(i);
    p.seed_id = c.seed == S::safe ? "safe" : "unsafe";
    p.harm_score = c.score;
    const bool unsafe_verdict = (c.seed == S::safe) == c.mis;
    TokenSeq t;
    if (unsafe_verdict) t.push_back(0);
    if (c.phrase >= 0) {
      const auto& ph = cfg.refusal_phrases[static_cast<std::size_t>(c.phrase)];
      t.insert(t.end(), ph.begin(), ph.end());
    }
    while (t.size() < c.length) t.push_back(20);
    p.tokens = t;
    proposals.push_back(p);
  }

  std::size_t deviations = 0;
  const auto filtered = filter_proposals(proposals, seeds, cfg);
  std::map<std::string, Expect> got_reason;
  for (const auto& p : filtered.kept) got_reason[p.id] = keep;
  std::vector<Proposal> leveling = filtered.kept;
  for (const auto& r : filtered.rejected) {
    got_reason[r.proposal.id] = r.reason == RejectReason::refusal  ? refusal
                                : r.reason == RejectReason::length ? length
                                                                   : score;
    if (r.reason == RejectReason::score_mismatch) leveling.push_back(r.proposal);
  }
  auto part = partition_by_classification(leveling, seeds, clf);
  std::vector<Proposal> all = part.mis;
  all.insert(all.end(), part.cor.begin(), part.cor.end());
  std::map<std::string, int> got_level;
  for (const auto& p : assign_levels(all, seeds, cfg)) got_level[p.id] = *p.level;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const std::string id = "p" + std::to_string(i);
    deviations += got_reason.at(id) != cases[i].reason;
    deviations += (got_level.count(id) ? got_level.at(id) : 0) != cases[i].level;
  }
  return {deviations == 0 && proposals.size() == 24,
          "24 proposals, " + std::to_string(deviations) + " deviations"};
}

// 7. Pipeline soundness over three iterations.
Outcome pipeline_soundness() {
  CorpusConfig corpus_cfg;
  corpus_cfg.size = 300;
  corpus_cfg.test_size = 200;
  const auto corpus = synth_corpus(corpus_cfg, 77);
  const Lexicon lexicon = corpus_cfg.lexicon();
  const LabelEchoScorer scorer(0.1, 5);
  const GeneratorPolicy reference(default_initial_logits(), default_initial_logits());
  PipelineConfig cfg;
  cfg.filter.refusal_phrases = lexicon.refusal_phrases();
  const PipelineContext ctx{lexicon, scorer, reference, corpus.test};
  const std::uint64_t root = 31337;

  std::vector<std::string> problems;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  };

  // Unrolled loop so that the pairs of each iteration can be inspected.
  auto state = initial_state(corpus.train);
  auto clf = train_on_state(state, lexicon, cfg.classifier, initial_classifier_seed(root)).model;
  GeneratorPolicy gen = reference;
  std::vector<IterationReport> reports;
  for (int t = 1; t <= 3; ++t) {
    auto r = run_iteration(state, gen, clf, cfg, ctx, iteration_seed(root, t));
    const auto& rep = r.report;
    const std::string tag = "iteration " + std::to_string(t) + ": ";
    check(rep.arithmetic_consistent(), tag + "report arithmetic");
    check(rep.dataset_size == state.size() + rep.mis && r.state.size() >= state.size(), tag + "monotonicity");
    for (std::size_t i = 0; i < state.size(); ++i) {
      if (r.state.examples[i].id != state.examples[i].id) {
        check(false, tag + "earlier members preserved");
        break;
      }
    }
    // Mis-only augmentation: additions are exactly the kept, misclassified proposals.
    std::set<std::string> expected_added;
    for (const auto& p : r.proposals) {
      if (p.level && *p.level == 1) {
        expected_added.insert(p.id);
        check(*p.verdict != state.find(p.seed_id).label, tag + "level 1 proposal was classified correctly");
      }
    }
    std::set<std::string> added;
    for (std::size_t i = state.size(); i < r.state.size(); ++i) added.insert(r.state.examples[i].id);
    check(added == expected_added, tag + "additions differ from the misclassified kept set");
    // Pair soundness, with the expected count recomputed per seed.
    std::map<std::string, std::array<std::size_t, 4>> per_seed;
    std::map<std::string, int> level_of;
    for (const auto& p : r.proposals) {
      if (!p.level) continue;
      per_seed[p.seed_id][static_cast<std::size_t>(*p.level - 1)]++;
      level_of[p.id] = *p.level;
    }
    std::size_t expected_pairs = 0;
    for (const auto& [seed, n] : per_seed) expected_pairs += n[0] * (n[1] > 0 ? n[1] : n[2]);
    check(r.pairs.size() == expected_pairs, tag + "pair count");
    for (const auto& pair : r.pairs) {
      const auto& counts = per_seed[pair.seed_id];
      const bool ok = pair.preferred.seed_id == pair.seed_id && pair.dispreferred.seed_id == pair.seed_id &&
                      level_of[pair.preferred.id] == 1 &&
                      (pair.strength == PairStrength::strong ? level_of[pair.dispreferred.id] == 2
                                                             : level_of[pair.dispreferred.id] == 3 && counts[1] == 0);
      if (!ok) {
        check(false, tag + "unsound pair " + pair.preferred.id + " > " + pair.dispreferred.id);
        break;
      }
    }
    reports.push_back(rep);
    state = std::move(r.state);
    clf = std::move(r.classifier);
    gen = std::move(r.generator);
  }

  const auto a = run_training(corpus.train, 3, cfg, ctx, reference, root);
  const auto b = run_training(corpus.train, 3, cfg, ctx, reference, root);
  check(reports_jsonl(a.reports) == reports_jsonl(b.reports), "reports not byte-identical");
  check(summary_csv(a.reports, lexicon.languages()) == summary_csv(b.reports, lexicon.languages()),
        "summary CSV not byte-identical");
  for (int t = 1; t <= 3; ++t) {
    check(a.reports[static_cast<std::size_t>(t)] == reports[static_cast<std::size_t>(t - 1)],
          "run_training differs from the unrolled loop at iteration " + std::to_string(t));
  }
  for (std::size_t i = 1; i < a.reports.size(); ++i) {
    check(a.reports[i].dataset_size >= a.reports[i - 1].dataset_size, "dataset size decreased");
  }

  std::string detail = "3 iterations, sizes";
  for (const auto& r : a.reports) detail += " " + std::to_string(r.dataset_size);
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

// 8. Trend replication on the default imbalanced corpus.
Outcome trend() {
  const auto t0 = Clock::now();
  std::vector<double> before, after;
  bool rebalanced = true;
  std::string shares;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ExperimentConfig cfg;
    cfg.seed = seed;
    cfg.iterations = 2;
    cfg.scorer_epsilon = 0.1;
    const auto outcome = run_experiment(cfg);
    const auto& reports = outcome.training.reports;
    before.push_back(reports[0].f1_minority);
    after.push_back(reports[2].f1_minority);
    std::size_t total = 0, primary = 0;
    for (const auto& [lang, n] : reports[1].added_languages) {
      total += n;
      if (lang == cfg.corpus.languages.front()) primary += n;
    }
    rebalanced = rebalanced && total > 0 && 2 * (total - primary) > total;
    shares += (shares.empty() ? "" : ",") + fmt("%.2f", total ? 1.0 - double(primary) / double(total) : 0.0);
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  const double m0 = median(before), m2 = median(after);
  const double elapsed = seconds_since(t0);
  return {m2 - m0 >= 0.05 && rebalanced && elapsed < 600.0,
          "median minority F1 " + fmt("%.4f", m0) + " -> " + fmt("%.4f", m2) + " (gain " + fmt("%.4f", m2 - m0) +
              "), iteration-1 non-primary share [" + shares + "], " + fmt("%.1f", elapsed) + " s"};
}

// 9. Large-beta limit.
Outcome limit_behavior() {
  Rng rng = Rng::substream(2024, "criterion-9");
  double worst_gen = 0.0, worst_cls = 0.0;
  bool converged = true;
  for (int i = 0; i < 20; ++i) {
    const std::size_t xs = 1 + rng.below(4), xt = 2 + rng.below(5);
    const auto rho = oracle::random_joint(rng, xs);
    const auto ref = oracle::random_table(rng, generator_conditions(xs), FiniteAlphabet::range(xt));
    const RegularityParams params{1e9, 1e-6, 1.0, 1e-6};
    const auto run = iterate_to_fixed_point(reference_state(ref), rho, ref, params, 1e-12, 10000);
    converged = converged && run.converged;
    worst_gen = std::max(worst_gen, l1_distance(run.final_state().generator, ref));
    worst_cls = std::max(worst_cls, l1_distance(run.final_state().classifier, oracle::bayes_posterior(ref, rho)));
  }
  return {converged && worst_gen <= 1e-4 && worst_cls <= 1e-4,
          "20 instances at beta = 1e9, max L1 generator-reference " + fmt("%.2e", worst_gen) +
              ", classifier-posterior " + fmt("%.2e", worst_cls)};
}

}  // namespace

int main() {
  std::vector<ConvergedInstance> converged;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"best-response oracle equivalence", best_response_oracles},
      {"fixed-point convergence and contraction", [&] { return convergence(converged); }},
      {"Nash verification", [&] { return nash(converged); }},
      {"gradient correctness", gradients},
      {"exact values", exact_values},
      {"filter and level bit-exactness", filter_levels},
      {"pipeline soundness", pipeline_soundness},
      {"trend replication", trend},
      {"large-beta limit", limit_behavior},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.passed;
    std::printf("%s %zu %s: %s\n", o.passed ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
