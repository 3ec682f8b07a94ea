#include "duoguard/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <thread>

#include <CLI11.hpp>

#include "duoguard/reports.hpp"
#include "duoguard/rng.hpp"
#include "duoguard/serialization.hpp"
#include "duoguard/toy_text.hpp"

namespace duoguard {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

Json error_record(const std::string& kind, const std::string& message, const std::vector<Diagnostic>& diags = {}) {
  Json d = Json::array();
  for (const auto& x : diags) d.push_back({{"field", x.field}, {"message", x.message}});
  return {{"error", kind}, {"message", message}, {"diagnostics", d}};
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_metadata(const fs::path& dir, const std::string& command, const std::vector<std::string>& inputs) {
  Json meta = {{"command", command}, {"inputs", inputs}, {"finished_at", timestamp()}};
  write_file(dir / "run_metadata.json", meta.dump(2) + "\n");
}

std::vector<SeedExample> read_examples_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({{path, "cannot open file"}});
  try {
    return read_examples_jsonl(in);
  } catch (const FieldError& e) {
    throw ConfigError({{path + " " + e.field(), e.message()}});
  }
}

int cmd_bounds(const std::string& input, const fs::path& out_dir, std::ostream& out) {
  const auto req = parse_bounds_request(load_json_file(input));
  const Json report = to_json(lipschitz_bounds(req.params, req.x_size));
  write_file(out_dir / "bounds.json", report.dump(2) + "\n");
  write_metadata(out_dir, "bounds", {input});
  out << report.dump(2) << "\n";
  return 0;
}

int cmd_fixed_point(const std::string& input, const fs::path& out_dir, std::ostream& out) {
  const auto game = parse_game_description(load_json_file(input));
  const auto& s = game.settings;
  const GameState initial = game.initial ? *game.initial : reference_state(game.reference);
  const auto traj = iterate_to_fixed_point(initial, game.rho, game.reference, s.params, s.tolerance, s.max_iterations);
  const auto bounds = lipschitz_bounds(s.params, game.rho.x_size());
  constexpr double kNoiseFloor = 1e-11;

  Json summary = trajectory_summary(traj, bounds, kNoiseFloor);
  summary["regularity"] = to_json(validate_regularity(traj.final_state().classifier, traj.final_state().generator,
                                                      game.reference, game.rho, s.params));
  if (traj.converged) {
    summary["nash"] = to_json(verify_nash(traj.final_state(), game.rho, game.reference, s.params,
                                          s.nash_perturbations, s.nash_eps));
  }
  write_file(out_dir / "trajectory.json", summary.dump(2) + "\n");
  write_file(out_dir / "trajectory.csv", trajectory_csv(traj));
  write_metadata(out_dir, "fixed-point", {input});
  Json brief = summary;
  brief.erase("final_state");
  out << brief.dump(2) << "\n";
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& corpus_path, const fs::path& out_dir,
             std::size_t bins, const std::string& primary, std::ostream& out) {
  const Json model_json = load_json_file(model_path);
  MultiLabelClassifier model;
  try {
    model = classifier_from_json(model_json);
  } catch (const FieldError& e) {
    throw ConfigError({{model_path + " " + e.field(), e.message()}});
  }
  const auto examples = read_examples_file(corpus_path);
  const Json report = f1_json(eval_f1(model, examples), primary);
  write_file(out_dir / "eval.json", report.dump(2) + "\n");
  write_file(out_dir / "confidence_histogram.csv", confidence_histogram(model, examples, bins).to_csv());
  write_metadata(out_dir, "eval", {model_path, corpus_path});
  out << report.dump(2) << "\n";
  return 0;
}

int cmd_synth(const ExperimentConfig& cfg, const std::string& input, const fs::path& out_dir, std::ostream& out) {
  const auto corpus = synth_corpus(cfg.corpus, cfg.seed);
  std::ostringstream train, test;
  write_examples_jsonl(train, corpus.train);
  write_examples_jsonl(test, corpus.test);
  write_file(out_dir / "train.jsonl", train.str());
  write_file(out_dir / "test.jsonl", test.str());
  write_metadata(out_dir, "synth", {input});
  out << Json{{"train", corpus.train.size()}, {"test", corpus.test.size()}}.dump() << "\n";
  return 0;
}

ExperimentConfig load_with_overrides(const std::string& path, std::optional<std::uint64_t> seed,
                                     std::optional<std::size_t> iterations) {
  Json j = load_json_file(path);
  if (iterations) {
    if (*iterations == 0) throw UsageError("T must be at least 1");
    j["pipeline"]["iterations"] = *iterations;
  }
  auto cfg = parse_experiment_config(j);
  if (seed) cfg.seed = *seed;
  return cfg;
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& config) {
  ExperimentOutcome outcome;
  outcome.corpus = synth_corpus(config.corpus, config.seed);
  if (config.seeds_path) outcome.corpus.train = read_examples_file(*config.seeds_path);

  const Lexicon lexicon = config.corpus.lexicon();
  const LabelEchoScorer scorer(config.scorer_epsilon, Rng::substream(config.seed, "scorer").next_u64());
  const GeneratorPolicy reference(default_initial_logits(), default_initial_logits());
  PipelineConfig pipeline = config.pipeline;
  pipeline.filter.refusal_phrases = lexicon.refusal_phrases();
  const PipelineContext context{lexicon, scorer, reference, outcome.corpus.test};
  outcome.training = run_training(outcome.corpus.train, config.iterations, pipeline, context, reference, config.seed);
  return outcome;
}

void write_experiment(const ExperimentConfig& config, const fs::path& out_dir) {
  const auto outcome = run_experiment(config);
  const auto& tr = outcome.training;
  write_file(out_dir / "reports.jsonl", reports_jsonl(tr.reports));
  write_file(out_dir / "summary.csv", summary_csv(tr.reports, config.corpus.languages));
  write_file(out_dir / "classifier.json", to_json(tr.classifier).dump() + "\n");
  write_file(out_dir / "generator.json", to_json(tr.generator).dump() + "\n");
  std::ostringstream dataset, test;
  write_examples_jsonl(dataset, tr.state.examples);
  write_examples_jsonl(test, outcome.corpus.test);
  write_file(out_dir / "dataset.jsonl", dataset.str());
  write_file(out_dir / "test.jsonl", test.str());
  for (std::size_t t = 0; t < tr.proposals.size(); ++t) {
    write_file(out_dir / ("proposals_" + std::to_string(t + 1) + ".jsonl"), proposals_jsonl(tr.proposals[t]));
  }
  write_file(out_dir / "confidence_histogram.csv", confidence_histogram(tr.classifier, outcome.corpus.test, 10).to_csv());
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-player guardrail game simulator and adversarial data pipeline", "duoguard"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::uint64_t> seed;
  std::string out_dir_flag;
  std::size_t jobs = 1;
  app.add_option("--seed", seed, "Root seed (overrides the config)");
  app.add_option("--out-dir", out_dir_flag, "Output directory");
  app.add_option("--jobs", jobs, "Experiment configs to run in parallel")->check(CLI::PositiveNumber);

  std::string game_path, params_path, model_path, corpus_path, synth_path, primary = "en";
  std::vector<std::string> experiment_paths;
  std::optional<std::size_t> iterations;
  std::size_t bins = 10;

  auto* fixed = app.add_subcommand("fixed-point", "Iterate best responses to the fixed point");
  fixed->add_option("game", game_path, "Game description JSON")->required();
  auto* bounds = app.add_subcommand("bounds", "Lipschitz constants of the best-response maps");
  bounds->add_option("params", params_path, "Regularity parameters JSON")->required();
  auto* train = app.add_subcommand("train", "Run the adversarial training loop");
  train->add_option("experiment", experiment_paths, "Experiment config JSON (one or more)")->required();
  train->add_option("--iterations", iterations, "Number of iterations T (overrides the config)");
  auto* eval = app.add_subcommand("eval", "Held-out F1 and confidence histogram of a saved classifier");
  eval->add_option("model", model_path, "Classifier JSON")->required();
  eval->add_option("corpus", corpus_path, "Labeled examples JSON-lines")->required();
  eval->add_option("--bins", bins, "Histogram bins")->check(CLI::Range(std::size_t{2}, std::size_t{100000}));
  eval->add_option("--primary", primary, "Majority language tag");
  auto* synth = app.add_subcommand("synth", "Generate a synthetic train/test corpus");
  synth->add_option("config", synth_path, "Experiment config JSON (corpus section)")->required();

  std::vector<std::string> argv(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(argv.begin(), argv.end());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << error_record("usage", e.what()).dump() << "\n";
    return 2;
  }

  auto out_dir = [&](const std::string& fallback) { return fs::path(out_dir_flag.empty() ? fallback : out_dir_flag); };
  try {
    if (*bounds) return cmd_bounds(params_path, out_dir("out"), out);
    if (*fixed) return cmd_fixed_point(game_path, out_dir("out"), out);
    if (*eval) return cmd_eval(model_path, corpus_path, out_dir("out"), bins, primary, out);
    if (*synth) {
      const auto cfg = load_with_overrides(synth_path, seed, std::nullopt);
      return cmd_synth(cfg, synth_path, out_dir(cfg.out_dir), out);
    }

    // train: configs are validated up front so a bad file fails before any run.
    std::vector<ExperimentConfig> configs;
    for (const auto& p : experiment_paths) configs.push_back(load_with_overrides(p, seed, iterations));
    std::vector<fs::path> dirs;
    for (std::size_t i = 0; i < configs.size(); ++i) {
      fs::path dir = out_dir(configs[i].out_dir);
      if (configs.size() > 1) dir /= std::to_string(i) + "_" + fs::path(experiment_paths[i]).stem().string();
      dirs.push_back(dir);
    }

    std::atomic<std::size_t> next{0};
    std::mutex lock;
    std::vector<std::pair<std::size_t, std::string>> failures;
    auto worker = [&] {
      for (std::size_t i = next++; i < configs.size(); i = next++) {
        try {
          write_experiment(configs[i], dirs[i]);
          write_metadata(dirs[i], "train", {experiment_paths[i]});
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> guard(lock);
          failures.emplace_back(i, e.what());
        }
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(jobs, configs.size()); ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    if (!failures.empty()) {
      std::sort(failures.begin(), failures.end());
      std::vector<Diagnostic> diags;
      for (const auto& [i, msg] : failures) diags.push_back({experiment_paths[i], msg});
      err << error_record("runtime", "experiment failed", diags).dump() << "\n";
      return 1;
    }
    Json done = Json::array();
    for (const auto& d : dirs) done.push_back(d.string());
    out << Json{{"completed", done}}.dump() << "\n";
    return 0;
  } catch (const ConfigError& e) {
    err << error_record("config", "malformed input", e.diagnostics()).dump() << "\n";
    return 2;
  } catch (const UsageError& e) {
    err << error_record("usage", e.what()).dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << error_record("runtime", e.what()).dump() << "\n";
    return 1;
  }
}

int run_cli(const std::vector<std::string>& args) { return run_cli(args, std::cout, std::cerr); }

}  // namespace duoguard
