#include "duoguard/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace duoguard {

ConfigError::ConfigError(std::vector<Diagnostic> diagnostics)
    : std::invalid_argument([&] {
        std::string msg = "invalid configuration";
        for (const auto& d : diagnostics) msg += "; " + d.field + ": " + d.message;
        return msg;
      }()),
      diagnostics_(std::move(diagnostics)) {}

namespace {

/// Walks one JSON object, recording problems instead of stopping at the first.
class Reader {
 public:
  Reader(const Json& j, std::string path, std::vector<Diagnostic>& diags) : j_(j), path_(std::move(path)), diags_(diags) {
    if (!j_.is_object()) fail("", "expected an object");
  }

  ~Reader() {
    if (!j_.is_object()) return;
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) fail(key, "unknown field");
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.is_object() && j_.contains(key) && !j_.at(key).is_null();
  }

  const Json& at(const std::string& key) const { return j_.at(key); }
  std::string field(const std::string& key) const { return key.empty() ? path_ : path_ + "/" + key; }

  void fail(const std::string& key, const std::string& message) { diags_.push_back({field(key), message}); }

  void number(const std::string& key, double& out) {
    if (!has(key)) return;
    if (!at(key).is_number()) return fail(key, "expected a number");
    out = at(key).get<double>();
  }

  void count(const std::string& key, std::size_t& out) {
    if (!has(key)) return;
    if (!at(key).is_number_unsigned()) return fail(key, "expected a non-negative integer");
    out = at(key).get<std::size_t>();
  }

  void integer(const std::string& key, int& out) {
    if (!has(key)) return;
    if (!at(key).is_number_integer()) return fail(key, "expected an integer");
    out = at(key).get<int>();
  }

  void seed(const std::string& key, std::uint64_t& out) {
    if (!has(key)) return;
    if (!at(key).is_number_unsigned()) return fail(key, "expected a non-negative integer");
    out = at(key).get<std::uint64_t>();
  }

  void flag(const std::string& key, bool& out) {
    if (!has(key)) return;
    if (!at(key).is_boolean()) return fail(key, "expected true or false");
    out = at(key).get<bool>();
  }

  void text(const std::string& key, std::string& out) {
    if (!has(key)) return;
    if (!at(key).is_string()) return fail(key, "expected a string");
    out = at(key).get<std::string>();
  }

  void numbers(const std::string& key, std::vector<double>& out) {
    if (!has(key)) return;
    const Json& v = at(key);
    if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const Json& e) { return e.is_number(); })) {
      return fail(key, "expected an array of numbers");
    }
    out = v.get<std::vector<double>>();
  }

  void strings(const std::string& key, std::vector<std::string>& out) {
    if (!has(key)) return;
    const Json& v = at(key);
    if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const Json& e) { return e.is_string(); })) {
      return fail(key, "expected an array of strings");
    }
    out = v.get<std::vector<std::string>>();
  }

  template <typename F>
  void object(const std::string& key, F&& body) {
    if (!has(key)) return;
    if (!at(key).is_object()) return fail(key, "expected an object");
    Reader child(at(key), field(key), diags_);
    body(child);
  }

  /// Runs a parser from serialization.hpp, turning its exception into a diagnostic.
  template <typename F>
  void parsed(const std::string& key, F&& parse) {
    if (!has(key)) return fail(key, "missing required field");
    try {
      parse(at(key), field(key));
    } catch (const FieldError& e) {
      diags_.push_back({e.field(), e.message()});
    } catch (const std::exception& e) {
      fail(key, e.what());
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::vector<Diagnostic>& diags_;
  std::set<std::string> seen_;
};

void check(std::vector<Diagnostic>& diags, bool ok, std::string field, std::string message) {
  if (!ok) diags.push_back({std::move(field), std::move(message)});
}

void read_game(Reader& r, GameSettings& g) {
  r.number("beta", g.params.beta);
  r.number("gamma", g.params.gamma);
  r.number("delta", g.params.delta);
  r.number("alpha", g.params.alpha);
  r.number("tolerance", g.tolerance);
  r.count("max_iterations", g.max_iterations);
  r.count("nash_perturbations", g.nash_perturbations);
  r.number("nash_eps", g.nash_eps);
}

void check_game(std::vector<Diagnostic>& diags, const GameSettings& g, const std::string& path) {
  try {
    g.params.validate();
  } catch (const std::exception& e) {
    diags.push_back({path, e.what()});
  }
  check(diags, g.tolerance > 0.0, path + "/tolerance", "must be positive");
  check(diags, g.max_iterations > 0, path + "/max_iterations", "must be positive");
  check(diags, g.nash_eps > 0.0, path + "/nash_eps", "must be positive");
}

}  // namespace

ExperimentConfig parse_experiment_config(const Json& j) {
  ExperimentConfig cfg;
  std::vector<Diagnostic> diags;
  {
    Reader r(j, "", diags);
    r.seed("seed", cfg.seed);
    r.text("out_dir", cfg.out_dir);
    r.object("game", [&](Reader& g) { read_game(g, cfg.game); });
    r.object("pipeline", [&](Reader& p) {
      auto& pc = cfg.pipeline;
      p.count("iterations", cfg.iterations);
      p.count("k", pc.k);
      p.number("temperature", pc.temperature);
      p.number("scorer_epsilon", cfg.scorer_epsilon);
      p.count("verbose_extra", pc.verbose_extra);
      if (p.has("pair_cap")) {
        std::size_t cap = 0;
        p.count("pair_cap", cap);
        pc.pair_cap = cap;
      }
      std::string quota = "inverse_proportional";
      p.text("quota", quota);
      if (quota == "uniform") {
        pc.quota = QuotaMode::uniform;
      } else if (quota == "inverse_proportional") {
        pc.quota = QuotaMode::inverse_proportional;
      } else {
        p.fail("quota", "expected \"uniform\" or \"inverse_proportional\"");
      }
      p.object("filter", [&](Reader& f) {
        f.integer("safe_max_score", pc.filter.safe_max_score);
        f.integer("unsafe_min_score", pc.filter.unsafe_min_score);
        f.count("max_length_delta", pc.filter.max_length_delta);
      });
      p.object("classifier", [&](Reader& c) {
        c.number("learning_rate", pc.classifier.learning_rate);
        c.count("epochs", pc.classifier.epochs);
        c.number("init_scale", pc.classifier.init_scale);
        c.number("threshold", pc.classifier.threshold);
        std::vector<double> per_category;
        c.numbers("category_thresholds", per_category);
        if (!per_category.empty()) {
          if (per_category.size() != kNumCategories) {
            c.fail("category_thresholds", "expected 12 entries");
          } else {
            std::array<double, kNumCategories> t{};
            std::copy(per_category.begin(), per_category.end(), t.begin());
            pc.classifier.category_thresholds = t;
          }
        }
      });
      p.object("generator", [&](Reader& g) {
        g.number("beta", pc.generator.beta);
        g.number("learning_rate", pc.generator.learning_rate);
        g.count("steps", pc.generator.steps);
        g.number("nll_weight", pc.generator.nll_weight);
      });
    });
    r.object("corpus", [&](Reader& c) {
      auto& cc = cfg.corpus;
      c.strings("languages", cc.languages);
      c.numbers("proportions", cc.proportions);
      c.count("size", cc.size);
      c.count("test_size", cc.test_size);
      c.flag("balanced_test", cc.balanced_test);
      c.number("unsafe_fraction", cc.unsafe_fraction);
      c.count("min_length", cc.min_length);
      c.count("max_length", cc.max_length);
      c.count("tokens_per_language", cc.tokens_per_language);
      c.number("second_category_prob", cc.second_category_prob);
      if (c.has("seeds_path")) {
        std::string p;
        c.text("seeds_path", p);
        cfg.seeds_path = p;
      }
    });
  }

  check_game(diags, cfg.game, "/game");
  const auto& pc = cfg.pipeline;
  check(diags, cfg.iterations >= 1, "/pipeline/iterations", "T must be at least 1");
  check(diags, pc.k >= 1, "/pipeline/k", "must be at least 1");
  check(diags, pc.temperature > 0.0, "/pipeline/temperature", "must be positive");
  check(diags, cfg.scorer_epsilon >= 0.0 && cfg.scorer_epsilon <= 1.0, "/pipeline/scorer_epsilon", "must lie in [0, 1]");
  try {
    pc.filter.validate();
  } catch (const std::exception& e) {
    diags.push_back({"/pipeline/filter", e.what()});
  }
  check(diags, pc.classifier.learning_rate > 0.0, "/pipeline/classifier/learning_rate", "must be positive");
  check(diags, pc.classifier.init_scale >= 0.0, "/pipeline/classifier/init_scale", "must be non-negative");
  check(diags, pc.classifier.threshold > 0.0 && pc.classifier.threshold < 1.0, "/pipeline/classifier/threshold",
        "must lie in (0, 1)");
  if (pc.classifier.category_thresholds) {
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      const double t = (*pc.classifier.category_thresholds)[c];
      check(diags, t > 0.0 && t < 1.0, "/pipeline/classifier/category_thresholds/" + std::to_string(c),
            "must lie in (0, 1)");
    }
  }
  check(diags, pc.generator.beta > 0.0, "/pipeline/generator/beta", "must be positive");
  check(diags, pc.generator.learning_rate > 0.0, "/pipeline/generator/learning_rate", "must be positive");
  check(diags, pc.generator.nll_weight >= 0.0, "/pipeline/generator/nll_weight", "must be non-negative");
  try {
    cfg.corpus.validate();
  } catch (const std::exception& e) {
    std::string msg = e.what();
    const auto colon = msg.find(':');
    diags.push_back({"/corpus/" + msg.substr(0, colon), colon == std::string::npos ? msg : msg.substr(colon + 2)});
  }
  if (!diags.empty()) throw ConfigError(std::move(diags));
  return cfg;
}

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({{path, "cannot open file"}});
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError({{path, std::string("invalid JSON: ") + e.what()}});
  }
}

ExperimentConfig load_experiment_config(const std::string& path) { return parse_experiment_config(load_json_file(path)); }

GameDescription parse_game_description(const Json& j) {
  std::vector<Diagnostic> diags;
  GameSettings settings;
  std::optional<SeedJoint> rho;
  std::optional<ConditionalTable> reference;
  std::optional<ConditionalTable> init_classifier;
  std::optional<ConditionalTable> init_generator;
  {
    Reader r(j, "", diags);
    r.object("params", [&](Reader& g) { read_game(g, settings); });
    r.parsed("rho", [&](const Json& v, const std::string& path) { rho = seed_joint_from_json(v, path); });
    r.parsed("reference", [&](const Json& v, const std::string& path) { reference = table_from_json(v, path); });
    if (r.has("initial")) {
      r.object("initial", [&](Reader& init) {
        init.parsed("classifier",
                    [&](const Json& v, const std::string& path) { init_classifier = table_from_json(v, path); });
        init.parsed("generator",
                    [&](const Json& v, const std::string& path) { init_generator = table_from_json(v, path); });
      });
    }
  }
  check_game(diags, settings, "/params");
  if (rho && reference) {
    check(diags, reference->conditions() == generator_conditions(rho->x_size()), "/reference/conditions",
          "expected conditions 0..2|X|-1 matching rho");
  }
  if (reference && init_classifier) {
    check(diags, init_classifier->conditions() == reference->outcomes() && init_classifier->outcomes() == label_alphabet(),
          "/initial/classifier", "expected conditions = reference outcomes and outcomes = [-1, 1]");
  }
  if (reference && init_generator) {
    check(diags, init_generator->conditions() == reference->conditions() && init_generator->outcomes() == reference->outcomes(),
          "/initial/generator", "expected the reference's shape");
  }
  if (!diags.empty()) throw ConfigError(std::move(diags));
  GameDescription out{settings, *rho, *reference, std::nullopt};
  if (init_classifier && init_generator) out.initial = GameState{*init_classifier, *init_generator};
  return out;
}

BoundsRequest parse_bounds_request(const Json& j) {
  std::vector<Diagnostic> diags;
  BoundsRequest req;
  {
    Reader r(j, "", diags);
    for (const char* key : {"beta", "gamma", "delta", "alpha"}) {
      if (!r.has(key)) r.fail(key, "missing required field");
    }
    r.number("beta", req.params.beta);
    r.number("gamma", req.params.gamma);
    r.number("delta", req.params.delta);
    r.number("alpha", req.params.alpha);
    if (!r.has("x_size")) r.fail("x_size", "missing required field");
    r.count("x_size", req.x_size);
  }
  if (diags.empty()) {
    try {
      req.params.validate();
    } catch (const std::exception& e) {
      diags.push_back({"/", e.what()});
    }
    check(diags, req.x_size >= 1, "/x_size", "must be at least 1");
  }
  if (!diags.empty()) throw ConfigError(std::move(diags));
  return req;
}

}  // namespace duoguard
