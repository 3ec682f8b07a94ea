#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "duoguard/corpus.hpp"
#include "duoguard/distributions.hpp"
#include "duoguard/game.hpp"
#include "duoguard/pipeline.hpp"
#include "duoguard/serialization.hpp"

namespace duoguard {

struct Diagnostic {
  std::string field;
  std::string message;
};

/// A configuration document failed validation; carries every field problem
/// found, not just the first.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<Diagnostic> diagnostics);
  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<Diagnostic> diagnostics_;
};

struct GameSettings {
  RegularityParams params{.beta = 1000.0, .gamma = 0.1, .delta = 0.5, .alpha = 0.5};
  double tolerance = 1e-10;
  std::size_t max_iterations = 10000;
  std::size_t nash_perturbations = 1000;
  double nash_eps = 1e-6;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  GameSettings game;
  std::size_t iterations = 3;
  PipelineConfig pipeline;
  double scorer_epsilon = 0.1;
  CorpusConfig corpus;
  /// Seed corpus as JSON-lines; when set it replaces the synthetic training
  /// split (the held-out split is still synthesized).
  std::optional<std::string> seeds_path;
};

/// Unknown keys and wrong types are errors; absent keys keep their defaults.
ExperimentConfig parse_experiment_config(const Json& j);
ExperimentConfig load_experiment_config(const std::string& path);

/// Input of the fixed-point command.
struct GameDescription {
  GameSettings settings;
  SeedJoint rho;
  ConditionalTable reference;
  std::optional<GameState> initial;  // defaults to reference_state(reference)
};

GameDescription parse_game_description(const Json& j);

/// Input of the bounds command: the four regularity parameters and |X|.
struct BoundsRequest {
  RegularityParams params;
  std::size_t x_size = 1;
};

BoundsRequest parse_bounds_request(const Json& j);

/// Reads and parses a JSON file; syntax errors become a ConfigError.
Json load_json_file(const std::string& path);

}  // namespace duoguard
