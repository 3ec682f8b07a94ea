#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "duoguard/config.hpp"
#include "duoguard/corpus.hpp"
#include "duoguard/pipeline.hpp"

namespace duoguard {

struct ExperimentOutcome {
  Corpus corpus;
  TrainingResult training;
};

/// Full adversarial training run described by `config`: corpus, label-echo
/// scorer, frozen initial generator, T iterations. No files are written.
ExperimentOutcome run_experiment(const ExperimentConfig& config);

/// Runs an experiment and writes its artifacts under `out_dir`.
void write_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir);

/// Exit codes: 0 success, 1 runtime failure, 2 usage or malformed input.
/// Failures print one JSON error record to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(const std::vector<std::string>& args);

}  // namespace duoguard
