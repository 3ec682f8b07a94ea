#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "duoguard/game.hpp"
#include "duoguard/metrics.hpp"
#include "duoguard/pipeline.hpp"
#include "duoguard/serialization.hpp"

namespace duoguard {

/// Shortest text that reads back to the same double.
std::string format_double(double v);

/// Writes `content` to `path`, creating parent directories. Throws
/// std::runtime_error on I/O failure.
void write_file(const std::filesystem::path& path, const std::string& content);

std::string reports_jsonl(const std::vector<IterationReport>& reports);

/// One row per report: sizes, per-language counts, stage rejects, pair
/// counts, loss and held-out F1. Language columns follow `languages`.
std::string summary_csv(const std::vector<IterationReport>& reports, const std::vector<std::string>& languages);

std::string proposals_jsonl(const std::vector<Proposal>& proposals);

/// Summary of a fixed-point run (no per-iteration data).
Json trajectory_summary(const Trajectory& trajectory, const LipschitzReport& bounds, double noise_floor);

/// Columns: iteration, step_distance, residual, parity_ratio. The ratio is
/// residual[n] / residual[n-2] (empty for n < 2 or a zero denominator).
std::string trajectory_csv(const Trajectory& trajectory);

Json f1_json(const F1Report& report, const std::string& primary_language);

}  // namespace duoguard
