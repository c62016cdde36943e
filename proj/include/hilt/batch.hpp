#pragma once

// Batch evaluation: N fast-time runs per scenario with per-seed randomized
// visibility and SNR, aggregate report, artifact directory and CSV export.

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hilt/config.hpp"
#include "hilt/plugins.hpp"
#include "hilt/scenario.hpp"
#include "hilt/telemetry.hpp"

namespace hilt {

struct BatchOptions {
  int runs = 10;
  std::uint64_t seed_base = 1;
  RunConfig config;
  bool randomize_environment = true;
  double visibility_min_m = 200.0;
  double visibility_max_m = 2000.0;
  double snr_min_db = 0.0;
  double snr_max_db = 20.0;
  PluginSet plugins;
  std::optional<std::filesystem::path> out_dir;
};

struct BatchEnvironment {
  double visibility_m = 0.0;
  double snr_db = 0.0;
};

/// Drawn from stream "batch_env" of the run seed, so a given seed gets the
/// same conditions whichever scenario it runs.
BatchEnvironment draw_environment(std::uint64_t seed, const BatchOptions& options);

struct BatchResult {
  std::vector<RunSummary> runs;
  nlohmann::json report;
  nlohmann::json failures = nlohmann::json::array();
  double wall_seconds = 0.0;
  bool all_finished() const { return failures.empty(); }
};

/// Runs seeds seed_base .. seed_base + runs - 1 for each scenario. With
/// out_dir set, writes runs/<scenario>/seed-<n>.jsonl and .metrics.json,
/// report.json and, when any run failed, failures.json.
BatchResult run_batch(const std::vector<ScenarioSpec>& scenarios, const BatchOptions& options);

/// One row per run from a batch report's "runs" array.
std::string runs_csv(const nlohmann::json& report);

}  // namespace hilt
