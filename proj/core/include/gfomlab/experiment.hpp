#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gfomlab/config.hpp"
#include "gfomlab/harness.hpp"

namespace gfom {

struct ExperimentInfo {
  std::string key;
  std::string summary;
};
const std::vector<ExperimentInfo>& experiment_registry();

// Runs the harness operation named by c.experiment; unknown keys raise ConfigError.
ComparisonReport dispatch(const ExperimentConfig& c);

struct RunResult {
  RunManifest manifest;
  std::optional<ComparisonReport> report;
};

// Writes config.json, report.csv, plot.csv, summary.json and manifest.json
// under out_dir. A dry run writes the manifest alone. On failure the manifest
// records the status and the outputs already written, then the error propagates.
RunResult run_experiment(const ExperimentConfig& c, const std::string& out_dir,
                         bool dry_run = false);

}  // namespace gfom
