#include "gfomlab/experiment.hpp"

#include <Eigen/Core>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <functional>

#include "gfomlab/error.hpp"
#include "gfomlab/io.hpp"

#ifndef GFOMLAB_VERSION
#define GFOMLAB_VERSION "unknown"
#endif

namespace gfom {

namespace {

struct Entry {
  ExperimentInfo info;
  std::function<ComparisonReport(const ExperimentConfig&)> run;
};

const std::vector<Entry>& entries() {
  static const std::vector<Entry> e = {
      {{"universality_averaged", "averaged psi under law A vs law B per step"},
       universality_averaged},
      {{"universality_entrywise", "E psi of chosen coordinates under law A vs law B"},
       universality_entrywise},
      {{"universality_sweep", "averaged universality gap at the last step across n"},
       universality_sweep},
      {{"se_vs_simulation", "simulated averages vs state-evolution predictions"},
       se_vs_simulation},
      {{"gd_gaussianity", "GD coordinates vs the predicted normal law"}, gd_gaussianity_test},
      {{"convergence_decay", "PGD distance to the fixed point and its log-linear fit"},
       convergence_decay},
      {{"delocalization", "sup-norm over rms ratio and leave-one-out gaps"}, delocalization},
      {{"correspondence", "GFOM iterates vs composite maps of the induced AMP"},
       correspondence_check},
      {{"embedding", "asymmetric program vs its symmetric embedding"}, embedding_check},
  };
  return e;
}

const Entry& find(const std::string& key) {
  for (const auto& e : entries()) {
    if (e.info.key == key) return e;
  }
  throw ConfigError("unknown experiment '" + key + "'");
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

const std::vector<ExperimentInfo>& experiment_registry() {
  static const std::vector<ExperimentInfo> reg = [] {
    std::vector<ExperimentInfo> out;
    for (const auto& e : entries()) out.push_back(e.info);
    return out;
  }();
  return reg;
}

ComparisonReport dispatch(const ExperimentConfig& c) { return find(c.experiment).run(c); }

RunResult run_experiment(const ExperimentConfig& c, const std::string& out_dir, bool dry_run) {
  namespace fs = std::filesystem;
  const Entry& entry = find(c.experiment);

  RunResult res;
  RunManifest& m = res.manifest;
  m.config_hash = config_hash(c);
  m.seed = c.seed;
  m.versions = {{"gfomlab", GFOMLAB_VERSION},
                {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                              std::to_string(EIGEN_MAJOR_VERSION) + "." +
                              std::to_string(EIGEN_MINOR_VERSION)},
                {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                      std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                      std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
  m.started = utc_now();
  m.dry_run = dry_run;

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + out_dir + "': " + ec.message());
  const fs::path dir(out_dir);
  const std::string manifest_path = (dir / "manifest.json").string();

  if (dry_run) {
    m.finished = utc_now();
    m.status = "dry_run";
    m.outputs = {manifest_path};
    write_json(manifest_path, to_json(m));
    return res;
  }

  auto record_failure = [&](const std::string& status, const std::string& what) {
    m.finished = utc_now();
    m.status = status;
    m.message = what;
    m.partial = true;
    m.outputs.push_back(manifest_path);
    write_json(manifest_path, to_json(m));
  };

  try {
    const std::string config_path = (dir / "config.json").string();
    write_json(config_path, to_json(c));
    m.outputs.push_back(config_path);

    ComparisonReport report = entry.run(c);

    const std::string report_path = (dir / "report.csv").string();
    write_report_csv(report_path, report);
    m.outputs.push_back(report_path);
    const std::string plot_path = (dir / "plot.csv").string();
    emit_plot_data(report, plot_path);
    m.outputs.push_back(plot_path);
    const std::string summary_path = (dir / "summary.json").string();
    write_json(summary_path, to_json(report));
    m.outputs.push_back(summary_path);

    m.finished = utc_now();
    m.status = report.passed() ? "ok" : "tolerance_failure";
    m.outputs.push_back(manifest_path);
    write_json(manifest_path, to_json(m));
    res.report = std::move(report);
  } catch (const ConfigError& e) {
    record_failure("config_error", e.what());
    throw;
  } catch (const ValidationError& e) {
    record_failure("config_error", e.what());
    throw;
  } catch (const NumericalError& e) {
    record_failure("numerical_error", e.what());
    throw;
  }
  return res;
}

}  // namespace gfom
