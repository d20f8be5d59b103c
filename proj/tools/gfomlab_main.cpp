#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "gfomlab/config.hpp"
#include "gfomlab/error.hpp"
#include "gfomlab/experiment.hpp"
#include "gfomlab/harness.hpp"
#include "gfomlab/parallel.hpp"
#include "gfomlab/programs.hpp"

namespace {

enum Exit : int { kPass = 0, kTolerance = 1, kConfig = 2, kNumerical = 3 };

void print_report(const gfom::ComparisonReport& r) {
  for (const auto& s : r.stats) {
    std::cout << (s.pass ? "PASS " : "FAIL ") << s.name;
    if (!s.series.empty()) std::cout << '[' << s.series << '=' << s.x << ']';
    std::cout << "  a=" << s.estimate_a << " b=" << s.estimate_b << " gap=" << s.gap
              << " tol=" << s.tolerance << '\n';
  }
  if (r.divergent_a + r.divergent_b > 0) {
    std::cout << "divergent replicates: a=" << r.divergent_a << " b=" << r.divergent_b << '\n';
  }
  std::cout << r.experiment << ": " << (r.passed() ? "PASS" : "FAIL") << " (" << r.runtime_seconds
            << " s)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gfomlab: first-order method universality and state-evolution laboratory"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicates, threads;
  bool dry_run = false;

  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("--config", config_path, "Config file (JSON)")->required();
  run->add_option("--seed", seed, "Override the master seed");
  run->add_option("--out", out_dir, "Output directory")->capture_default_str();
  run->add_option("--replicates", replicates, "Override the replicate count");
  run->add_option("--threads", threads, "Worker threads (0 = hardware)");
  run->add_flag("--dry-run", dry_run, "Write the manifest only");

  auto* validate = app.add_subcommand("validate", "Parse and validate a config file");
  validate->add_option("--config", config_path, "Config file (JSON)")->required();

  auto* list_programs = app.add_subcommand("list-programs", "List registered programs");
  auto* list_experiments = app.add_subcommand("list-experiments", "List experiments");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kConfig;
  }

  try {
    if (list_programs->parsed()) {
      for (const auto& p : gfom::program_registry()) {
        std::cout << p.key << '\t' << p.kind << '\t' << p.summary << '\n';
      }
      return kPass;
    }
    if (list_experiments->parsed()) {
      for (const auto& e : gfom::experiment_registry()) {
        std::cout << e.key << '\t' << e.summary << '\n';
      }
      return kPass;
    }

    gfom::ExperimentConfig cfg = gfom::parse_config(config_path);
    if (seed) cfg.seed = *seed;
    if (replicates) cfg.replicates = *replicates;
    if (threads) cfg.threads = *threads;

    if (validate->parsed()) {
      bool known = false;
      for (const auto& e : gfom::experiment_registry()) known = known || e.key == cfg.experiment;
      if (!known) throw gfom::ConfigError("unknown experiment '" + cfg.experiment + "'");
      (void)gfom::ensemble_for(cfg);
      std::cout << "valid " << gfom::config_hash(cfg) << '\n';
      return kPass;
    }

    if (cfg.threads) gfom::set_default_threads(cfg.threads);
    const gfom::RunResult res = gfom::run_experiment(cfg, out_dir, dry_run);
    if (!res.report) {
      std::cout << "dry run: manifest written to " << out_dir << '\n';
      return kPass;
    }
    print_report(*res.report);
    return res.report->passed() ? kPass : kTolerance;
  } catch (const gfom::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfig;
  } catch (const gfom::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kConfig;
  } catch (const gfom::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  }
}
