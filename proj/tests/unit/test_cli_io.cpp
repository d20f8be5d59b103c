#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "gfomlab/config.hpp"
#include "gfomlab/error.hpp"
#include "gfomlab/experiment.hpp"
#include "gfomlab/io.hpp"

namespace gfom {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gfomlab_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

TEST(Config, MinimalDocumentGetsDefaults) {
  const auto c = parse_config_text(R"({"program": "power_iteration", "n": 100, "T": 2})");
  EXPECT_EQ(c.experiment, "se_vs_simulation");
  EXPECT_EQ(c.n, 100u);
  EXPECT_EQ(c.rows(), 100u);
  EXPECT_EQ(c.T, 2u);
  EXPECT_EQ(c.ensemble.law, "gaussian");
  EXPECT_EQ(c.tolerance.se_multiple, 4.0);
  EXPECT_FALSE(c.tolerance.abs.has_value());
}

TEST(Config, OutOfRangeValuesNameTheField) {
  try {
    parse_config_text(R"({"n": -5})");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("n:"), std::string::npos);
  }
  EXPECT_THROW(parse_config_text(R"({"T": 0})"), ValidationError);
  EXPECT_THROW(parse_config_text(R"({"seed": -1})"), ValidationError);
  EXPECT_THROW(parse_config_text(R"({"T": 5, "mc_samples": 4})"), ValidationError);
}

TEST(Config, UnknownKeysAreNamed) {
  try {
    parse_config_text(R"({"n": 10, "replicatse": 3})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("replicatse"), std::string::npos);
  }
  EXPECT_THROW(parse_config_text(R"({"program": "nope"})"), ValidationError);
  EXPECT_THROW(parse_config_text(R"({"test_function": "nope"})"), ValidationError);
}

TEST(Config, SyntaxErrorsReportLineAndColumn) {
  try {
    parse_config_text("{\n  \"n\": ,\n}", "bad.json");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("bad.json"), std::string::npos);
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
  }
}

TEST(Config, JsonRoundTrip) {
  const auto c = parse_config_text(R"({"experiment": "gd_gaussianity",
    "program": {"name": "gd", "params": {"eta": 0.2, "lambda": 0.1}},
    "ensemble": {"law": "shifted_bernoulli", "p": 0.3, "profile": {"kind": "block", "value": 2, "value_b": 0.5}},
    "law_b": {"law": "rademacher"}, "n": 40, "m": 80, "T": 3, "replicates": 7, "seed": 99,
    "coordinates": [0, 3], "tolerance": {"abs": 0.05, "ks": 0.1}, "sweep_n": [10, 20]})");
  const auto back = config_from_json(to_json(c));
  EXPECT_EQ(back, c);
  EXPECT_EQ(config_hash(back), config_hash(c));
}

TEST(Config, HashIgnoresKeyOrder) {
  const auto a = parse_config_text(R"({"n": 50, "T": 3, "seed": 2})");
  const auto b = parse_config_text(R"({"seed": 2, "T": 3, "n": 50})");
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 64u);
  EXPECT_NE(config_hash(a), config_hash(parse_config_text(R"({"n": 50, "T": 3, "seed": 3})")));
  EXPECT_EQ(sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Experiment, UnknownExperimentIsAConfigError) {
  const auto c = parse_config_text(R"({"experiment": "frobnicate", "n": 5})");
  EXPECT_THROW(dispatch(c), ConfigError);
  const auto dir = scratch("unknown");
  EXPECT_THROW(run_experiment(c, dir.string()), ConfigError);
  EXPECT_TRUE(fs::is_empty(dir));
}

TEST(Experiment, FailedRunLeavesAPartialManifest) {
  const auto c = parse_config_text(R"({"experiment": "se_vs_simulation",
    "program": {"name": "power_iteration", "params": {"z0": {"kind": "ones", "scale": 1e11}}},
    "ensemble": {"profile": {"kind": "constant", "value": 100}}, "n": 20, "T": 3,
    "replicates": 3, "mc_samples": 200})");
  const auto dir = scratch("partial");
  EXPECT_THROW(run_experiment(c, dir.string()), NumericalError);
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest["status"], "numerical_error");
  EXPECT_TRUE(manifest["partial"].get<bool>());
  EXPECT_TRUE(fs::exists(dir / "config.json"));
  EXPECT_FALSE(fs::exists(dir / "report.csv"));
}

TEST(Experiment, DryRunWritesOnlyTheManifest) {
  const auto c = parse_config_text(R"({"experiment": "embedding", "program": "gd", "n": 10})");
  const auto dir = scratch("dry");
  const RunResult r = run_experiment(c, dir.string(), true);
  EXPECT_FALSE(r.report.has_value());
  EXPECT_EQ(r.manifest.status, "dry_run");
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  EXPECT_FALSE(fs::exists(dir / "report.csv"));
}

TEST(Experiment, RerunIsByteIdentical) {
  const auto c = parse_config_text(R"({"experiment": "se_vs_simulation", "program": "tanh_amp",
    "n": 60, "T": 2, "replicates": 4, "mc_samples": 2000, "seed": 5})");
  const auto d1 = scratch("rerun1");
  const auto d2 = scratch("rerun2");
  const RunResult a = run_experiment(c, d1.string());
  run_experiment(c, d2.string());
  ASSERT_TRUE(a.report.has_value());
  for (const char* f : {"report.csv", "plot.csv", "config.json"}) {
    EXPECT_EQ(slurp(d1 / f), slurp(d2 / f)) << f;
    EXPECT_FALSE(slurp(d1 / f).empty());
  }
  const auto manifest = nlohmann::json::parse(slurp(d1 / "manifest.json"));
  EXPECT_EQ(manifest["config_hash"], config_hash(c));
  EXPECT_EQ(manifest["seed"], 5);
}

TEST(Io, EmptyReportWritesHeaders) {
  ComparisonReport rep;
  std::ostringstream plot, report;
  emit_plot_data(plot, rep);
  write_report_csv(report, rep);
  EXPECT_EQ(plot.str(), "series,x,y,y_err\n");
  EXPECT_EQ(report.str(),
            "name,series,x,estimate_a,estimate_b,gap,se_a,se_b,combined_se,tolerance,pass\n");
}

TEST(Io, CsvValuesReingestExactly) {
  ComparisonReport rep;
  rep.stats.push_back(make_statistic("avg_square", "z", 3.0, 1.0 / 3.0, 0.1, 1e-17, 2.0 / 7.0, 0.5));
  std::ostringstream os;
  write_report_csv(os, rep);
  std::istringstream is(os.str());
  const CsvTable t = read_csv(is);
  ASSERT_EQ(t.rows.size(), 1u);
  const auto& row = t.rows[0];
  EXPECT_EQ(std::stod(row[t.column("estimate_a")]), 1.0 / 3.0);
  EXPECT_EQ(std::stod(row[t.column("estimate_b")]), 0.1);
  EXPECT_EQ(std::stod(row[t.column("gap")]), rep.stats[0].gap);
  EXPECT_EQ(std::stod(row[t.column("se_a")]), 1e-17);
  EXPECT_EQ(row[t.column("pass")], "true");
  EXPECT_THROW(t.column("missing"), ConfigError);
  for (double x : {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 0.0}) {
    EXPECT_EQ(std::stod(format_double(x)), x);
  }
}

}  // namespace
}  // namespace gfom
