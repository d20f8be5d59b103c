#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "gfomlab/config.hpp"
#include "gfomlab/erm.hpp"
#include "gfomlab/error.hpp"
#include "gfomlab/experiment.hpp"
#include "gfomlab/harness.hpp"
#include "gfomlab/test_functions.hpp"

namespace gfom {
namespace {

using Check = Statistic::Check;

ExperimentConfig parse(const std::string& text) { return parse_config_text(text, "test"); }

TEST(Harness, StatisticPassRules) {
  const Statistic s = make_statistic("x", "t", 1.0, 1.25, 1.0, 0.1, 0.2, 0.25);
  EXPECT_EQ(s.gap, 0.25);
  EXPECT_NEAR(s.combined_se, std::hypot(0.1, 0.2), 1e-16);
  EXPECT_TRUE(s.pass);
  EXPECT_FALSE(make_statistic("x", "", 0, 1.0, 1.5, 0, 0, 0.25).pass);
  EXPECT_TRUE(make_statistic("x", "", 0, -5.0, 0.0, 0, 0, 0.0, Check::at_most).pass);
  EXPECT_FALSE(make_statistic("x", "", 0, 0.1, 0.0, 0, 0, 0.0, Check::at_most).pass);
  EXPECT_TRUE(make_statistic("x", "", 0, 0.96, 0.95, 0, 0, 0.0, Check::at_least).pass);
  EXPECT_FALSE(make_statistic("x", "", 0, 0.90, 0.95, 0, 0, 0.0, Check::at_least).pass);
  EXPECT_FALSE(make_statistic("x", "", 0, std::nan(""), 0.0, 0, 0, 1.0).pass);
}

TEST(Harness, SeToleranceIsFlooredAndCapped) {
  Tolerances t;
  t.se_multiple = 4.0;
  t.exact = 1e-8;
  EXPECT_DOUBLE_EQ(se_tolerance(t, 0.01), 0.04);
  EXPECT_DOUBLE_EQ(se_tolerance(t, 0.0), 1e-8);
  t.abs = 0.03;
  EXPECT_DOUBLE_EQ(se_tolerance(t, 0.01), 0.03);
  EXPECT_DOUBLE_EQ(se_tolerance(t, 0.001), 0.004);
}

TEST(Harness, MeanAndStandardError) {
  const MeanSe m = mean_se({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_DOUBLE_EQ(m.variance, 5.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.se, std::sqrt(5.0 / 12.0));
  EXPECT_EQ(mean_se({7.0}).se, 0.0);
}

// Brute-force sup over both one-sided gaps at every order statistic.
double ks_oracle(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double F = 0.5 * std::erfc(-x[i] / std::sqrt(2.0));
    d = std::max({d, (i + 1) / n - F, F - i / n});
  }
  return d;
}

TEST(Harness, KsDistanceMatchesOracle) {
  EXPECT_NEAR(ks_distance_normal({0.0}), 0.5, 1e-15);
  const std::vector<double> x = {-1.3, 0.2, 2.1, -0.4, 0.9, 0.05, -2.2};
  EXPECT_NEAR(ks_distance_normal(x), ks_oracle(x), 1e-15);
  std::vector<double> shifted;
  for (int i = 0; i < 200; ++i) shifted.push_back(3.0 + 0.01 * i);
  EXPECT_GT(ks_distance_normal(shifted), 0.99);
}

TEST(Harness, LinearFitRecoversLines) {
  const LinearFit f = linear_fit({1, 2, 3, 4}, {1, 3, 5, 7});
  EXPECT_NEAR(f.slope, 2.0, 1e-14);
  EXPECT_NEAR(f.intercept, -1.0, 1e-14);
  EXPECT_NEAR(f.r2, 1.0, 1e-14);
  const LinearFit g = linear_fit({1, 2, 3, 4}, {1, 2, 1, 2});
  EXPECT_LT(g.r2, 0.5);
  EXPECT_ANY_THROW(linear_fit({1, 1}, {0, 1}));
}

TEST(Harness, DelocalizationRatio) {
  EXPECT_DOUBLE_EQ(delocalization_ratio(Eigen::VectorXd::Constant(50, -3.0)), 1.0);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(64);
  e(9) = 2.0;
  EXPECT_DOUBLE_EQ(delocalization_ratio(e), 8.0);
  EXPECT_EQ(delocalization_ratio(Eigen::VectorXd::Zero(5)), 1.0);
}

TEST(Harness, TestFunctionMenu) {
  for (const auto& name : test_function_names()) EXPECT_EQ(make_test_function(name).name, name);
  EXPECT_EQ(make_test_function("cube")(2.0), 8.0);
  EXPECT_EQ(make_test_function("cube").order, 3u);
  EXPECT_EQ(make_test_function("smooth_indicator")(1.0), 1.0);
  EXPECT_EQ(make_test_function("smooth_indicator")(-1.0), 0.0);
  EXPECT_THROW(make_test_function("sine"), ConfigError);
}

TEST(Harness, MakeVectorKinds) {
  EXPECT_EQ(make_vector("ones", 3, 0, "z0"), Eigen::Vector3d::Ones());
  EXPECT_EQ(make_vector(nlohmann::json{{"kind", "e1"}, {"scale", 2.0}}, 3, 0, "z0"),
            Eigen::Vector3d(2.0, 0.0, 0.0));
  const Eigen::VectorXd r = make_vector("rademacher", 100, 5, "z0");
  EXPECT_TRUE((r.array().abs() == 1.0).all());
  EXPECT_EQ(make_vector("gaussian", 10, 5, "z0"), make_vector("gaussian", 10, 5, "z0"));
  EXPECT_NE(make_vector("gaussian", 10, 5, "z0"), make_vector("gaussian", 10, 5, "mu0"));
  EXPECT_THROW(make_vector("triangle", 3, 0, "z0"), ConfigError);
}

TEST(Harness, ConstantTestFunctionHasZeroGap) {
  const auto c = parse(R"({"experiment": "universality_averaged", "program": "tanh_amp",
    "law_b": "rademacher", "n": 60, "T": 3, "replicates": 4, "test_function": "constant",
    "mc_samples": 2000})");
  const auto rep = dispatch(c);
  ASSERT_EQ(rep.stats.size(), 3u);
  for (const auto& s : rep.stats) {
    EXPECT_EQ(s.gap, 0.0);
    EXPECT_TRUE(s.pass);
  }
}

TEST(Harness, ZeroInitIsPredictedExactly) {
  const auto c = parse(R"({"experiment": "se_vs_simulation", "program":
    {"name": "power_iteration", "params": {"z0": "zero"}}, "n": 40, "T": 3, "replicates": 3,
    "mc_samples": 2000})");
  const auto rep = dispatch(c);
  for (const auto& s : rep.stats) {
    EXPECT_EQ(s.estimate_a, 0.0);
    EXPECT_EQ(s.estimate_b, 0.0);
    EXPECT_TRUE(s.pass);
  }
}

TEST(Harness, ZeroStepGdIsDegenerate) {
  const auto c = parse(R"({"experiment": "gd_gaussianity", "program":
    {"name": "gd", "params": {"eta": 0.0, "lambda": 0.3}}, "n": 30, "m": 40, "T": 2,
    "replicates": 5, "mc_samples": 1000})");
  const auto rep = dispatch(c);
  ASSERT_FALSE(rep.stats.empty());
  for (const auto& s : rep.stats) {
    EXPECT_EQ(s.name, "mean");
    EXPECT_NEAR(s.gap, 0.0, 1e-15);
    EXPECT_TRUE(s.pass);
  }
}

TEST(Harness, GdGaussianityRejectsMomentum) {
  const auto c = parse(R"({"experiment": "gd_gaussianity", "program":
    {"name": "gd", "params": {"beta": 0.5}}, "n": 10, "m": 10, "replicates": 3})");
  EXPECT_THROW(dispatch(c), ConfigError);
}

TEST(Harness, DecayFromTheSolutionIsFlat) {
  const std::size_t m = 60, n = 40;
  ErmProblem p;
  p.A = sample_asymmetric(EnsembleSpec::rectangular(m, n), m, n, 3);
  EntrySampler s(EntryLaw::gaussian(), 4);
  p.mu0 = Eigen::VectorXd::NullaryExpr(n, [&] { return s(); });
  p.xi = Eigen::VectorXd::NullaryExpr(m, [&] { return s(); });
  p.prox = ProxSpec::ridge(0.5);
  p.mu_init = solve_fixed_point(p, 1e-14).mu;
  const DecayTable d = decay_table(p, 10);
  EXPECT_TRUE(d.converged);
  EXPECT_FALSE(d.fit.has_value());
  for (double x : d.l2) EXPECT_LE(x, 1e-12);
  const auto rep = convergence_decay_report(p, 10);
  ASSERT_EQ(rep.stats.size(), 1u);
  EXPECT_EQ(rep.stats[0].name, "max_l2");
  EXPECT_TRUE(rep.passed());
}

TEST(Harness, DecayForHugeLassoIsImmediate) {
  ErmProblem p;
  p.A = sample_asymmetric(EnsembleSpec::rectangular(30, 20), 30, 20, 5);
  p.Y = Eigen::VectorXd::Ones(30);
  p.prox = ProxSpec::lasso(1e6);
  const DecayTable d = decay_table(p, 5);
  for (double x : d.l2) EXPECT_EQ(x, 0.0);
}

TEST(Harness, RidgeDecayIsLinearOnLogScale) {
  const auto c = parse(R"({"experiment": "convergence_decay", "program":
    {"name": "pgd_linear", "params": {"prox": {"kind": "ridge", "lambda": 0.5}}},
    "n": 100, "m": 150, "T": 30})");
  const auto rep = dispatch(c);
  ASSERT_EQ(rep.stats.size(), 2u);
  EXPECT_EQ(rep.stats[0].name, "slope");
  EXPECT_LT(rep.stats[0].estimate_a, 0.0);
  EXPECT_GE(rep.stats[1].estimate_a, 0.95);
}

TEST(Harness, SameLawNullPasses) {
  const auto c = parse(R"({"experiment": "universality_averaged", "program": "tanh_amp",
    "law_b": "gaussian", "n": 200, "T": 2, "replicates": 30, "mc_samples": 4000, "seed": 3})");
  const auto rep = dispatch(c);
  EXPECT_TRUE(rep.passed());
  EXPECT_EQ(rep.replicates, 30u);
}

TEST(Harness, DelocalizationOfPowerIteration) {
  const auto c = parse(R"({"experiment": "delocalization", "program": "tanh_amp",
    "n": 150, "T": 3, "replicates": 2, "mc_samples": 2000})");
  const auto rep = dispatch(c);
  EXPECT_TRUE(rep.passed());
  for (const auto& s : rep.stats) EXPECT_GE(s.estimate_a, 1.0);
}

TEST(Harness, CorrespondenceAndEmbeddingAreExact) {
  for (const char* prog : {"\"tanh_amp\"", "{\"name\": \"gd\", \"params\": {\"loss\": \"logcosh\"}}",
                           "{\"name\": \"logistic\", \"params\": {\"sigma\": 0.3}}"}) {
    const auto c = parse(std::string(R"({"experiment": "correspondence", "program": )") + prog +
                         R"(, "n": 30, "m": 36, "T": 3, "mc_samples": 2000})");
    EXPECT_TRUE(dispatch(c).passed()) << prog;
  }
  const auto e = parse(R"({"experiment": "embedding", "program": "gd", "n": 20, "m": 25, "T": 4,
    "tolerance": {"exact": 1e-12}})");
  EXPECT_TRUE(dispatch(e).passed());
}

TEST(Harness, ReplicatesBelowTwoAreRejected) {
  const auto c = parse(R"({"experiment": "se_vs_simulation", "n": 20, "replicates": 1})");
  EXPECT_THROW(dispatch(c), ValidationError);
}

TEST(Harness, RunsAreDeterministic) {
  const auto c = parse(R"({"experiment": "se_vs_simulation", "program": "tanh_amp", "n": 80,
    "T": 2, "replicates": 6, "mc_samples": 2000, "seed": 11, "threads": 2})");
  const auto a = dispatch(c);
  auto c1 = c;
  c1.threads = 1;
  const auto b = dispatch(c1);
  ASSERT_EQ(a.stats.size(), b.stats.size());
  for (std::size_t i = 0; i < a.stats.size(); ++i) {
    EXPECT_EQ(a.stats[i].estimate_a, b.stats[i].estimate_a);
    EXPECT_EQ(a.stats[i].estimate_b, b.stats[i].estimate_b);
  }
}

TEST(Harness, ProgramParamsAreChecked) {
  EXPECT_THROW(dispatch(parse(R"({"experiment": "correspondence", "program":
    {"name": "gd", "params": {"bogus": 1}}, "n": 10})")), ConfigError);
  EXPECT_THROW(dispatch(parse(R"({"experiment": "embedding", "program": "tanh_amp", "n": 10})")),
               ConfigError);
}

}  // namespace
}  // namespace gfom
