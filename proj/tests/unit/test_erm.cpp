#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "gfomlab/ensembles.hpp"
#include "gfomlab/erm.hpp"
#include "gfomlab/error.hpp"
#include "gfomlab/programs.hpp"
#include "gfomlab/rng.hpp"

namespace gfom {
namespace {

Eigen::VectorXd gaussian_vector(std::size_t len, std::uint64_t seed) {
  EntrySampler s(EntryLaw::gaussian(), seed);
  Eigen::VectorXd v(static_cast<Eigen::Index>(len));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = s();
  return v;
}

ErmProblem linear_problem(std::size_t m, std::size_t n, std::uint64_t seed) {
  ErmProblem p;
  p.A = sample_asymmetric(EnsembleSpec::rectangular(m, n), m, n, seed);
  p.mu0 = gaussian_vector(n, seed + 1);
  p.xi = gaussian_vector(m, seed + 2);
  return p;
}

ProxSpec quartic() {
  return ProxSpec::smooth_custom([](double w) { return w * w * w * w / 4.0; },
                                 [](double w) { return w * w * w; },
                                 [](double w) { return 3.0 * w * w; }, 0.0, "quartic");
}

TEST(Prox, ClosedFormExamples) {
  EXPECT_DOUBLE_EQ(ProxSpec::zero().eval(0.7, 1.5), 1.5);
  EXPECT_DOUBLE_EQ(ProxSpec::ridge(1.0).eval(1.0, 3.0), 1.5);
  EXPECT_DOUBLE_EQ(ProxSpec::lasso(1.0).eval(0.5, 2.0), 1.5);
  EXPECT_DOUBLE_EQ(ProxSpec::lasso(1.0).eval(0.5, -2.0), -1.5);
  EXPECT_EQ(ProxSpec::lasso(1.0).eval(0.5, 0.3), 0.0);
  EXPECT_NEAR(quartic().eval(1.0, 2.0), 1.0, 1e-12);
  EXPECT_EQ(ProxSpec::lasso(1.0).inverse(0.5, 0.0), 0.0);
}

// Optimality, firm nonexpansiveness, inverse round trip and derivative bounds.
TEST(Prox, PropertySuite) {
  CounterEngine eng(17);
  std::normal_distribution<double> normal;
  const std::vector<ProxSpec> specs = {ProxSpec::zero(), ProxSpec::ridge(0.8), ProxSpec::lasso(0.3),
                                       quartic()};
  for (const auto& f : specs) {
    for (int i = 0; i < 10000; ++i) {
      const double eta = 0.05 + std::abs(normal(eng));
      const double x = 3.0 * normal(eng), y = 3.0 * normal(eng);
      const double px = f.eval(eta, x), py = f.eval(eta, y);
      ASSERT_LE((px - py) * (px - py), (px - py) * (x - y) + 1e-12) << f.name();
      if (f.kind == ProxSpec::Kind::lasso) {
        if (px != 0.0) {
          ASSERT_NEAR(x - px, eta * f.gradient(px), 1e-12);
        } else {
          ASSERT_LE(std::abs(x), eta * f.lambda + 1e-12);
        }
      } else {
        ASSERT_NEAR(x - px, eta * f.gradient(px), 1e-9 * (1.0 + std::abs(x))) << f.name();
      }
      ASSERT_NEAR(f.eval(eta, f.inverse(eta, px)), px, 1e-9 * (1.0 + std::abs(px))) << f.name();
      const double d = f.derivative(eta, x);
      ASSERT_GE(d, 0.0);
      ASSERT_LE(d, f.lipschitz(eta) + 1e-12);
    }
  }
}

TEST(Prox, RejectsNegativePenalty) {
  EXPECT_THROW(ProxSpec::ridge(-1.0), ValidationError);
  EXPECT_THROW(ProxSpec::lasso(-1.0), ValidationError);
}

TEST(Erm, PgdStepExamples) {
  ErmProblem p;
  p.A = Eigen::MatrixXd::Identity(2, 2);
  p.Y = Eigen::Vector2d(1.0, -2.0);
  p.eta = 0.5;
  const auto hist = pgd_linear(p, 2);
  EXPECT_TRUE(hist[1].isApprox(Eigen::Vector2d(0.5, -1.0)));
  EXPECT_TRUE(hist[2].isApprox(Eigen::Vector2d(0.75, -1.5)));
  p.prox = ProxSpec::lasso(1.0);
  EXPECT_TRUE(pgd_step(p, Eigen::Vector2d::Zero()).isApprox(Eigen::Vector2d(0.0, -0.5)));
}

TEST(Erm, RidgeFixedPointMatchesDirectSolve) {
  for (double lambda : {0.1, 1.0}) {
    auto p = linear_problem(80, 50, 5);
    p.prox = ProxSpec::ridge(lambda);
    const FixedPointResult fp = solve_fixed_point(p, 1e-13);
    ASSERT_TRUE(fp.converged);
    const Eigen::MatrixXd H =
        p.A.transpose() * p.A + lambda * Eigen::MatrixXd::Identity(50, 50);
    const Eigen::VectorXd direct = H.ldlt().solve(p.A.transpose() * p.responses());
    EXPECT_LE((fp.mu - direct).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Erm, HugeLassoPenaltyGivesZero) {
  auto p = linear_problem(40, 30, 7);
  p.prox = ProxSpec::lasso(1e6);
  const FixedPointResult fp = solve_fixed_point(p);
  EXPECT_TRUE(fp.converged);
  EXPECT_EQ(fp.mu.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Erm, DefaultStepIsHalfInverseSquaredNorm) {
  const auto p = linear_problem(60, 30, 9);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(p.A);
  const double s = svd.singularValues()(0);
  EXPECT_NEAR(operator_norm_estimate(p.A), s, 1e-6 * s);
  EXPECT_NEAR(default_step(p.A), 0.5 / (s * s), 1e-5 / (s * s));
  EXPECT_EQ(default_step(Eigen::MatrixXd::Zero(3, 2)), 1.0);
}

TEST(Erm, LogisticGradientEquivalence) {
  const std::size_t n = 100;
  const Eigen::MatrixXd A = sample_asymmetric(EnsembleSpec::rectangular(n, n), n, n, 21);
  for (const auto& f : {ProxSpec::zero(), ProxSpec::ridge(0.5), quartic()}) {
    const auto g = logistic_objective_check(A, gaussian_vector(n, 22), gaussian_vector(n, 23), f,
                                            gaussian_vector(n, 24));
    EXPECT_LE((g.direct - g.equivalent).cwiseAbs().maxCoeff(), 1e-12) << f.name();
  }
}

TEST(Erm, LinearObjectiveIsMonotone) {
  for (const auto& prox : {ProxSpec::zero(), ProxSpec::ridge(0.2), ProxSpec::lasso(0.1)}) {
    auto p = linear_problem(60, 40, 31);
    p.prox = prox;
    p.loss = Loss::logcosh();
    const auto hist = pgd_linear(p, 30);
    for (std::size_t t = 1; t < hist.size(); ++t) {
      EXPECT_LE(erm_objective(p, hist[t]), erm_objective(p, hist[t - 1]) + 1e-10) << prox.name();
    }
  }
}

TEST(Erm, LogisticObjectiveDecays) {
  ErmProblem p;
  p.model = ErmProblem::Model::logistic;
  p.A = sample_asymmetric(EnsembleSpec::rectangular(80, 40), 80, 40, 41);
  p.mu0 = gaussian_vector(40, 42);
  p.xi = gaussian_vector(80, 43);
  p.prox = ProxSpec::ridge(0.1);
  p.sigma = 0.0;
  const auto hist = pgd_logistic(p, 40);
  for (std::size_t t = 1; t < hist.size(); ++t) {
    EXPECT_LE(erm_objective(p, hist[t]), erm_objective(p, hist[t - 1]) + 1e-10);
  }
  EXPECT_LT(erm_objective(p, hist.back()), erm_objective(p, hist.front()));
}

TEST(Erm, ModelMismatchIsRejected) {
  auto p = linear_problem(10, 5, 1);
  EXPECT_THROW(pgd_logistic(p, 1), ConfigError);
  p.xi = Eigen::VectorXd::Zero(3);
  EXPECT_THROW(pgd_linear(p, 1), ConfigError);
}

TEST(Erm, DroppingAPredictorFreezesIt) {
  auto p = linear_problem(40, 20, 51);
  p.prox = ProxSpec::ridge(0.1);
  const auto hist = leave_one_out_run(p, DropKind::predictor, 3, 10);
  for (const auto& mu : hist) EXPECT_EQ(mu(3), 0.0);
  EXPECT_THROW(leave_one_out_run(p, DropKind::predictor, 20, 1), ValidationError);
}

TEST(Erm, DroppingASampleMatchesTheReducedProblem) {
  auto p = linear_problem(30, 15, 61);
  p.eta = 0.1;
  const auto hist = leave_one_out_run(p, DropKind::sample, 4, 8);
  ErmProblem q = p;
  Eigen::MatrixXd A(29, 15);
  Eigen::VectorXd Y(29);
  const Eigen::VectorXd full = p.responses();
  for (Eigen::Index i = 0, r = 0; i < 30; ++i) {
    if (i == 4) continue;
    A.row(r) = p.A.row(i);
    Y(r++) = full(i);
  }
  q.A = A;
  q.Y = Y;
  q.xi = Eigen::VectorXd();
  const auto ref = pgd_linear(q, 8);
  for (std::size_t t = 0; t <= 8; ++t) EXPECT_LE((hist[t] - ref[t]).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Erm, SolutionCsvRoundTrips) {
  const Eigen::Vector3d mu(0.1, -1.0 / 3.0, 2e-17);
  std::ostringstream os;
  write_solution_csv(os, mu);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "coordinate,value");
  for (Eigen::Index j = 0; j < 3; ++j) {
    std::getline(is, line);
    EXPECT_EQ(std::stod(line.substr(line.find(',') + 1)), mu(j));
  }
}

}  // namespace
}  // namespace gfom
