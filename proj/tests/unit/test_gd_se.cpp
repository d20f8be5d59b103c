#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "gfomlab/ensembles.hpp"
#include "gfomlab/error.hpp"
#include "gfomlab/gd_se.hpp"

namespace gfom {
namespace {

Eigen::VectorXd gaussian_vector(std::size_t len, std::uint64_t seed) {
  EntrySampler s(EntryLaw::gaussian(), seed);
  Eigen::VectorXd v(static_cast<Eigen::Index>(len));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = s();
  return v;
}

GdSeProblem rectangular_problem(std::size_t m, std::size_t n, std::size_t T, const Loss& loss,
                                double eta, double lambda) {
  GdSeProblem p;
  p.loss = loss;
  p.eta = eta;
  p.lambda = lambda;
  p.mu0 = gaussian_vector(n, 1);
  p.xi = gaussian_vector(m, 2);
  p.profile = EnsembleSpec::rectangular(m, n).second_moments();
  p.T = T;
  return p;
}

GdSeOptions opts(std::size_t mc, std::uint64_t seed = 3) {
  GdSeOptions o;
  o.mc_samples = mc;
  o.seed = seed;
  return o;
}

// With E A^2 = 1/m: b = eta - 1 and sigma^2 = eta^2 (||xi||^2 + ||mu0||^2) / m.
TEST(GdSe, FirstStepClosedForm) {
  const std::size_t m = 30, n = 20;
  for (double lambda : {0.0, 0.4}) {
    for (double eta : {0.05, 0.3}) {
      const auto p = rectangular_problem(m, n, 1, Loss::squared(), eta, lambda);
      const GdSeState st = gd_se(p, opts(2000));
      const GdLaw law = gd_key_params(st, 1);
      const double sigma2 = eta * eta * (p.xi.squaredNorm() + p.mu0.squaredNorm()) / m;
      for (std::size_t l = 0; l < n; ++l) {
        EXPECT_NEAR(law.b(l), eta - 1.0, 1e-12);
        EXPECT_NEAR(law.sigma2(l), sigma2, 1e-10);
      }
    }
  }
}

TEST(GdSe, ZeroStepSizeFreezesTheLaw) {
  const auto p = rectangular_problem(20, 10, 4, Loss::squared_cos(0.2), 0.0, 0.3);
  const GdSeState st = gd_se(p, opts(1000));
  for (std::size_t t = 0; t <= 4; ++t) {
    const GdLaw law = gd_key_params(st, t);
    EXPECT_LE((law.b.array() + 1.0).abs().maxCoeff(), 1e-14);
    EXPECT_LE(law.sigma2.cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(GdSe, MIsUnitUpperTriangular) {
  const auto p = rectangular_problem(25, 15, 5, Loss::squared_cos(0.1), 0.2, 0.1);
  const GdSeState st = gd_se(p, opts(1000));
  for (std::size_t l = 0; l < st.l_count(); ++l) {
    const Eigen::MatrixXd& M = st.M_at(l);
    for (Eigen::Index t = 0; t <= 5; ++t) {
      EXPECT_EQ(M(t, t), 1.0);
      for (Eigen::Index r = t + 1; r <= 5; ++r) EXPECT_EQ(M(r, t), 0.0);
    }
    const Eigen::MatrixXd& S = st.sigma_v_at(l);
    EXPECT_LE((S - S.transpose()).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(GdSe, EntrywiseLawReadsTheKeyParameters) {
  const auto p = rectangular_problem(25, 15, 3, Loss::squared(), 0.2, 0.1);
  const GdSeState st = gd_se(p, opts(1000));
  const GdLaw law = gd_key_params(st, 3);
  for (std::size_t l : {0u, 7u}) {
    const GdEntryLaw e = gd_entrywise_law(st, l, 3);
    EXPECT_EQ(e.b, law.b(l));
    EXPECT_EQ(e.variance, law.sigma2(l));
    EXPECT_DOUBLE_EQ(e.mean, law.b(l) * p.mu0(l));
    EXPECT_EQ(e.weights.size(), 4);
    EXPECT_DOUBLE_EQ(e.b, -e.weights(0));
  }
  EXPECT_THROW(gd_entrywise_law(st, 15, 1), ValidationError);
  EXPECT_THROW(gd_key_params(st, 4), ConfigError);
}

class NestedVsRecursive : public ::testing::TestWithParam<bool> {};

TEST_P(NestedVsRecursive, AgreeOnTheSamePaths) {
  const bool homogeneous = GetParam();
  const std::size_t T = 4;
  const Loss loss = Loss::squared_cos(0.1);
  GdSeState st;
  if (homogeneous) {
    st = gd_se_homogeneous(loss, 0.3, 0.05, 2.0, gaussian_vector(40, 5), 2.0, T, opts(2000));
  } else {
    st = gd_se(rectangular_problem(12, 8, T, loss, 0.3, 0.05), opts(1000));
  }
  const GdPathCache paths = gd_sample_paths(st, T, 600, 9);
  for (std::size_t t = 1; t <= T; ++t) {
    for (std::size_t s = 1; s <= t; ++s) {
      const Eigen::VectorXd a = g_coefficient_nested_sum(st, s, t, paths);
      const Eigen::VectorXd b = g_coefficient_recursive(st, s, t, paths);
      EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-10) << "s=" << s << " t=" << t;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Forms, NestedVsRecursive, ::testing::Values(false, true));

TEST(GdSe, DiagonalCoefficientIsMeanCurvature) {
  const auto st = gd_se(rectangular_problem(10, 6, 3, Loss::squared_cos(0.5), 0.2, 0.0), opts(1000));
  const GdPathCache paths = gd_sample_paths(st, 3, 400, 4);
  for (std::size_t t = 1; t <= 3; ++t) {
    Eigen::VectorXd per_row(static_cast<Eigen::Index>(paths.rows));
    for (std::size_t k = 0; k < paths.rows; ++k) {
      double sum = 0.0;
      for (std::size_t j = 0; j < paths.samples; ++j) sum += paths.w(k, j, t);
      per_row(k) = sum / paths.samples;
    }
    const Eigen::VectorXd expected = -0.2 * st.problem.profile.apply_transpose(per_row);
    EXPECT_LE((g_coefficient_nested_sum(st, t, t, paths) - expected).cwiseAbs().maxCoeff(), 1e-12);
  }
}

// Chains for t - s = 2: t > s and t > s + 1 > s.
TEST(GdSe, TwoStepHandExpansion) {
  const double eta = 0.25;
  const auto st = gd_se(rectangular_problem(10, 6, 3, Loss::squared_cos(0.5), eta, 0.0), opts(1000));
  const GdPathCache paths = gd_sample_paths(st, 3, 400, 4);
  const std::size_t s = 1, t = 3;
  Eigen::VectorXd per_row(static_cast<Eigen::Index>(paths.rows));
  for (std::size_t k = 0; k < paths.rows; ++k) {
    double sum = 0.0;
    for (std::size_t j = 0; j < paths.samples; ++j) {
      const double w1 = paths.w(k, j, 1), w2 = paths.w(k, j, 2), w3 = paths.w(k, j, 3);
      const double direct = -eta * st.f.value(t, s, k) * w1;
      const double via2 = eta * eta * st.f.value(t, 2, k) * w2 * st.f.value(2, s, k) * w1;
      sum += w3 * (direct + via2);
    }
    per_row(k) = sum / paths.samples;
  }
  const Eigen::VectorXd expected = -eta * st.problem.profile.apply_transpose(per_row);
  EXPECT_LE((g_coefficient_nested_sum(st, s, t, paths) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GdSe, NestedSumDepthIsGuarded) {
  const auto st = gd_se_homogeneous(Loss::squared(), 0.1, 0.0, 1.0, gaussian_vector(10, 1), 1.0,
                                    10, opts(200));
  const GdPathCache paths = gd_sample_paths(st, 10, 50, 2);
  EXPECT_THROW(g_coefficient_nested_sum(st, 1, 10, paths), ConfigError);
  EXPECT_NO_THROW(g_coefficient_nested_sum(st, 2, 10, paths));
  EXPECT_NO_THROW(g_coefficient_recursive(st, 1, 10, paths));
}

TEST(GdSe, HomogeneousFormAgreesWithGeneralForm) {
  const std::size_t m = 60, n = 40, T = 3;
  const Loss loss = Loss::squared_cos(0.2);
  GdSeProblem p;
  p.loss = loss;
  p.eta = 0.2;
  p.lambda = 0.1;
  p.mu0 = gaussian_vector(n, 11);
  p.xi = gaussian_vector(m, 12);
  p.profile = VarianceProfile::constant(m, n, 1.0 / n);
  p.T = T;
  const GdSeState general = gd_se(p, opts(4000));
  const GdSeState homog = gd_se_homogeneous(loss, p.eta, p.lambda, p.mu0.squaredNorm(), p.xi,
                                            double(m) / n, T, opts(4000 * m));
  for (std::size_t t = 1; t <= T; ++t) {
    const GdLaw a = gd_key_params(general, t);
    const GdLaw b = gd_key_params(homog, t);
    for (std::size_t l = 0; l < n; ++l) {
      const double sb = std::hypot(a.b_se(l), b.b_se(0));
      const double ss = std::hypot(a.sigma2_se(l), b.sigma2_se(0));
      EXPECT_LE(std::abs(a.b(l) - b.b(0)), 4.0 * sb + 1e-12) << "t=" << t;
      EXPECT_LE(std::abs(a.sigma2(l) - b.sigma2(0)), 4.0 * ss + 1e-12) << "t=" << t;
    }
  }
}

TEST(GdSe, OverparametrizedLimitBarelyMoves) {
  const double phi = 0.05;
  const auto st = gd_se_homogeneous(Loss::squared(), 0.1, 0.0, 1.0, gaussian_vector(50, 13), phi,
                                    5, opts(4000));
  for (std::size_t t = 1; t <= 5; ++t) {
    EXPECT_LE(std::abs(gd_key_params(st, t).b(0) + 1.0), 0.05) << "t=" << t;
  }
  EXPECT_NEAR(gd_key_params(st, 1).b(0), 0.1 * phi - 1.0, 1e-12);
}

TEST(GdSe, BatchErrorsAreReported) {
  const auto st = gd_se(rectangular_problem(20, 10, 2, Loss::squared_cos(0.3), 0.2, 0.0), opts(1600));
  EXPECT_EQ(st.batches, 8u);
  const GdLaw law = gd_key_params(st, 2);
  EXPECT_GT(law.sigma2_se.maxCoeff(), 0.0);
  EXPECT_TRUE(law.sigma2_se.allFinite());
}

TEST(GdSe, LawCsvHasOneRowPerCoordinateAndStep) {
  const auto st = gd_se(rectangular_problem(8, 4, 2, Loss::squared(), 0.1, 0.0), opts(200));
  std::ostringstream os;
  write_gd_law_csv(st, os);
  std::istringstream is(os.str());
  std::string line;
  std::size_t rows = 0;
  std::getline(is, line);
  EXPECT_EQ(line, "l,t,b,sigma2");
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 4u * 3u);
}

TEST(GdSe, InputsAreValidated) {
  auto p = rectangular_problem(8, 4, 2, Loss::squared(), -0.1, 0.0);
  EXPECT_THROW(gd_se(p, opts(100)), ValidationError);
  p.eta = 0.1;
  p.masks.assign(1, Eigen::VectorXd::Ones(8));
  EXPECT_THROW(gd_se(p, opts(100)), ConfigError);
  EXPECT_THROW(gd_se_homogeneous(Loss::squared(), 0.1, 0.0, 1.0, Eigen::VectorXd::Ones(3), 0.0, 1),
               ValidationError);
}

}  // namespace
}  // namespace gfom
