#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gfomlab/dynamics.hpp"
#include "gfomlab/ensembles.hpp"
#include "gfomlab/error.hpp"
#include "gfomlab/programs.hpp"

namespace gfom {
namespace {

Eigen::VectorXd gaussian_vector(std::size_t len, std::uint64_t seed) {
  EntrySampler s(EntryLaw::gaussian(), seed);
  Eigen::VectorXd v(static_cast<Eigen::Index>(len));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = s();
  return v;
}

std::vector<Eigen::VectorXd> constant_onsager(std::size_t n, std::size_t T, double b) {
  return std::vector<Eigen::VectorXd>(T > 1 ? T - 1 : 0, Eigen::VectorXd::Constant(n, b));
}

TEST(Dynamics, ZeroMatrixLeavesOnlyTheGTerm) {
  const std::size_t n = 6;
  SymmetricProgram p;
  p.T = 2;
  p.z0 = Eigen::VectorXd::LinSpaced(n, 1.0, 6.0);
  p.F = {RowFunction::identity_last(1), RowFunction::identity_last(2)};
  p.G = {RowFunction::affine({2.0}, 1.0), RowFunction::affine({0.0, 3.0})};
  const auto traj = run_symmetric(Eigen::MatrixXd::Zero(n, n), p);
  EXPECT_TRUE(traj.z[1].isApprox((2.0 * p.z0.array() + 1.0).matrix()));
  EXPECT_TRUE(traj.z[2].isApprox(3.0 * traj.z[1]));
}

TEST(Dynamics, PermutationMatrixExample) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(3, 3);
  A(0, 1) = A(1, 0) = 1.0;
  A(2, 2) = 1.0;
  Eigen::VectorXd z0(3);
  z0 << 1.0, 2.0, 3.0;
  const auto traj = run_symmetric(A, build_power_iteration(2, z0));
  EXPECT_EQ(traj.z[1], (Eigen::VectorXd(3) << 2.0, 1.0, 3.0).finished());
  EXPECT_EQ(traj.z[2], z0);
}

// Independent re-implementation of the tanh AMP recursion.
TEST(Dynamics, TanhAmpMatchesHandRecursion) {
  const std::size_t n = 50, T = 5;
  const Eigen::MatrixXd A = sample_symmetric(EnsembleSpec::wigner(n), n, 3);
  const Eigen::VectorXd z0 = gaussian_vector(n, 4);
  std::vector<Eigen::VectorXd> b;
  for (std::size_t t = 2; t <= T; ++t) b.push_back(gaussian_vector(n, 10 + t));
  const auto traj = run_symmetric(A, build_tanh_amp(T, z0, b));

  std::vector<Eigen::VectorXd> z = {z0};
  for (std::size_t t = 1; t <= T; ++t) {
    Eigen::VectorXd next = A * z[t - 1].array().tanh().matrix();
    if (t >= 2) next -= b[t - 2].cwiseProduct(z[t - 2].array().tanh().matrix());
    z.push_back(next);
    EXPECT_LE((traj.z[t] - z[t]).cwiseAbs().maxCoeff(), 1e-14) << "t=" << t;
  }
}

TEST(Dynamics, OneByOneAsymmetricHandComputation) {
  Eigen::MatrixXd A(1, 1);
  A << 2.0;
  AsymmetricProgram p;
  p.T = 2;
  p.u0 = Eigen::VectorXd::Constant(1, 0.5);
  p.v0 = Eigen::VectorXd::Constant(1, 1.0);
  for (std::size_t t = 1; t <= 2; ++t) {
    p.F1.push_back(RowFunction::identity_last(t));
    p.G1.push_back(RowFunction::identity_last(t));
    p.G2.push_back(RowFunction::identity_last(t + 1));
    p.F2.push_back(RowFunction::affine(std::vector<double>(t, 1.0)));
  }
  const auto traj = run_asymmetric(A, p);
  // u1 = 2 v0 + u0, v1 = 2 u1 + v0, u2 = 2 v1 + u1, v2 = 2 u2 + v0 + v1.
  const double u1 = 2.0 * 1.0 + 0.5;
  const double v1 = 2.0 * u1 + 1.0;
  const double u2 = 2.0 * v1 + u1;
  const double v2 = 2.0 * u2 + 1.0 + v1;
  EXPECT_DOUBLE_EQ(traj.u[1](0), u1);
  EXPECT_DOUBLE_EQ(traj.v[1](0), v1);
  EXPECT_DOUBLE_EQ(traj.u[2](0), u2);
  EXPECT_DOUBLE_EQ(traj.v[2](0), v2);
}

TEST(Dynamics, LeaveNothingOutIsBitIdentical) {
  const std::size_t n = 40, T = 4;
  const Eigen::MatrixXd A = sample_symmetric(EnsembleSpec::wigner(n), n, 7);
  const auto prog = build_tanh_amp(T, gaussian_vector(n, 8), constant_onsager(n, T, 0.3));
  const auto full = run_symmetric(A, prog);
  const auto loo = run_leave_k_out(A, prog, {});
  for (std::size_t t = 0; t <= T; ++t) EXPECT_EQ(full.z[t], loo.z[t]);
}

TEST(Dynamics, LeaveEverythingOutMatchesZeroMatrix) {
  const std::size_t n = 12, T = 3;
  const Eigen::MatrixXd A = sample_symmetric(EnsembleSpec::wigner(n), n, 9);
  const auto prog = build_tanh_amp(T, gaussian_vector(n, 10), constant_onsager(n, T, 0.5));
  std::set<std::size_t> all;
  for (std::size_t i = 0; i < n; ++i) all.insert(i);
  const auto loo = run_leave_k_out(A, prog, all);
  const auto zero = run_symmetric(Eigen::MatrixXd::Zero(n, n), prog);
  for (std::size_t t = 0; t <= T; ++t) EXPECT_EQ(loo.z[t], zero.z[t]);
}

TEST(Dynamics, LeaveOneOutMatchesZeroedMatrix) {
  const std::size_t n = 20, T = 3;
  Eigen::MatrixXd A = sample_symmetric(EnsembleSpec::wigner(n), n, 11);
  const auto prog = build_power_iteration(T, gaussian_vector(n, 12));
  const auto loo = run_leave_k_out(A, prog, {4});
  A.row(4).setZero();
  A.col(4).setZero();
  const auto ref = run_symmetric(A, prog);
  for (std::size_t t = 0; t <= T; ++t) EXPECT_LE((loo.z[t] - ref.z[t]).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_THROW(run_leave_k_out(A, prog, {n}), ValidationError);
}

TEST(Dynamics, AmpHandCheck) {
  Eigen::MatrixXd A(2, 2);
  A << 0.0, 1.0, 1.0, 0.5;
  Eigen::VectorXd z0(2);
  z0 << 1.0, -1.0;
  std::vector<RowFunction> Fr = {RowFunction::identity_last(1), RowFunction::identity_last(2)};
  CoefTable b(2);
  b.set(2, 1, Eigen::VectorXd::Constant(2, 0.25));
  const auto traj = run_amp_symmetric(A, Fr, b, z0);
  const Eigen::VectorXd z1 = A * z0;
  const Eigen::VectorXd z2 = A * z1 - 0.25 * z0;
  EXPECT_TRUE(traj.z[1].isApprox(z1));
  EXPECT_TRUE(traj.z[2].isApprox(z2));
}

TEST(Dynamics, AmpWithoutOnsagerIsAGfom) {
  const std::size_t n = 30, T = 4;
  const Eigen::MatrixXd A = sample_symmetric(EnsembleSpec::wigner(n), n, 13);
  const Eigen::VectorXd z0 = gaussian_vector(n, 14);
  std::vector<RowFunction> Fr;
  for (std::size_t t = 1; t <= T; ++t) Fr.push_back(RowFunction::tanh_last(t));
  CoefTable zero(T);
  for (std::size_t t = 2; t <= T; ++t) {
    for (std::size_t s = 1; s < t; ++s) zero.set(t, s, Eigen::VectorXd::Zero(n));
  }
  const auto amp = run_amp_symmetric(A, Fr, zero, z0);
  const auto tanh_gfom = run_symmetric(A, amp_as_gfom(Fr, zero, z0));
  for (std::size_t t = 1; t <= T; ++t) {
    EXPECT_LE((amp.z[t] - A * amp.z[t - 1].array().tanh().matrix()).cwiseAbs().maxCoeff(), 1e-14);
  }
  for (std::size_t t = 0; t <= T; ++t) {
    EXPECT_LE((amp.z[t] - tanh_gfom.z[t]).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Dynamics, AmpAsGfomMatchesAmpRun) {
  const std::size_t n = 30, T = 4;
  const Eigen::MatrixXd A = sample_symmetric(EnsembleSpec::wigner(n), n, 15);
  const Eigen::VectorXd z0 = gaussian_vector(n, 16);
  std::vector<RowFunction> Fr;
  for (std::size_t t = 1; t <= T; ++t) Fr.push_back(RowFunction::tanh_last(t));
  CoefTable b(T);
  for (std::size_t t = 2; t <= T; ++t) {
    for (std::size_t s = 1; s < t; ++s) b.set(t, s, gaussian_vector(n, 100 * t + s));
  }
  const auto amp = run_amp_symmetric(A, Fr, b, z0);
  const auto gfom = run_symmetric(A, amp_as_gfom(Fr, b, z0));
  for (std::size_t t = 0; t <= T; ++t) EXPECT_LE((amp.z[t] - gfom.z[t]).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Dynamics, CoordinateFreeProgramsArePermutationEquivariant) {
  const std::size_t n = 25, T = 4;
  const Eigen::MatrixXd A = sample_symmetric(EnsembleSpec::wigner(n), n, 17);
  const Eigen::VectorXd z0 = gaussian_vector(n, 18);
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::reverse(idx.begin(), idx.begin() + 10);
  std::swap(idx[3], idx[20]);
  Eigen::PermutationMatrix<Eigen::Dynamic> P(Eigen::Map<Eigen::VectorXi>(idx.data(), n));

  const auto prog = build_tanh_amp(T, z0, constant_onsager(n, T, 0.4));
  ASSERT_TRUE(prog.coordinate_free());
  auto permuted = prog;
  permuted.z0 = P * z0;
  const Eigen::MatrixXd PA = P * A * P.transpose();
  const auto a = run_symmetric(A, prog);
  const auto b = run_symmetric(PA, permuted);
  for (std::size_t t = 0; t <= T; ++t) {
    EXPECT_LE((P * a.z[t] - b.z[t]).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Dynamics, DivergenceIsReportedWithItsStep) {
  const std::size_t n = 4;
  const Eigen::MatrixXd A = 1e4 * Eigen::MatrixXd::Identity(n, n);
  try {
    run_symmetric(A, build_power_iteration(5, Eigen::VectorXd::Ones(n)));
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.step(), 4u);
  }
  Eigen::VectorXd z0 = Eigen::VectorXd::Ones(n);
  z0(1) = std::nan("");
  EXPECT_THROW(run_symmetric(Eigen::MatrixXd::Identity(n, n), build_power_iteration(1, z0)),
               DivergenceError);
}

TEST(Dynamics, ShapeMismatchIsAConfigError) {
  EXPECT_THROW(run_symmetric(Eigen::MatrixXd::Zero(3, 3),
                             build_power_iteration(1, Eigen::VectorXd::Ones(4))),
               ConfigError);
}

TEST(Dynamics, TrajectoryCsvLayout) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd z0(2);
  z0 << 0.1, 1.0 / 3.0;
  const auto traj = run_symmetric(A, build_power_iteration(1, z0));
  std::ostringstream os;
  write_trajectory_csv(os, traj);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "t,coordinate,value");
  std::vector<std::string> rows;
  while (std::getline(is, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[1], "0,1,0.33333333333333331");
  EXPECT_EQ(std::stod(rows[3].substr(4)), 1.0 / 3.0);
}

}  // namespace
}  // namespace gfom
