#include "gfomlab/dynamics.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "gfomlab/error.hpp"

namespace gfom {

namespace {

using Clock = std::chrono::steady_clock;

// Evaluates a row-separate map on the leading `arity` iterates of `hist`.
Eigen::VectorXd apply_rows(const RowFunction& f, const std::vector<Eigen::VectorXd>& hist,
                           Eigen::Index rows) {
  if (f.is_zero()) return Eigen::VectorXd::Zero(rows);
  const std::size_t a = f.arity();
  Eigen::VectorXd out(rows);
  std::vector<double> buf(a);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (std::size_t w = 0; w < a; ++w) buf[w] = hist[w](i);
    out(i) = f(static_cast<std::size_t>(i), buf);
  }
  return out;
}

void check_finite(const Eigen::VectorXd& x, std::size_t t, const char* track) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x(i);
    if (!std::isfinite(v) || std::abs(v) > kDivergenceThreshold) {
      std::ostringstream os;
      os << "iterate " << track << " diverged at t=" << t << " (coordinate " << i
         << ", value " << v << ")";
      throw DivergenceError(t, os.str());
    }
  }
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

Trajectory run_symmetric(const Eigen::MatrixXd& A, const SymmetricProgram& prog) {
  prog.validate();
  const Eigen::Index n = prog.z0.size();
  if (A.rows() != n || A.cols() != n) throw ConfigError("run_symmetric: A and z0 disagree");
  Trajectory traj;
  traj.z.push_back(prog.z0);
  check_finite(prog.z0, 0, "z");
  for (std::size_t t = 1; t <= prog.T; ++t) {
    const auto start = Clock::now();
    Eigen::VectorXd next = apply_rows(prog.G[t - 1], traj.z, n);
    if (!prog.F[t - 1].is_zero()) next.noalias() += A * apply_rows(prog.F[t - 1], traj.z, n);
    check_finite(next, t, "z");
    traj.z.push_back(std::move(next));
    traj.step_seconds.push_back(seconds_since(start));
  }
  return traj;
}

Trajectory run_asymmetric(const Eigen::MatrixXd& A, const AsymmetricProgram& prog) {
  prog.validate();
  const Eigen::Index m = prog.u0.size();
  const Eigen::Index n = prog.v0.size();
  if (A.rows() != m || A.cols() != n) throw ConfigError("run_asymmetric: A is not m x n");
  Trajectory traj;
  traj.u.push_back(prog.u0);
  traj.v.push_back(prog.v0);
  for (std::size_t t = 1; t <= prog.T; ++t) {
    const auto start = Clock::now();
    Eigen::VectorXd u = apply_rows(prog.G1[t - 1], traj.u, m);
    if (!prog.F1[t - 1].is_zero()) u.noalias() += A * apply_rows(prog.F1[t - 1], traj.v, n);
    check_finite(u, t, "u");
    traj.u.push_back(std::move(u));
    Eigen::VectorXd v = apply_rows(prog.F2[t - 1], traj.v, n);
    if (!prog.G2[t - 1].is_zero()) {
      v.noalias() += A.transpose() * apply_rows(prog.G2[t - 1], traj.u, m);
    }
    check_finite(v, t, "v");
    traj.v.push_back(std::move(v));
    traj.step_seconds.push_back(seconds_since(start));
  }
  return traj;
}

Trajectory run_leave_k_out(const Eigen::MatrixXd& A, const SymmetricProgram& prog,
                           const std::set<std::size_t>& P) {
  const auto n = static_cast<std::size_t>(A.rows());
  if (P.empty()) return run_symmetric(A, prog);
  Eigen::MatrixXd loo = A;
  for (std::size_t k : P) {
    if (k >= n) throw ValidationError("leave-k-out index out of range");
    loo.row(static_cast<Eigen::Index>(k)).setZero();
    loo.col(static_cast<Eigen::Index>(k)).setZero();
  }
  return run_symmetric(loo, prog);
}

Trajectory run_amp_symmetric(const Eigen::MatrixXd& A, const std::vector<RowFunction>& Fr,
                             const CoefTable& b, const Eigen::VectorXd& z0) {
  const Eigen::Index n = z0.size();
  if (A.rows() != n || A.cols() != n) throw ConfigError("run_amp_symmetric: shape mismatch");
  const std::size_t T = Fr.size();
  for (std::size_t t = 1; t <= T; ++t) {
    if (Fr[t - 1].arity() != t) throw ConfigError("run_amp_symmetric: Fr_t must have arity t");
    for (std::size_t s = 1; s < t; ++s) {
      if (!b.has(t, s)) {
        std::ostringstream os;
        os << "run_amp_symmetric: missing Onsager coefficient b[" << t << "][" << s << "]";
        throw ConfigError(os.str());
      }
      if (b.at(t, s).size() != n) throw ConfigError("run_amp_symmetric: coefficient length");
    }
  }
  Trajectory traj;
  traj.z.push_back(z0);
  // Fr_s(zeta^{(0..s-1)}) is reused by every later correction.
  std::vector<Eigen::VectorXd> fr_vals;
  for (std::size_t t = 1; t <= T; ++t) {
    const auto start = Clock::now();
    fr_vals.push_back(apply_rows(Fr[t - 1], traj.z, n));
    Eigen::VectorXd next = A * fr_vals.back();
    for (std::size_t s = 1; s < t; ++s) next -= b.at(t, s).cwiseProduct(fr_vals[s - 1]);
    check_finite(next, t, "z");
    traj.z.push_back(std::move(next));
    traj.step_seconds.push_back(seconds_since(start));
  }
  return traj;
}

Trajectory run_amp_asymmetric(const Eigen::MatrixXd& A, const std::vector<RowFunction>& Fr,
                              const std::vector<RowFunction>& Gr, const CoefTable& bF,
                              const CoefTable& bG, const Eigen::VectorXd& u0,
                              const Eigen::VectorXd& v0) {
  const Eigen::Index m = u0.size();
  const Eigen::Index n = v0.size();
  if (A.rows() != m || A.cols() != n) throw ConfigError("run_amp_asymmetric: shape mismatch");
  const std::size_t T = Fr.size();
  if (Gr.size() != T) throw ConfigError("run_amp_asymmetric: Fr and Gr lengths differ");
  for (std::size_t t = 1; t <= T; ++t) {
    if (Fr[t - 1].arity() != t || Gr[t - 1].arity() != t + 1) {
      throw ConfigError("run_amp_asymmetric: arity mismatch");
    }
    for (std::size_t s = 1; s < t; ++s) {
      if (!bF.has(t, s)) throw ConfigError("run_amp_asymmetric: missing F-side Onsager term");
    }
    for (std::size_t s = 1; s <= t; ++s) {
      if (!bG.has(t, s)) throw ConfigError("run_amp_asymmetric: missing G-side Onsager term");
    }
  }
  Trajectory traj;
  traj.u.push_back(u0);
  traj.v.push_back(v0);
  std::vector<Eigen::VectorXd> f_vals, g_vals;
  for (std::size_t t = 1; t <= T; ++t) {
    const auto start = Clock::now();
    f_vals.push_back(apply_rows(Fr[t - 1], traj.v, n));
    Eigen::VectorXd u = A * f_vals.back();
    for (std::size_t s = 1; s < t; ++s) u -= bF.at(t, s).cwiseProduct(g_vals[s - 1]);
    check_finite(u, t, "u");
    traj.u.push_back(std::move(u));
    g_vals.push_back(apply_rows(Gr[t - 1], traj.u, m));
    Eigen::VectorXd v = A.transpose() * g_vals.back();
    for (std::size_t s = 1; s <= t; ++s) v -= bG.at(t, s).cwiseProduct(f_vals[s - 1]);
    check_finite(v, t, "v");
    traj.v.push_back(std::move(v));
    traj.step_seconds.push_back(seconds_since(start));
  }
  return traj;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const auto old = os.precision(17);
  if (traj.symmetric()) {
    os << "t,coordinate,value\n";
    for (std::size_t t = 0; t < traj.z.size(); ++t) {
      for (Eigen::Index i = 0; i < traj.z[t].size(); ++i) {
        os << t << ',' << i << ',' << traj.z[t](i) << '\n';
      }
    }
  } else {
    os << "track,t,coordinate,value\n";
    for (std::size_t t = 0; t < traj.u.size(); ++t) {
      for (Eigen::Index i = 0; i < traj.u[t].size(); ++i) {
        os << "u," << t << ',' << i << ',' << traj.u[t](i) << '\n';
      }
    }
    for (std::size_t t = 0; t < traj.v.size(); ++t) {
      for (Eigen::Index i = 0; i < traj.v[t].size(); ++i) {
        os << "v," << t << ',' << i << ',' << traj.v[t](i) << '\n';
      }
    }
  }
  os.precision(old);
}

}  // namespace gfom
