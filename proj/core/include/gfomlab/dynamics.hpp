#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gfomlab/programs.hpp"

namespace gfom {

// Iterates of one run. Symmetric runs fill `z`; asymmetric runs fill `u`, `v`.
// Index 0 holds the initialization.
struct Trajectory {
  std::vector<Eigen::VectorXd> z;
  std::vector<Eigen::VectorXd> u;
  std::vector<Eigen::VectorXd> v;
  std::vector<double> step_seconds;
  std::optional<std::uint64_t> seed;

  bool symmetric() const noexcept { return !z.empty(); }
  std::size_t steps() const noexcept {
    return symmetric() ? z.size() - 1 : (u.empty() ? 0 : u.size() - 1);
  }
};

// Any |iterate| above this aborts with DivergenceError.
inline constexpr double kDivergenceThreshold = 1e12;

Trajectory run_symmetric(const Eigen::MatrixXd& A, const SymmetricProgram& prog);
Trajectory run_asymmetric(const Eigen::MatrixXd& A, const AsymmetricProgram& prog);

// Runs with A_{[-P]}: rows and columns indexed by P set to zero.
Trajectory run_leave_k_out(const Eigen::MatrixXd& A, const SymmetricProgram& prog,
                           const std::set<std::size_t>& P);

// zeta^{(t)} = A Fr_t(zeta) - sum_{s in [1, t-1]} b[t][s] o Fr_s(zeta).
Trajectory run_amp_symmetric(const Eigen::MatrixXd& A, const std::vector<RowFunction>& Fr,
                             const CoefTable& b, const Eigen::VectorXd& z0);

// u^{(t)} = A Fr_t(v) - sum_{s in [1, t-1]} bF[t][s] o Gr_s(u^{(0..s)})
// v^{(t)} = A^T Gr_t(u) - sum_{s in [1, t]} bG[t][s] o Fr_s(v^{(0..s-1)})
// Fr[t-1] has arity t, Gr[t-1] has arity t + 1.
Trajectory run_amp_asymmetric(const Eigen::MatrixXd& A, const std::vector<RowFunction>& Fr,
                              const std::vector<RowFunction>& Gr, const CoefTable& bF,
                              const CoefTable& bG, const Eigen::VectorXd& u0,
                              const Eigen::VectorXd& v0);

// Long-format CSV with header "t,coordinate,value" (symmetric) or
// "track,t,coordinate,value" (asymmetric); 17 significant digits.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

}  // namespace gfom
