#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gfomlab/losses.hpp"
#include "gfomlab/prox.hpp"
#include "gfomlab/row_function.hpp"

namespace gfom {

// Triangular table of coefficient vectors c[t][s], t in [0, T], s in [0, t].
// Missing entries read as zero.
class CoefTable {
 public:
  CoefTable() = default;
  explicit CoefTable(std::size_t horizon);

  std::size_t horizon() const noexcept { return c_.empty() ? 0 : c_.size() - 1; }
  bool has(std::size_t t, std::size_t s) const noexcept {
    return t < c_.size() && s < c_[t].size() && c_[t][s].size() > 0;
  }
  const Eigen::VectorXd& at(std::size_t t, std::size_t s) const;
  double value(std::size_t t, std::size_t s, std::size_t row) const {
    return has(t, s) ? c_[t][s](static_cast<Eigen::Index>(row)) : 0.0;
  }
  void set(std::size_t t, std::size_t s, Eigen::VectorXd v);
  void resize(std::size_t horizon);

  bool operator==(const CoefTable& other) const;

 private:
  std::vector<std::vector<Eigen::VectorXd>> c_;
};

// z^{(t)} = A F_t(z^{(0..t-1)}) + G_t(z^{(0..t-1)}), t = 1..T.
// F[t-1] and G[t-1] hold F_t and G_t, each of arity t.
struct SymmetricProgram {
  std::size_t T = 0;
  std::vector<RowFunction> F;
  std::vector<RowFunction> G;
  Eigen::VectorXd z0;
  std::string name;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(z0.size()); }
  // Throws ConfigError on length or arity mismatch.
  void validate() const;
  // All F_t, G_t ignore the row index.
  bool coordinate_free() const;
};

// u^{(t)} = A F1_t(v^{(0..t-1)}) + G1_t(u^{(0..t-1)})
// v^{(t)} = A^T G2_t(u^{(0..t)}) + F2_t(v^{(0..t-1)})
// G2_t has arity t + 1 and sees the current u^{(t)}.
struct AsymmetricProgram {
  std::size_t T = 0;
  std::vector<RowFunction> F1, F2, G1, G2;
  Eigen::VectorXd u0, v0;
  std::string name;

  std::size_t m() const noexcept { return static_cast<std::size_t>(u0.size()); }
  std::size_t n() const noexcept { return static_cast<std::size_t>(v0.size()); }
  void validate() const;
  bool coordinate_free() const;
};

SymmetricProgram build_power_iteration(std::size_t T, Eigen::VectorXd z0);

// AMP iteration z^{(t)} = A Fr_t(z) - sum_{s<t} b[t][s] o Fr_s(z) written as a
// GFOM, with Fr[t-1] of arity t.
SymmetricProgram amp_as_gfom(const std::vector<RowFunction>& Fr, const CoefTable& onsager,
                             Eigen::VectorXd z0, std::string name = "amp");

// Symmetric AMP with Fr_t = tanh(z^{(t-1)}) and one Onsager term per step:
// G_t = -b_t o tanh(z^{(t-2)}) for t >= 2, where b_t = onsager[t-2].
SymmetricProgram build_tanh_amp(std::size_t T, Eigen::VectorXd z0,
                                const std::vector<Eigen::VectorXd>& onsager);

// Proximal gradient for the linear model Y = A mu0 + xi:
//   mu^{(t)} = prox(mu^{(t-1)} + eta A^T L'(Y - A mu^{(t-1)})).
// Tracks u^{(t)} = A(mu^{(t-1)} - mu0) and v^{(t)} with mu^{(t)} = prox(v^{(t)}).
struct PgdLinearParams {
  Loss loss = Loss::squared();
  ProxSpec prox;
  double eta = 0.1;
  Eigen::VectorXd mu0;
  Eigen::VectorXd xi;
  std::size_t T = 1;
  // Starting point mu^{(0)}; zero when empty.
  Eigen::VectorXd mu_init;
};
AsymmetricProgram build_pgd_linear(const PgdLinearParams& p);

// (Stochastic) gradient descent with ridge penalty and optional Polyak momentum:
//   mu^{(t)} = mu^{(t-1)} + eta (A^T[s_{t-1} o L'(Y - A mu^{(t-1)})] - lambda mu^{(t-1)})
//              + beta (mu^{(t-1)} - mu^{(t-2)}),   mu^{(0)} = mu^{(-1)} = 0.
// Tracks u^{(t)} = A v^{(t-1)} and v^{(t)} = mu^{(t)} - mu0.
struct GdParams {
  Loss loss = Loss::squared();
  double eta = 0.1;
  double lambda = 0.0;
  double beta = 0.0;
  Eigen::VectorXd mu0;
  Eigen::VectorXd xi;
  // masks[t-1] in {0,1}^m selects S_{t-1}; empty means the full sample.
  std::vector<Eigen::VectorXd> masks;
  std::size_t T = 1;
};
AsymmetricProgram build_gd(const GdParams& p);
AsymmetricProgram build_gd_ridge(const Loss& loss, double eta, double lambda,
                                 const Eigen::VectorXd& mu0, const Eigen::VectorXd& xi,
                                 const std::vector<Eigen::VectorXd>& masks, std::size_t T);

// Independent Bernoulli(p) masks, one per step, from a dedicated stream.
std::vector<Eigen::VectorXd> bernoulli_masks(std::size_t m, std::size_t T, double p,
                                             std::uint64_t seed);

// Smoothed indicator: the cubic smoothstep on [-1, 1] rescaled to [-sigma, sigma].
// sigma = 0 is the hard indicator 1{x >= 0}.
double mollifier(double x, double sigma);
double mollifier_d1(double x, double sigma);

// d/dx of the logistic loss L_sigma(x, y; xi) = rho(-c x), c = 2 phi_sigma(y + xi) - 1.
double logistic_d1(double x, double y, double xi, double sigma);
// Partials of logistic_d1 in x and in y.
double logistic_d1_dx(double x, double y, double xi, double sigma);
double logistic_d1_dy(double x, double y, double xi, double sigma);

// Smoothed logistic proximal gradient, mu^{(0)} = 0:
//   mu^{(t)} = prox(mu^{(t-1)} - eta sum_i A_i d1L_sigma(clamp(A_i^T mu^{(t-1)}), A_i^T mu0; xi_i)).
// Step 1 places A mu0 on the u-track; for t >= 2, u^{(t)} = A mu^{(t-2)} and
// mu^{(t-1)} = prox(v^{(t)}). The program horizon is T + 1.
struct LogisticParams {
  ProxSpec prox;
  double eta = 0.1;
  double sigma = 0.0;
  Eigen::VectorXd mu0;
  Eigen::VectorXd xi;
  // Clamp level for the first argument; 20 log n when unset.
  std::optional<double> clamp;
  std::size_t T = 1;
};
AsymmetricProgram build_logistic(const LogisticParams& p);

// Embeds an asymmetric program in dimension m + n with
// zeta^{(2t-1)} = (u^{(t)}, 0) and zeta^{(2t)} = (0, v^{(t)}), driven by
// embed_matrix(A) = [[0, A], [A^T, 0]].
SymmetricProgram symmetrize(const AsymmetricProgram& prog);
Eigen::MatrixXd embed_matrix(const Eigen::MatrixXd& A);

struct ProgramInfo {
  std::string key;
  std::string kind;  // "symmetric" or "asymmetric"
  std::string summary;
};
const std::vector<ProgramInfo>& program_registry();

}  // namespace gfom
