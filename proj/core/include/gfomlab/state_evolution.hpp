#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "gfomlab/ensembles.hpp"
#include "gfomlab/programs.hpp"
#include "gfomlab/row_function.hpp"

namespace gfom {

// Per-coordinate covariances Cov(X_k^{(t)}, X_k^{(s)}) over t, s in [1, T]
// plus the deterministic row X^{(0)}. A homogeneous table stores one matrix.
struct GaussianLawTable {
  bool homogeneous = false;
  Eigen::VectorXd init;
  std::vector<Eigen::MatrixXd> cov;

  std::size_t rows() const noexcept { return static_cast<std::size_t>(init.size()); }
  std::size_t horizon() const noexcept {
    return cov.empty() ? 0 : static_cast<std::size_t>(cov.front().rows());
  }
  const Eigen::MatrixXd& at(std::size_t k) const { return homogeneous ? cov.front() : cov.at(k); }
};

// Row-separate composite map of the state evolution, evaluated row by row:
//   w^{(0)} = x^{(0)},
//   w^{(tau)} = x^{(tau)} + sum_{s=1}^{U(tau)} c[tau][s] o H_s(w) + K_tau(w^{(0..tau-1)}),
// where U(tau) = tau - 1 for theta and phi and tau for xi. H_s reads
// w^{(0..s-1)} (theta, xi) or w^{(0..s)} (phi). The identity kind has no terms.
// Columns below t never depend on the coefficients of step t.
class CompositeMap {
 public:
  enum class Kind { identity, theta, phi, xi };

  CompositeMap() = default;
  CompositeMap(Kind kind, std::vector<RowFunction> H, std::vector<RowFunction> K);

  Kind kind() const noexcept { return kind_; }
  // Largest t for which coefficients have been installed.
  std::size_t horizon() const noexcept { return horizon_; }
  const CoefTable& coefficients() const noexcept { return coef_; }
  // Installs the coefficients of step t (entries s = 1..U(t)) and extends the horizon.
  void install(std::size_t t, const std::vector<Eigen::VectorXd>& coef_by_s);

  // w[0..t] from x[0..t] for one row; requires t <= horizon().
  void eval(std::size_t row, std::span<const double> x, std::size_t t, std::span<double> w) const;
  // Also fills jac (row-major (t+1) x (t+1)) with d w^{(tau)} / d x^{(s)}.
  void eval_jacobian(std::size_t row, std::span<const double> x, std::size_t t,
                     std::span<double> w, std::span<double> jac) const;
  // Applies the map to whole columns x^{(0..t)} and returns w^{(0..t)}.
  std::vector<Eigen::VectorXd> apply(const std::vector<Eigen::VectorXd>& x, std::size_t t) const;

 private:
  Kind kind_ = Kind::identity;
  std::vector<RowFunction> H_, K_;
  CoefTable coef_;
  std::size_t horizon_ = 0;

  std::size_t upper(std::size_t tau) const noexcept {
    return kind_ == Kind::xi ? tau : (tau == 0 ? 0 : tau - 1);
  }
  std::size_t h_arity(std::size_t s) const noexcept { return kind_ == Kind::phi ? s + 1 : s; }
};

// Output of a state-evolution computation. Symmetric records fill the z-side
// fields; asymmetric records fill the u/v-side fields.
struct SeRecord {
  bool symmetric = true;
  bool amp = false;        // AMP state evolution (identity maps)
  // One representative coordinate evaluated and broadcast (z side, u side, v side).
  bool fast_path = false;
  bool fast_u = false;
  bool fast_v = false;
  std::size_t T = 0;
  std::size_t mc_samples = 0;
  std::uint64_t seed = 0;

  GaussianLawTable law_z, law_z_se;
  CompositeMap theta;
  CoefTable b, b_se;  // b[t][s], s in [1, t-1]

  GaussianLawTable law_u, law_u_se, law_v, law_v_se;
  CompositeMap phi, xi;
  CoefTable f, f_se;  // f[t][s] = coefficient f_s^{(t-1)}, s in [1, t-1]
  CoefTable g, g_se;  // g[t][s], s in [1, t]
};

struct SeOptions {
  std::size_t mc_samples = 20000;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  // Disables the single-representative shortcut even when it applies.
  bool force_per_coordinate = false;
};

// profile holds the post-normalization second moments E A_{kl}^2.
SeRecord se_symmetric(const SymmetricProgram& prog, const VarianceProfile& profile,
                      std::size_t T, const SeOptions& opt = {});
SeRecord se_asymmetric(const AsymmetricProgram& prog, const VarianceProfile& profile,
                       std::size_t T, const SeOptions& opt = {});
// Onsager table b^{Fr_t}_s and law of the AMP iterate.
SeRecord amp_se_symmetric(const std::vector<RowFunction>& Fr, const VarianceProfile& profile,
                          const Eigen::VectorXd& z0, std::size_t T, const SeOptions& opt = {});
// Gr[t-1] has arity t + 1. Fills f (F-side Onsager) and g (G-side Onsager).
SeRecord amp_se_asymmetric(const std::vector<RowFunction>& Fr, const std::vector<RowFunction>& Gr,
                           const VarianceProfile& profile, const Eigen::VectorXd& u0,
                           const Eigen::VectorXd& v0, std::size_t T, const SeOptions& opt = {});

// Onsager coefficients for build_tanh_amp: entry t-2 is b^{(t)}_{t-1}, t = 2..T.
std::vector<Eigen::VectorXd> tanh_amp_onsager(const VarianceProfile& profile,
                                              const Eigen::VectorXd& z0, std::size_t T,
                                              const SeOptions& opt = {});

// AMP induced by a GFOM: Fr_t = F_t o Theta_{t-1} with Onsager table b.
struct InducedAmp {
  std::vector<RowFunction> Fr;
  CoefTable onsager;
  CompositeMap theta;
};
struct InducedAmpAsym {
  std::vector<RowFunction> Fr, Gr;
  CoefTable bF, bG;
  CompositeMap phi, xi;
};
InducedAmp gfom_to_amp(const SymmetricProgram& prog, const SeRecord& se);
InducedAmpAsym gfom_to_amp(const AsymmetricProgram& prog, const SeRecord& se);

struct Prediction {
  std::vector<std::size_t> coordinates;
  Eigen::VectorXd mean;
  Eigen::VectorXd se;
};

enum class Track { z, u, v };

// E psi(w_k^{(t)}) for k in coords, from n_paths fresh Gaussian paths pushed
// through the composite map of `track`.
Prediction predict_entrywise(const SeRecord& se, Track track, std::size_t t,
                             const std::vector<std::size_t>& coords,
                             const std::function<double(double)>& psi, std::size_t n_paths,
                             std::uint64_t seed);
// (1/rows) sum_k E psi(w_k^{(t)}), stratified over coordinates.
struct AveragedPrediction {
  double mean = 0.0;
  double se = 0.0;
};
AveragedPrediction predict_averaged(const SeRecord& se, Track track, std::size_t t,
                                    const std::function<double(double)>& psi,
                                    std::size_t n_paths, std::uint64_t seed);

nlohmann::json to_json(const SeRecord& se);

}  // namespace gfom
