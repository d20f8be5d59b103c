#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "gfomlab/ensembles.hpp"
#include "gfomlab/losses.hpp"
#include "gfomlab/programs.hpp"

namespace gfom {

// Inputs of the gradient-descent state evolution. The profile holds the
// post-normalization second moments E A_{kl}^2 (m x n).
struct GdSeProblem {
  Loss loss = Loss::squared();
  double eta = 0.1;
  double lambda = 0.0;
  Eigen::VectorXd mu0;  // length n
  Eigen::VectorXd xi;   // length m
  // masks[t-1] in {0,1}^m selects S_{t-1}; empty means the full sample.
  std::vector<Eigen::VectorXd> masks;
  VarianceProfile profile;
  std::size_t T = 1;

  std::size_t m() const noexcept { return static_cast<std::size_t>(xi.size()); }
  std::size_t n() const noexcept { return static_cast<std::size_t>(mu0.size()); }
  double mask(std::size_t step, std::size_t k) const {
    return masks.empty() ? 1.0 : masks.at(step)(static_cast<Eigen::Index>(k));
  }
};

struct GdSeOptions {
  std::size_t mc_samples = 20000;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  // Independent recursions of mc_samples / batches paths used for standard errors.
  std::size_t batches = 8;
};

// State of the recursion. In the homogeneous form there is a single k-law and
// a single l-law, the k-expectations are pooled over k = j mod m and
// sum_k E A_{kl}^2 (.) becomes phi * (.).
struct GdSeState {
  GdSeProblem problem;
  bool homogeneous = false;
  double phi = 0.0;         // m / n
  double mu0_norm2 = 0.0;   // ||mu0||^2, used by the homogeneous form
  std::size_t T = 0;

  std::vector<Eigen::MatrixXd> M;        // per l, (T+1) x (T+1); M(r, t)
  std::vector<Eigen::MatrixXd> sigma_v;  // per l, (T+1) x (T+1)
  std::vector<Eigen::MatrixXd> sigma_u;  // per k (one when shared), T x T at (t-1, s-1)
  CoefTable f;  // f[t][s] = f_s^{(t-1)}, s in [1, t-1], one entry per k-law
  CoefTable g;  // g[t][s], s in [1, t], one entry per l-law

  std::size_t mc_samples = 0;
  std::uint64_t seed = 0;
  std::size_t batches = 0;
  Eigen::MatrixXd b_se;       // (T+1) x (#l)
  Eigen::MatrixXd sigma2_se;  // (T+1) x (#l)

  std::size_t l_count() const noexcept { return M.size(); }
  std::size_t k_rows() const noexcept;
  const Eigen::MatrixXd& M_at(std::size_t l) const { return M.size() == 1 ? M.front() : M.at(l); }
  const Eigen::MatrixXd& sigma_v_at(std::size_t l) const {
    return sigma_v.size() == 1 ? sigma_v.front() : sigma_v.at(l);
  }
  const Eigen::MatrixXd& sigma_u_at(std::size_t k) const {
    return sigma_u.size() == 1 ? sigma_u.front() : sigma_u.at(k);
  }
};

GdSeState gd_se(const GdSeProblem& problem, const GdSeOptions& opt = {});

// Scalar recursion with E A^2 = 1/n, full-sample masks, n = m / phi.
GdSeState gd_se_homogeneous(const Loss& loss, double eta, double lambda, double mu0_norm2,
                            const Eigen::VectorXd& xi, double phi, std::size_t T,
                            const GdSeOptions& opt = {});

struct GdLaw {
  Eigen::VectorXd b;       // b_GD per l
  Eigen::VectorXd sigma2;  // sigma^2_GD per l
  Eigen::VectorXd b_se;
  Eigen::VectorXd sigma2_se;
};
GdLaw gd_key_params(const GdSeState& state, std::size_t t);

// Normal(b mu0_l, sigma^2) for mu^{(t)}_l - mu0_l, plus the weights M(s, t), s in [0, t].
struct GdEntryLaw {
  double mean = 0.0;
  double variance = 0.0;
  double b = 0.0;
  Eigen::VectorXd weights;
};
GdEntryLaw gd_entrywise_law(const GdSeState& state, std::size_t l, std::size_t t);

// W^{(r)} = L''_{r-1}(xi - Phi_r) along freshly sampled U paths, r = 1..t,
// using the state's Sigma^U and f tables.
struct GdPathCache {
  std::size_t t = 0;
  std::size_t rows = 0;
  std::size_t samples = 0;
  bool pooled = false;
  std::vector<double> W;  // index ((row * samples + j) * t + r - 1)

  double w(std::size_t row, std::size_t j, std::size_t r) const {
    return W[(row * samples + j) * t + r - 1];
  }
};
GdPathCache gd_sample_paths(const GdSeState& state, std::size_t t, std::size_t samples,
                            std::uint64_t seed);

// g_s^{(t)} from the explicit sum over chains t > r_1 > ... > r_tau > s.
// Throws ConfigError when t - s > 8.
Eigen::VectorXd g_coefficient_nested_sum(const GdSeState& state, std::size_t s, std::size_t t,
                                         const GdPathCache& paths);
// Same coefficient through D_s^{(t)} = delta_{st} - eta sum_{r=s}^{t-1} f_r^{(t-1)} W^{(r)} D_s^{(r)}.
Eigen::VectorXd g_coefficient_recursive(const GdSeState& state, std::size_t s, std::size_t t,
                                        const GdPathCache& paths);

nlohmann::json to_json(const GdSeState& state);
// Columns l, t, b, sigma2 for t = 0..T.
void write_gd_law_csv(const GdSeState& state, std::ostream& out);

}  // namespace gfom
