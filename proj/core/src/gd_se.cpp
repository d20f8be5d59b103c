#include "gfomlab/gd_se.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "gfomlab/error.hpp"
#include "gfomlab/gaussian_paths.hpp"
#include "gfomlab/parallel.hpp"
#include "gfomlab/rng.hpp"

namespace gfom {

std::size_t GdSeState::k_rows() const noexcept { return homogeneous ? 1 : problem.m(); }

namespace {

constexpr std::size_t kPooledBlocks = 8;
constexpr double kVarianceTol = 1e-10;

// sum_l E A_{kl}^2 x_l.
Eigen::VectorXd agg_to_k(const GdSeState& st, const Eigen::VectorXd& x) {
  return st.homogeneous ? x : st.problem.profile.apply(x);
}

// sum_k E A_{kl}^2 x_k.
Eigen::VectorXd agg_to_l(const GdSeState& st, const Eigen::VectorXd& x) {
  return st.homogeneous ? Eigen::VectorXd(st.phi * x) : st.problem.profile.apply_transpose(x);
}

struct PathBuf {
  std::vector<double> u, lp, w;
};

// Phi_r, L'_{r-1}(xi - Phi_r) and L''_{r-1}(xi - Phi_r) for r = 1..t along one U path.
void gd_path(const GdSeState& st, std::size_t krow, double xi, std::size_t mask_row,
             bool full_mask, const PathFactor& L, const double* z, std::size_t t, PathBuf& b) {
  b.u.assign(t + 1, 0.0);
  b.lp.assign(t + 1, 0.0);
  b.w.assign(t + 1, 0.0);
  L.transform(z, b.u.data() + 1);
  const double eta = st.problem.eta;
  for (std::size_t r = 1; r <= t; ++r) {
    double phi = b.u[r];
    for (std::size_t s = 1; s < r; ++s) phi += eta * st.f.value(r, s, krow) * b.lp[s];
    const double mask = full_mask ? 1.0 : st.problem.mask(r - 1, mask_row);
    const double res = xi - phi;
    b.lp[r] = mask == 0.0 ? 0.0 : mask * st.problem.loss.d1(res);
    b.w[r] = mask == 0.0 ? 0.0 : mask * st.problem.loss.d2(res);
  }
}

// D_s^{(t)} for s = 1..t; D is (t+1) x (t+1) with D[s * (t+1) + tau] = D_s^{(tau)}.
void d_recursion(const GdSeState& st, std::size_t krow, const std::vector<double>& w,
                 std::size_t t, std::vector<double>& D) {
  const std::size_t n = t + 1;
  D.assign(n * n, 0.0);
  const double eta = st.problem.eta;
  for (std::size_t s = 1; s <= t; ++s) {
    D[s * n + s] = 1.0;
    for (std::size_t tau = s + 1; tau <= t; ++tau) {
      double acc = 0.0;
      for (std::size_t r = s; r < tau; ++r) acc += st.f.value(tau, r, krow) * w[r] * D[s * n + r];
      D[s * n + tau] = -eta * acc;
    }
  }
}

double xi_for(const GdSeState& st, std::size_t krow, std::size_t j) {
  const std::size_t m = st.problem.m();
  const std::size_t k = st.homogeneous ? j % m : krow;
  return st.problem.xi(static_cast<Eigen::Index>(k));
}

// Appends row t of every Sigma^U_k and extends the Cholesky factors.
void step_sigma_u(GdSeState& st, std::size_t t, std::vector<PathFactor>& factors) {
  const std::size_t L = st.l_count();
  const auto ti = static_cast<Eigen::Index>(t);
  std::vector<Eigen::VectorXd> row(t + 1);
  for (std::size_t s = 1; s <= t; ++s) {
    Eigen::VectorXd q(static_cast<Eigen::Index>(L));
    for (std::size_t l = 0; l < L; ++l) {
      const Eigen::MatrixXd& M = st.M_at(l);
      const Eigen::MatrixXd& S = st.sigma_v_at(l);
      const Eigen::Index a = ti - 1, b = static_cast<Eigen::Index>(s) - 1;
      // Columns t-1 and s-1 of M are supported on rows [0, t-1].
      q(static_cast<Eigen::Index>(l)) =
          M.col(a).head(ti).dot(S.topLeftCorner(ti, ti) * M.col(b).head(ti));
    }
    row[s] = agg_to_k(st, q);
  }
  for (std::size_t k = 0; k < st.sigma_u.size(); ++k) {
    Eigen::MatrixXd& C = st.sigma_u[k];
    const auto kk = static_cast<Eigen::Index>(k);
    for (std::size_t s = 1; s <= t; ++s) {
      C(ti - 1, static_cast<Eigen::Index>(s) - 1) = C(static_cast<Eigen::Index>(s) - 1, ti - 1) =
          row[s](kk);
    }
    std::ostringstream ctx;
    ctx << "Sigma^U coordinate " << k << ", iteration " << t;
    checked_covariance(C.topLeftCorner(ti, ti), ctx.str());
    factors[k].append(C.row(ti - 1).head(ti).transpose());
  }
}

// Monte Carlo part of step t: per-row means of W^{(t)} D_s^{(t)} and L'^{(t)} L'^{(s)}.
void step_expectations(const GdSeState& st, std::size_t t, const MomentMatchedNormals& X,
                       const std::vector<PathFactor>& factors, std::size_t threads,
                       Eigen::MatrixXd& wd, Eigen::MatrixXd& pp) {
  const std::size_t rows = st.k_rows();
  const std::size_t mc = X.samples();
  const auto T1 = static_cast<Eigen::Index>(t);
  wd = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), T1);
  pp = wd;
  const bool full_mask = st.homogeneous || st.problem.masks.empty();

  auto sweep = [&](std::size_t krow, std::size_t j0, std::size_t j1, Eigen::VectorXd& swd,
                   Eigen::VectorXd& spp) {
    PathBuf b;
    std::vector<double> z(std::max<std::size_t>(X.dims(), 1)), D;
    const PathFactor& L = factors.size() == 1 ? factors.front() : factors[krow];
    for (std::size_t j = j0; j < j1; ++j) {
      for (std::size_t d = 0; d < X.dims(); ++d) z[d] = X(j, d);
      gd_path(st, krow, xi_for(st, krow, j), krow, full_mask, L, z.data(), t, b);
      d_recursion(st, krow, b.w, t, D);
      for (std::size_t s = 1; s <= t; ++s) {
        swd(static_cast<Eigen::Index>(s) - 1) += b.w[t] * D[s * (t + 1) + t];
        spp(static_cast<Eigen::Index>(s) - 1) += b.lp[t] * b.lp[s];
      }
    }
  };

  if (st.homogeneous) {
    std::vector<Eigen::VectorXd> bw(kPooledBlocks, Eigen::VectorXd::Zero(T1)), bp = bw;
    const std::size_t per = (mc + kPooledBlocks - 1) / kPooledBlocks;
    parallel_for(
        kPooledBlocks,
        [&](std::size_t blk) {
          const std::size_t j0 = std::min(mc, blk * per);
          sweep(0, j0, std::min(mc, j0 + per), bw[blk], bp[blk]);
        },
        threads);
    for (std::size_t blk = 0; blk < kPooledBlocks; ++blk) {
      wd.row(0) += bw[blk].transpose();
      pp.row(0) += bp[blk].transpose();
    }
  } else {
    parallel_for(
        rows,
        [&](std::size_t k) {
          Eigen::VectorXd a = Eigen::VectorXd::Zero(T1), c = a;
          sweep(k, 0, mc, a, c);
          wd.row(static_cast<Eigen::Index>(k)) = a.transpose();
          pp.row(static_cast<Eigen::Index>(k)) = c.transpose();
        },
        threads);
  }
  wd /= static_cast<double>(mc);
  pp /= static_cast<double>(mc);
}

// Runs the four-step recursion on `st` (whose problem and mode are set) with mc paths.
void run_recursion(GdSeState& st, std::size_t mc, std::uint64_t seed, std::size_t threads) {
  const std::size_t T = st.T;
  const std::size_t L = st.homogeneous ? 1 : st.problem.n();
  const auto T1 = static_cast<Eigen::Index>(T + 1);
  const double eta = st.problem.eta;
  const double lambda = st.problem.lambda;

  st.M.assign(L, Eigen::MatrixXd::Zero(T1, T1));
  st.sigma_v.assign(L, Eigen::MatrixXd::Zero(T1, T1));
  for (std::size_t l = 0; l < L; ++l) {
    st.M[l](0, 0) = 1.0;
    const double mu = st.homogeneous ? 0.0 : st.problem.mu0(static_cast<Eigen::Index>(l));
    st.sigma_v[l](0, 0) =
        st.homogeneous ? st.mu0_norm2 / (static_cast<double>(st.problem.m()) / st.phi) : mu * mu;
  }
  const bool shared_u = st.homogeneous || st.problem.profile.is_constant();
  const std::size_t urows = shared_u ? 1 : st.problem.m();
  st.sigma_u.assign(urows, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(T),
                                                 static_cast<Eigen::Index>(T)));
  st.f = CoefTable(T);
  st.g = CoefTable(T);
  st.mc_samples = mc;
  if (T == 0) return;

  const MomentMatchedNormals X(mc, T, seed);
  st.mc_samples = X.samples();
  std::vector<PathFactor> factors(urows);

  for (std::size_t t = 1; t <= T; ++t) {
    // (1) Sigma^U row t.
    step_sigma_u(st, t, factors);
    // (2) f_s^{(t-1)}, s in [1, t-1].
    for (std::size_t s = 1; s < t; ++s) {
      Eigen::VectorXd col(static_cast<Eigen::Index>(L));
      for (std::size_t l = 0; l < L; ++l) {
        col(static_cast<Eigen::Index>(l)) =
            st.M_at(l)(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t) - 1);
      }
      Eigen::VectorXd fk = agg_to_k(st, col);
      if (shared_u && !st.homogeneous) fk = Eigen::VectorXd::Constant(fk.size(), fk(0));
      st.f.set(t, s, std::move(fk));
    }
    // (3) g_s^{(t)} and the M update; (4) Sigma^V row t.
    Eigen::MatrixXd wd, pp;
    step_expectations(st, t, X, factors, threads, wd, pp);
    for (std::size_t s = 1; s <= t; ++s) {
      const auto si = static_cast<Eigen::Index>(s) - 1;
      st.g.set(t, s, Eigen::VectorXd(-eta * agg_to_l(st, wd.col(si))));
    }
    std::vector<Eigen::VectorXd> sv(t + 1);
    for (std::size_t s = 1; s <= t; ++s) {
      sv[s] = eta * eta * agg_to_l(st, pp.col(static_cast<Eigen::Index>(s) - 1));
    }
    const auto ti = static_cast<Eigen::Index>(t);
    for (std::size_t l = 0; l < L; ++l) {
      const auto li = static_cast<Eigen::Index>(l);
      Eigen::MatrixXd& M = st.M[l];
      for (Eigen::Index r = 0; r < ti; ++r) {
        double acc = (r == 0 ? eta * lambda : 0.0) + (1.0 - eta * lambda) * M(r, ti - 1);
        for (Eigen::Index s = r + 1; s <= ti; ++s) {
          acc += st.g.at(t, static_cast<std::size_t>(s))(li) * M(r, s - 1);
        }
        M(r, ti) = acc;
      }
      M(ti, ti) = 1.0;
      Eigen::MatrixXd& S = st.sigma_v[l];
      S(ti, 0) = S(0, ti) = 0.0;
      for (std::size_t s = 1; s <= t; ++s) {
        const auto si = static_cast<Eigen::Index>(s);
        S(ti, si) = S(si, ti) = sv[s](li);
      }
    }
  }
}

std::pair<double, double> key_params_at(const GdSeState& st, std::size_t l, std::size_t t) {
  const Eigen::MatrixXd& M = st.M_at(l);
  const Eigen::MatrixXd& S = st.sigma_v_at(l);
  const auto ti = static_cast<Eigen::Index>(t);
  const double b = -M(0, ti);
  if (t == 0) return {b, 0.0};
  const Eigen::VectorXd w = M.col(ti).segment(1, ti);
  double sigma2 = w.dot(S.block(1, 1, ti, ti) * w);
  if (sigma2 < -kVarianceTol) {
    std::ostringstream os;
    os << "negative GD variance " << sigma2 << " at l=" << l << ", t=" << t;
    throw NumericalError(os.str());
  }
  return {b, std::max(0.0, sigma2)};
}

void validate(const GdSeProblem& p, bool homogeneous) {
  if (!(p.eta >= 0.0) || !std::isfinite(p.eta)) throw ValidationError("eta must be >= 0");
  if (!(p.lambda >= 0.0) || !std::isfinite(p.lambda)) throw ValidationError("lambda must be >= 0");
  if (!p.loss.d1 || !p.loss.d2) throw ConfigError("loss needs first and second derivatives");
  if (p.m() == 0) throw ConfigError("gd_se: xi must be non-empty");
  if (!p.masks.empty()) {
    if (p.masks.size() < p.T) throw ConfigError("gd_se: fewer masks than steps");
    for (const auto& s : p.masks) {
      if (static_cast<std::size_t>(s.size()) != p.m()) throw ConfigError("gd_se: mask length");
    }
  }
  if (homogeneous) return;
  if (p.profile.rows() != p.m() || p.profile.cols() != p.n()) {
    throw ConfigError("gd_se: profile must be m x n");
  }
  p.profile.validate(false);
}

void batch_errors(GdSeState& st, const GdSeOptions& opt, std::uint64_t tag) {
  const std::size_t T = st.T;
  const std::size_t L = st.l_count();
  std::size_t G = opt.batches;
  if (G >= 2 && opt.mc_samples / G < 2 * T + 2) G = opt.mc_samples / (2 * T + 2);
  st.b_se = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(T + 1), static_cast<Eigen::Index>(L));
  st.sigma2_se = st.b_se;
  st.batches = G >= 2 ? G : 0;
  if (st.batches == 0 || T == 0) return;
  Eigen::MatrixXd sb = st.b_se, sb2 = st.b_se, ss = st.b_se, ss2 = st.b_se;
  for (std::size_t gi = 0; gi < G; ++gi) {
    GdSeState part = st;
    run_recursion(part, opt.mc_samples / G, derive_seed(opt.seed, {tag, 1, gi}), opt.threads);
    for (std::size_t t = 0; t <= T; ++t) {
      for (std::size_t l = 0; l < L; ++l) {
        const auto [b, s2] = key_params_at(part, l, t);
        const auto ti = static_cast<Eigen::Index>(t);
        const auto li = static_cast<Eigen::Index>(l);
        sb(ti, li) += b;
        sb2(ti, li) += b * b;
        ss(ti, li) += s2;
        ss2(ti, li) += s2 * s2;
      }
    }
  }
  const double g = static_cast<double>(G);
  auto se = [g](const Eigen::MatrixXd& s1, const Eigen::MatrixXd& s2) {
    const Eigen::MatrixXd mean = s1 / g;
    const Eigen::MatrixXd var =
        ((s2 / g - mean.cwiseProduct(mean)).cwiseMax(0.0)) * (g / (g - 1.0));
    return Eigen::MatrixXd((var / g).cwiseSqrt());
  };
  st.b_se = se(sb, sb2);
  st.sigma2_se = se(ss, ss2);
}

}  // namespace

GdSeState gd_se(const GdSeProblem& problem, const GdSeOptions& opt) {
  validate(problem, false);
  GdSeState st;
  st.problem = problem;
  st.T = problem.T;
  st.phi = static_cast<double>(problem.m()) / static_cast<double>(std::max<std::size_t>(1, problem.n()));
  st.mu0_norm2 = problem.mu0.squaredNorm();
  st.seed = opt.seed;
  const std::uint64_t tag = stream_tag("gd_se");
  run_recursion(st, opt.mc_samples, derive_seed(opt.seed, {tag, 0}), opt.threads);
  batch_errors(st, opt, tag);
  return st;
}

GdSeState gd_se_homogeneous(const Loss& loss, double eta, double lambda, double mu0_norm2,
                            const Eigen::VectorXd& xi, double phi, std::size_t T,
                            const GdSeOptions& opt) {
  if (!(phi > 0.0)) throw ValidationError("phi must be positive");
  if (!(mu0_norm2 >= 0.0)) throw ValidationError("||mu0||^2 must be nonnegative");
  GdSeState st;
  st.problem.loss = loss;
  st.problem.eta = eta;
  st.problem.lambda = lambda;
  st.problem.xi = xi;
  st.problem.T = T;
  validate(st.problem, true);
  st.homogeneous = true;
  st.phi = phi;
  st.mu0_norm2 = mu0_norm2;
  st.T = T;
  st.seed = opt.seed;
  const std::uint64_t tag = stream_tag("gd_se_homogeneous");
  run_recursion(st, opt.mc_samples, derive_seed(opt.seed, {tag, 0}), opt.threads);
  batch_errors(st, opt, tag);
  return st;
}

GdLaw gd_key_params(const GdSeState& state, std::size_t t) {
  if (t > state.T) throw ConfigError("gd_key_params: t beyond state horizon");
  const std::size_t L = state.l_count();
  GdLaw out;
  out.b.resize(static_cast<Eigen::Index>(L));
  out.sigma2.resize(static_cast<Eigen::Index>(L));
  out.b_se = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(L));
  out.sigma2_se = out.b_se;
  for (std::size_t l = 0; l < L; ++l) {
    const auto [b, s2] = key_params_at(state, l, t);
    const auto li = static_cast<Eigen::Index>(l);
    out.b(li) = b;
    out.sigma2(li) = s2;
    if (state.b_se.size() > 0) {
      out.b_se(li) = state.b_se(static_cast<Eigen::Index>(t), li);
      out.sigma2_se(li) = state.sigma2_se(static_cast<Eigen::Index>(t), li);
    }
  }
  return out;
}

GdEntryLaw gd_entrywise_law(const GdSeState& state, std::size_t l, std::size_t t) {
  if (t > state.T) throw ConfigError("gd_entrywise_law: t beyond state horizon");
  if (!state.homogeneous && l >= state.problem.n()) {
    throw ValidationError("gd_entrywise_law: coordinate out of range");
  }
  const auto [b, s2] = key_params_at(state, state.homogeneous ? 0 : l, t);
  GdEntryLaw out;
  out.b = b;
  out.variance = s2;
  const double mu = state.problem.n() > l ? state.problem.mu0(static_cast<Eigen::Index>(l)) : 0.0;
  out.mean = b * mu;
  out.weights = state.M_at(state.homogeneous ? 0 : l)
                    .col(static_cast<Eigen::Index>(t))
                    .head(static_cast<Eigen::Index>(t) + 1);
  return out;
}

GdPathCache gd_sample_paths(const GdSeState& state, std::size_t t, std::size_t samples,
                            std::uint64_t seed) {
  if (t == 0 || t > state.T) throw ConfigError("gd_sample_paths: t outside [1, T]");
  const MomentMatchedNormals X(samples, t, seed);
  GdPathCache cache;
  cache.t = t;
  cache.rows = state.k_rows();
  cache.samples = X.samples();
  cache.pooled = state.homogeneous;
  cache.W.assign(cache.rows * cache.samples * t, 0.0);
  const bool full_mask = state.homogeneous || state.problem.masks.empty();
  std::vector<PathFactor> factors(state.sigma_u.size());
  for (std::size_t k = 0; k < factors.size(); ++k) {
    for (Eigen::Index d = 0; d < static_cast<Eigen::Index>(t); ++d) {
      factors[k].append(state.sigma_u[k].row(d).head(d + 1).transpose());
    }
  }
  PathBuf b;
  std::vector<double> z(t);
  for (std::size_t k = 0; k < cache.rows; ++k) {
    const PathFactor& L = factors.size() == 1 ? factors.front() : factors[k];
    for (std::size_t j = 0; j < cache.samples; ++j) {
      for (std::size_t d = 0; d < t; ++d) z[d] = X(j, d);
      gd_path(state, k, xi_for(state, k, j), k, full_mask, L, z.data(), t, b);
      for (std::size_t r = 1; r <= t; ++r) cache.W[(k * cache.samples + j) * t + r - 1] = b.w[r];
    }
  }
  return cache;
}

namespace {

void check_pair(const GdSeState& state, std::size_t s, std::size_t t, const GdPathCache& paths) {
  if (s == 0 || s > t) throw ConfigError("g coefficient needs 1 <= s <= t");
  if (t > paths.t || t > state.T) throw ConfigError("g coefficient beyond sampled horizon");
}

Eigen::VectorXd finish_g(const GdSeState& state, const Eigen::VectorXd& per_row) {
  return -state.problem.eta * agg_to_l(state, per_row);
}

}  // namespace

Eigen::VectorXd g_coefficient_nested_sum(const GdSeState& state, std::size_t s, std::size_t t,
                                         const GdPathCache& paths) {
  check_pair(state, s, t, paths);
  if (t - s > 8) throw ConfigError("nested-sum g coefficient is limited to t - s <= 8");
  const double eta = state.problem.eta;
  Eigen::VectorXd per_row = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(paths.rows));
  for (std::size_t k = 0; k < paths.rows; ++k) {
    double sum = 0.0;
    for (std::size_t j = 0; j < paths.samples; ++j) {
      auto W = [&](std::size_t r) { return paths.w(k, j, r); };
      auto f = [&](std::size_t prev, std::size_t r) { return state.f.value(prev, r, k); };
      // Chains t = r_0 > r_1 > ... > r_tau > r_{tau+1} = s, weight (-eta)^{tau+1} prod f W.
      double bracket = s == t ? 1.0 : 0.0;
      auto dfs = [&](auto&& self, std::size_t prev, double acc) -> void {
        bracket += acc * (-eta) * f(prev, s) * W(s);
        for (std::size_t r = prev - 1; r > s; --r) self(self, r, acc * (-eta) * f(prev, r) * W(r));
      };
      if (s < t) dfs(dfs, t, 1.0);
      sum += W(t) * bracket;
    }
    per_row(static_cast<Eigen::Index>(k)) = sum / static_cast<double>(paths.samples);
  }
  return finish_g(state, per_row);
}

Eigen::VectorXd g_coefficient_recursive(const GdSeState& state, std::size_t s, std::size_t t,
                                        const GdPathCache& paths) {
  check_pair(state, s, t, paths);
  Eigen::VectorXd per_row = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(paths.rows));
  std::vector<double> w(t + 1), D;
  for (std::size_t k = 0; k < paths.rows; ++k) {
    double sum = 0.0;
    for (std::size_t j = 0; j < paths.samples; ++j) {
      for (std::size_t r = 1; r <= t; ++r) w[r] = paths.w(k, j, r);
      d_recursion(state, k, w, t, D);
      sum += w[t] * D[s * (t + 1) + t];
    }
    per_row(static_cast<Eigen::Index>(k)) = sum / static_cast<double>(paths.samples);
  }
  return finish_g(state, per_row);
}

namespace {

nlohmann::json mat_json(const Eigen::MatrixXd& M) {
  std::vector<double> data;
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    for (Eigen::Index c = 0; c < M.cols(); ++c) data.push_back(M(r, c));
  }
  return {{"rows", M.rows()}, {"cols", M.cols()}, {"data", data}};
}

nlohmann::json mats_json(const std::vector<Eigen::MatrixXd>& v) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& M : v) out.push_back(mat_json(M));
  return out;
}

nlohmann::json coef_json(const CoefTable& c) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t t = 0; t <= c.horizon(); ++t) {
    for (std::size_t s = 0; s <= t; ++s) {
      if (!c.has(t, s)) continue;
      const Eigen::VectorXd& v = c.at(t, s);
      out.push_back({{"t", t}, {"s", s}, {"values", std::vector<double>(v.data(), v.data() + v.size())}});
    }
  }
  return out;
}

}  // namespace

nlohmann::json to_json(const GdSeState& state) {
  nlohmann::json j;
  j["T"] = state.T;
  j["homogeneous"] = state.homogeneous;
  j["phi"] = state.phi;
  j["eta"] = state.problem.eta;
  j["lambda"] = state.problem.lambda;
  j["loss"] = state.problem.loss.name;
  j["mc_samples"] = state.mc_samples;
  j["seed"] = state.seed;
  j["batches"] = state.batches;
  j["M"] = mats_json(state.M);
  j["sigma_v"] = mats_json(state.sigma_v);
  j["sigma_u"] = mats_json(state.sigma_u);
  j["f"] = coef_json(state.f);
  j["g"] = coef_json(state.g);
  j["b_se"] = mat_json(state.b_se);
  j["sigma2_se"] = mat_json(state.sigma2_se);
  return j;
}

void write_gd_law_csv(const GdSeState& state, std::ostream& out) {
  out << "l,t,b,sigma2\n";
  out << std::setprecision(17);
  for (std::size_t l = 0; l < state.l_count(); ++l) {
    for (std::size_t t = 0; t <= state.T; ++t) {
      const auto [b, s2] = key_params_at(state, l, t);
      out << l << ',' << t << ',' << b << ',' << s2 << '\n';
    }
  }
}

}  // namespace gfom
