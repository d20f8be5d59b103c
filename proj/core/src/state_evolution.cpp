#include "gfomlab/state_evolution.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gfomlab/error.hpp"
#include "gfomlab/gaussian_paths.hpp"
#include "gfomlab/parallel.hpp"
#include "gfomlab/rng.hpp"

namespace gfom {

// ---------------------------------------------------------------------------
// CompositeMap

CompositeMap::CompositeMap(Kind kind, std::vector<RowFunction> H, std::vector<RowFunction> K)
    : kind_(kind), H_(std::move(H)), K_(std::move(K)) {}

void CompositeMap::install(std::size_t t, const std::vector<Eigen::VectorXd>& coef_by_s) {
  if (kind_ != Kind::identity) {
    const std::size_t top = std::min(upper(t), coef_by_s.empty() ? 0 : coef_by_s.size() - 1);
    for (std::size_t s = 1; s <= top; ++s) {
      if (coef_by_s[s].size() > 0) coef_.set(t, s, coef_by_s[s]);
    }
  }
  horizon_ = std::max(horizon_, t);
}

void CompositeMap::eval(std::size_t row, std::span<const double> x, std::size_t t,
                        std::span<double> w) const {
  eval_jacobian(row, x, t, w, {});
}

void CompositeMap::eval_jacobian(std::size_t row, std::span<const double> x, std::size_t t,
                                 std::span<double> w, std::span<double> jac) const {
  if (kind_ != Kind::identity && t > horizon_) {
    std::ostringstream os;
    os << "composite map evaluated at t=" << t << " beyond installed horizon " << horizon_;
    throw ConfigError(os.str());
  }
  if (x.size() < t + 1 || w.size() < t + 1) throw ConfigError("composite map: buffer too short");
  const std::size_t n = t + 1;
  const bool want_jac = !jac.empty();
  if (want_jac) {
    if (jac.size() < n * n) throw ConfigError("composite map: jacobian buffer too short");
    std::fill(jac.begin(), jac.begin() + static_cast<std::ptrdiff_t>(n * n), 0.0);
    for (std::size_t d = 0; d < n; ++d) jac[d * n + d] = 1.0;
  }
  w[0] = x[0];
  if (kind_ == Kind::identity) {
    for (std::size_t tau = 1; tau <= t; ++tau) w[tau] = x[tau];
    return;
  }

  thread_local std::vector<double> hval, dh;
  thread_local std::vector<char> have;
  hval.assign(n + 1, 0.0);
  have.assign(n + 1, 0);
  if (want_jac) dh.assign((n + 1) * n, 0.0);

  // Adds sum_q d fn / d w^q * jac[q][.] into out (columns < cols).
  auto chain = [&](const RowFunction& fn, std::size_t arity, double* out) {
    const std::span<const double> hist(w.data(), arity);
    for (std::size_t q = 0; q < arity; ++q) {
      const double d = fn.partial(row, hist, q);
      if (d == 0.0) continue;
      const double* jq = &jac[q * n];
      for (std::size_t c = 0; c <= q; ++c) out[c] += d * jq[c];
    }
  };

  for (std::size_t tau = 1; tau <= t; ++tau) {
    double acc = x[tau];
    double* jt = want_jac ? &jac[tau * n] : nullptr;
    const std::size_t top = std::min(upper(tau), H_.size());
    for (std::size_t s = 1; s <= top; ++s) {
      const double c = coef_.value(tau, s, row);
      const RowFunction& h = H_[s - 1];
      if (c == 0.0 || h.is_zero()) continue;
      if (!have[s]) {
        const std::size_t a = h_arity(s);
        hval[s] = h(row, std::span<const double>(w.data(), a));
        if (want_jac) chain(h, a, &dh[s * n]);
        have[s] = 1;
      }
      acc += c * hval[s];
      if (want_jac) {
        const double* ds = &dh[s * n];
        for (std::size_t col = 0; col < tau; ++col) jt[col] += c * ds[col];
      }
    }
    if (tau <= K_.size() && !K_[tau - 1].is_zero()) {
      const RowFunction& k = K_[tau - 1];
      acc += k(row, std::span<const double>(w.data(), tau));
      if (want_jac) chain(k, tau, jt);
    }
    w[tau] = acc;
  }
}

std::vector<Eigen::VectorXd> CompositeMap::apply(const std::vector<Eigen::VectorXd>& x,
                                                 std::size_t t) const {
  if (x.size() < t + 1) throw ConfigError("CompositeMap::apply: history too short");
  const Eigen::Index rows = x.front().size();
  std::vector<Eigen::VectorXd> out(t + 1, Eigen::VectorXd(rows));
  std::vector<double> xi(t + 1), wi(t + 1);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (std::size_t d = 0; d <= t; ++d) xi[d] = x[d](r);
    eval(static_cast<std::size_t>(r), xi, t, wi);
    for (std::size_t d = 0; d <= t; ++d) out[d](r) = wi[d];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo pass engine

namespace {

constexpr std::size_t kSampleBlocks = 8;

// One sweep over Gaussian paths: for each evaluated row r and sample j,
//   w = map(x), x = (init_r, L_r X_j),
// accumulating outer'(w) along x^{(s)} (s = 1..n_deriv) and outer(w) * prods[q](w).
struct PassSpec {
  const CompositeMap* map = nullptr;
  std::size_t map_t = 0;
  const RowFunction* outer = nullptr;
  std::vector<const RowFunction*> prods;
  std::size_t n_deriv = 0;
  const Eigen::VectorXd* init = nullptr;
  const std::vector<PathFactor>* factors = nullptr;  // one entry when shared
  bool fast = false;
};

struct PassResult {
  std::size_t eval_rows = 0;
  std::size_t total_rows = 0;
  std::size_t mc = 0;
  Eigen::MatrixXd mean;    // eval_rows x Q, Q = n_deriv + prods
  Eigen::MatrixXd sd;      // per-row sample standard deviations
  Eigen::MatrixXd totals;  // mc x Q, per-sample sums over all rows
};

PassResult run_pass(const PassSpec& spec, const MomentMatchedNormals& X, std::size_t threads) {
  const std::size_t total_rows = static_cast<std::size_t>(spec.init->size());
  const std::size_t eval_rows = spec.fast ? std::min<std::size_t>(1, total_rows) : total_rows;
  const std::size_t nd = spec.n_deriv;
  const std::size_t Q = nd + spec.prods.size();
  const std::size_t mc = X.samples();
  const std::size_t t = spec.map_t;
  const std::size_t outer_arity = spec.outer->arity();

  struct Block {
    Eigen::MatrixXd sum, sumsq;
  };
  std::vector<Block> blocks(kSampleBlocks);
  Eigen::MatrixXd totals = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(mc),
                                                 static_cast<Eigen::Index>(Q));
  const std::size_t per_block = (mc + kSampleBlocks - 1) / kSampleBlocks;

  parallel_for(
      kSampleBlocks,
      [&](std::size_t b) {
        Block& blk = blocks[b];
        blk.sum = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(eval_rows),
                                        static_cast<Eigen::Index>(Q));
        blk.sumsq = blk.sum;
        const std::size_t j0 = b * per_block;
        const std::size_t j1 = std::min(mc, j0 + per_block);
        std::vector<double> z(std::max<std::size_t>(X.dims(), 1)), x(t + 2), w(t + 2),
            jac((t + 1) * (t + 1)), g(Q);
        for (std::size_t j = j0; j < j1; ++j) {
          for (std::size_t d = 0; d < X.dims(); ++d) z[d] = X(j, d);
          for (std::size_t r = 0; r < eval_rows; ++r) {
            const PathFactor& L = spec.factors->size() == 1 ? spec.factors->front()
                                                            : (*spec.factors)[r];
            x[0] = (*spec.init)(static_cast<Eigen::Index>(r));
            std::fill(x.begin() + 1, x.end(), 0.0);
            L.transform(z.data(), x.data() + 1);
            if (nd > 0) {
              spec.map->eval_jacobian(r, std::span<const double>(x.data(), t + 1), t,
                                      std::span<double>(w.data(), t + 1), jac);
            } else {
              spec.map->eval(r, std::span<const double>(x.data(), t + 1), t,
                             std::span<double>(w.data(), t + 1));
            }
            const std::span<const double> wo(w.data(), outer_arity);
            const double o = (*spec.outer)(r, wo);
            for (std::size_t s = 1; s <= nd; ++s) g[s - 1] = 0.0;
            if (nd > 0) {
              for (std::size_t q = 0; q < outer_arity; ++q) {
                const double d = spec.outer->partial(r, wo, q);
                if (d == 0.0) continue;
                for (std::size_t s = 1; s <= std::min(q, nd); ++s) {
                  g[s - 1] += d * jac[q * (t + 1) + s];
                }
              }
            }
            for (std::size_t q = 0; q < spec.prods.size(); ++q) {
              const RowFunction* p = spec.prods[q];
              const double pv =
                  p == spec.outer ? o : (*p)(r, std::span<const double>(w.data(), p->arity()));
              g[nd + q] = o * pv;
            }
            for (std::size_t q = 0; q < Q; ++q) {
              const auto rq = static_cast<Eigen::Index>(r);
              const auto qq = static_cast<Eigen::Index>(q);
              blk.sum(rq, qq) += g[q];
              blk.sumsq(rq, qq) += g[q] * g[q];
              totals(static_cast<Eigen::Index>(j), qq) += g[q];
            }
          }
        }
      },
      threads);

  PassResult res;
  res.eval_rows = eval_rows;
  res.total_rows = total_rows;
  res.mc = mc;
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(eval_rows),
                                              static_cast<Eigen::Index>(Q));
  Eigen::MatrixXd sumsq = sum;
  for (const Block& blk : blocks) {
    if (blk.sum.size() == 0) continue;
    sum += blk.sum;
    sumsq += blk.sumsq;
  }
  const double dm = static_cast<double>(mc);
  res.mean = sum / dm;
  res.sd = ((sumsq / dm - res.mean.cwiseProduct(res.mean)).cwiseMax(0.0) * (dm / (dm - 1.0)))
               .cwiseSqrt();
  if (spec.fast) totals *= static_cast<double>(total_rows);
  res.totals = std::move(totals);
  return res;
}

struct Aggregate {
  Eigen::VectorXd value, se;
};

// sum_l P_{kl} E_l (or sum_k P_{kl} E_k when `transpose`), with its MC error.
Aggregate aggregate(const PassResult& r, std::size_t q, const VarianceProfile& P,
                    bool transpose) {
  const auto qq = static_cast<Eigen::Index>(q);
  const auto total = static_cast<Eigen::Index>(r.total_rows);
  Eigen::VectorXd E = r.eval_rows == r.total_rows
                          ? Eigen::VectorXd(r.mean.col(qq))
                          : Eigen::VectorXd::Constant(total, r.total_rows ? r.mean(0, qq) : 0.0);
  Aggregate out;
  out.value = transpose ? P.apply_transpose(E) : P.apply(E);
  const double root = std::sqrt(static_cast<double>(r.mc));
  if (P.is_constant()) {
    const Eigen::VectorXd col = r.totals.col(qq);
    const double mean = col.mean();
    const double var =
        col.size() > 1 ? (col.array() - mean).square().sum() / static_cast<double>(col.size() - 1)
                       : 0.0;
    out.se = Eigen::VectorXd::Constant(out.value.size(),
                                       std::abs(P.constant_value()) * std::sqrt(var) / root);
  } else {
    Eigen::VectorXd sd = r.eval_rows == r.total_rows
                             ? Eigen::VectorXd(r.sd.col(qq))
                             : Eigen::VectorXd::Constant(total, r.sd(0, qq));
    sd /= root;
    out.se = transpose ? P.apply_transpose(sd) : P.apply(sd);
  }
  return out;
}

GaussianLawTable empty_law(const Eigen::VectorXd& init, bool homogeneous) {
  GaussianLawTable law;
  law.homogeneous = homogeneous;
  law.init = init;
  law.cov.assign(homogeneous ? 1 : static_cast<std::size_t>(init.size()), Eigen::MatrixXd());
  if (law.cov.empty()) law.cov.emplace_back();
  return law;
}

// Appends row t (entries s = 1..t in cov_row[s - 1]) to every coordinate's
// covariance and Cholesky factor.
void extend_law(GaussianLawTable& law, GaussianLawTable& law_se, std::vector<PathFactor>& factors,
                std::size_t t, const std::vector<Aggregate>& cov_row, const char* side) {
  const auto ti = static_cast<Eigen::Index>(t);
  for (std::size_t k = 0; k < law.cov.size(); ++k) {
    Eigen::MatrixXd& C = law.cov[k];
    Eigen::MatrixXd& S = law_se.cov[k];
    C.conservativeResize(ti, ti);
    S.conservativeResize(ti, ti);
    const auto kk = static_cast<Eigen::Index>(k);
    for (Eigen::Index s = 0; s < ti; ++s) {
      const Aggregate& a = cov_row[static_cast<std::size_t>(s)];
      C(ti - 1, s) = C(s, ti - 1) = a.value(kk);
      S(ti - 1, s) = S(s, ti - 1) = a.se(kk);
    }
    std::ostringstream ctx;
    ctx << side << " coordinate " << k << ", iteration " << t;
    checked_covariance(C, ctx.str());
    factors[k].append(C.row(ti - 1).transpose());
  }
}

std::vector<PathFactor> factors_for(const GaussianLawTable& law, std::size_t t) {
  std::vector<PathFactor> out(law.cov.size());
  for (std::size_t k = 0; k < law.cov.size(); ++k) {
    const Eigen::MatrixXd& C = law.cov[k];
    for (Eigen::Index d = 0; d < static_cast<Eigen::Index>(t); ++d) {
      out[k].append(C.row(d).head(d + 1).transpose());
    }
  }
  return out;
}

bool is_constant_vector(const Eigen::VectorXd& v) {
  return v.size() == 0 || (v.array() == v(0)).all();
}

bool all_free(const std::vector<RowFunction>& fns, std::size_t T) {
  for (std::size_t t = 0; t < std::min(T, fns.size()); ++t) {
    if (!fns[t].coordinate_free()) return false;
  }
  return true;
}

std::vector<const RowFunction*> pointers(const std::vector<RowFunction>& fns, std::size_t count) {
  std::vector<const RowFunction*> out;
  for (std::size_t s = 0; s < count; ++s) out.push_back(&fns[s]);
  return out;
}

void check_samples(std::size_t mc, std::size_t T) {
  if (mc < 2 * T + 2) {
    std::ostringstream os;
    os << "mc_samples must be at least " << 2 * T + 2 << " for horizon " << T;
    throw ConfigError(os.str());
  }
}

SeRecord se_symmetric_core(const std::vector<RowFunction>& F, const std::vector<RowFunction>& G,
                           const Eigen::VectorXd& z0, const VarianceProfile& P, std::size_t T,
                           const SeOptions& opt, bool amp, bool coordinate_free) {
  const auto n = static_cast<std::size_t>(z0.size());
  if (P.rows() != n || P.cols() != n) throw ConfigError("state evolution: profile shape mismatch");
  if (F.size() < T) throw ConfigError("state evolution: horizon exceeds program length");
  P.validate(true);
  check_samples(opt.mc_samples, T);

  SeRecord rec;
  rec.symmetric = true;
  rec.amp = amp;
  rec.T = T;
  rec.seed = opt.seed;
  const bool homogeneous = P.is_constant();
  rec.fast_path = homogeneous && coordinate_free && is_constant_vector(z0) &&
                  !opt.force_per_coordinate;
  rec.law_z = empty_law(z0, homogeneous);
  rec.law_z_se = empty_law(Eigen::VectorXd::Zero(z0.size()), homogeneous);
  rec.theta = amp ? CompositeMap() : CompositeMap(CompositeMap::Kind::theta, F, G);
  rec.b.resize(T);
  rec.b_se.resize(T);

  const MomentMatchedNormals X(opt.mc_samples, T, derive_seed(opt.seed, stream_tag("se.z")));
  rec.mc_samples = X.samples();
  std::vector<PathFactor> factors(rec.law_z.cov.size());

  for (std::size_t t = 1; t <= T; ++t) {
    PassSpec spec;
    spec.map = &rec.theta;
    spec.map_t = t - 1;
    spec.outer = &F[t - 1];
    spec.prods = pointers(F, t);
    spec.n_deriv = t - 1;
    spec.init = &z0;
    spec.factors = &factors;
    spec.fast = rec.fast_path;
    const PassResult res = run_pass(spec, X, opt.threads);

    std::vector<Eigen::VectorXd> coef(t);
    for (std::size_t s = 1; s < t; ++s) {
      Aggregate a = aggregate(res, s - 1, P, false);
      coef[s] = a.value;
      rec.b.set(t, s, std::move(a.value));
      rec.b_se.set(t, s, std::move(a.se));
    }
    std::vector<Aggregate> row;
    for (std::size_t s = 1; s <= t; ++s) row.push_back(aggregate(res, t - 1 + s - 1, P, false));
    extend_law(rec.law_z, rec.law_z_se, factors, t, row, "z");
    rec.theta.install(t, coef);
  }
  return rec;
}

SeRecord se_asymmetric_core(const std::vector<RowFunction>& F1, const std::vector<RowFunction>& F2,
                            const std::vector<RowFunction>& G1, const std::vector<RowFunction>& G2,
                            const Eigen::VectorXd& u0, const Eigen::VectorXd& v0,
                            const VarianceProfile& P, std::size_t T, const SeOptions& opt,
                            bool amp) {
  const auto m = static_cast<std::size_t>(u0.size());
  const auto n = static_cast<std::size_t>(v0.size());
  if (P.rows() != m || P.cols() != n) throw ConfigError("state evolution: profile shape mismatch");
  if (F1.size() < T || G2.size() < T) {
    throw ConfigError("state evolution: horizon exceeds program length");
  }
  P.validate(false);
  check_samples(opt.mc_samples, T);

  SeRecord rec;
  rec.symmetric = false;
  rec.amp = amp;
  rec.T = T;
  rec.seed = opt.seed;
  const bool homogeneous = P.is_constant();
  rec.fast_u = homogeneous && all_free(G1, T) && all_free(G2, T) && is_constant_vector(u0) &&
               !opt.force_per_coordinate;
  rec.fast_v = homogeneous && all_free(F1, T) && all_free(F2, T) && is_constant_vector(v0) &&
               !opt.force_per_coordinate;
  rec.fast_path = rec.fast_u && rec.fast_v;
  rec.law_u = empty_law(u0, homogeneous);
  rec.law_u_se = empty_law(Eigen::VectorXd::Zero(u0.size()), homogeneous);
  rec.law_v = empty_law(v0, homogeneous);
  rec.law_v_se = empty_law(Eigen::VectorXd::Zero(v0.size()), homogeneous);
  if (amp) {
    rec.phi = CompositeMap();
    rec.xi = CompositeMap();
  } else {
    rec.phi = CompositeMap(CompositeMap::Kind::phi, G2, G1);
    rec.xi = CompositeMap(CompositeMap::Kind::xi, F1, F2);
  }
  rec.f.resize(T);
  rec.f_se.resize(T);
  rec.g.resize(T);
  rec.g_se.resize(T);

  const MomentMatchedNormals Xu(opt.mc_samples, T, derive_seed(opt.seed, stream_tag("se.u")));
  const MomentMatchedNormals Xv(opt.mc_samples, T, derive_seed(opt.seed, stream_tag("se.v")));
  rec.mc_samples = Xu.samples();
  std::vector<PathFactor> fu(rec.law_u.cov.size()), fv(rec.law_v.cov.size());

  for (std::size_t t = 1; t <= T; ++t) {
    // v side: derivatives and products of F1_t o Xi_{t-1}.
    PassSpec vs;
    vs.map = &rec.xi;
    vs.map_t = t - 1;
    vs.outer = &F1[t - 1];
    vs.prods = pointers(F1, t);
    vs.n_deriv = t - 1;
    vs.init = &v0;
    vs.factors = &fv;
    vs.fast = rec.fast_v;
    const PassResult rv = run_pass(vs, Xv, opt.threads);
    std::vector<Eigen::VectorXd> fcoef(t);
    for (std::size_t s = 1; s < t; ++s) {
      Aggregate a = aggregate(rv, s - 1, P, false);
      fcoef[s] = a.value;
      rec.f.set(t, s, std::move(a.value));
      rec.f_se.set(t, s, std::move(a.se));
    }
    std::vector<Aggregate> urow;
    for (std::size_t s = 1; s <= t; ++s) urow.push_back(aggregate(rv, t - 1 + s - 1, P, false));
    extend_law(rec.law_u, rec.law_u_se, fu, t, urow, "u");
    rec.phi.install(t, fcoef);

    // u side: derivatives and products of G2_t o Phi_t.
    PassSpec us;
    us.map = &rec.phi;
    us.map_t = t;
    us.outer = &G2[t - 1];
    us.prods = pointers(G2, t);
    us.n_deriv = t;
    us.init = &u0;
    us.factors = &fu;
    us.fast = rec.fast_u;
    const PassResult ru = run_pass(us, Xu, opt.threads);
    std::vector<Eigen::VectorXd> gcoef(t + 1);
    for (std::size_t s = 1; s <= t; ++s) {
      Aggregate a = aggregate(ru, s - 1, P, true);
      gcoef[s] = a.value;
      rec.g.set(t, s, std::move(a.value));
      rec.g_se.set(t, s, std::move(a.se));
    }
    std::vector<Aggregate> vrow;
    for (std::size_t s = 1; s <= t; ++s) vrow.push_back(aggregate(ru, t + s - 1, P, true));
    extend_law(rec.law_v, rec.law_v_se, fv, t, vrow, "v");
    rec.xi.install(t, gcoef);
  }
  return rec;
}

}  // namespace

SeRecord se_symmetric(const SymmetricProgram& prog, const VarianceProfile& profile,
                      std::size_t T, const SeOptions& opt) {
  prog.validate();
  if (T > prog.T) throw ConfigError("state evolution: horizon exceeds program length");
  return se_symmetric_core(prog.F, prog.G, prog.z0, profile, T, opt, false,
                           all_free(prog.F, T) && all_free(prog.G, T));
}

SeRecord se_asymmetric(const AsymmetricProgram& prog, const VarianceProfile& profile,
                       std::size_t T, const SeOptions& opt) {
  prog.validate();
  if (T > prog.T) throw ConfigError("state evolution: horizon exceeds program length");
  return se_asymmetric_core(prog.F1, prog.F2, prog.G1, prog.G2, prog.u0, prog.v0, profile, T, opt,
                            false);
}

SeRecord amp_se_symmetric(const std::vector<RowFunction>& Fr, const VarianceProfile& profile,
                          const Eigen::VectorXd& z0, std::size_t T, const SeOptions& opt) {
  for (std::size_t t = 1; t <= std::min(T, Fr.size()); ++t) {
    if (Fr[t - 1].arity() != t) throw ConfigError("AMP function arity mismatch");
  }
  return se_symmetric_core(Fr, {}, z0, profile, T, opt, true, all_free(Fr, T));
}

SeRecord amp_se_asymmetric(const std::vector<RowFunction>& Fr, const std::vector<RowFunction>& Gr,
                           const VarianceProfile& profile, const Eigen::VectorXd& u0,
                           const Eigen::VectorXd& v0, std::size_t T, const SeOptions& opt) {
  for (std::size_t t = 1; t <= std::min(T, Fr.size()); ++t) {
    if (Fr[t - 1].arity() != t) throw ConfigError("AMP F function arity mismatch");
  }
  for (std::size_t t = 1; t <= std::min(T, Gr.size()); ++t) {
    if (Gr[t - 1].arity() != t + 1) throw ConfigError("AMP G function arity mismatch");
  }
  return se_asymmetric_core(Fr, {}, {}, Gr, u0, v0, profile, T, opt, true);
}

std::vector<Eigen::VectorXd> tanh_amp_onsager(const VarianceProfile& profile,
                                              const Eigen::VectorXd& z0, std::size_t T,
                                              const SeOptions& opt) {
  std::vector<RowFunction> Fr;
  for (std::size_t t = 1; t <= T; ++t) Fr.push_back(RowFunction::tanh_last(t));
  const SeRecord rec = amp_se_symmetric(Fr, profile, z0, T, opt);
  std::vector<Eigen::VectorXd> out;
  for (std::size_t t = 2; t <= T; ++t) out.push_back(rec.b.at(t, t - 1));
  return out;
}

// ---------------------------------------------------------------------------
// GFOM -> AMP

namespace {

// outer o map_{map_t} as a function of x^{(0..map_t)}.
RowFunction compose(std::shared_ptr<const CompositeMap> map, std::size_t map_t, RowFunction outer,
                    const std::string& name) {
  const std::size_t arity = map_t + 1;
  auto eval = [map, map_t, outer](std::size_t row, std::span<const double> h) {
    thread_local std::vector<double> w;
    w.assign(map_t + 1, 0.0);
    map->eval(row, h, map_t, w);
    return outer(row, std::span<const double>(w.data(), outer.arity()));
  };
  auto partial = [map, map_t, outer](std::size_t row, std::span<const double> h,
                                     std::size_t which) {
    thread_local std::vector<double> w, jac;
    w.assign(map_t + 1, 0.0);
    jac.assign((map_t + 1) * (map_t + 1), 0.0);
    map->eval_jacobian(row, h, map_t, w, jac);
    const std::span<const double> wo(w.data(), outer.arity());
    double acc = 0.0;
    for (std::size_t q = which; q < outer.arity(); ++q) {
      acc += outer.partial(row, wo, q) * jac[q * (map_t + 1) + which];
    }
    return acc;
  };
  return RowFunction(arity, eval, partial, name);
}

}  // namespace

InducedAmp gfom_to_amp(const SymmetricProgram& prog, const SeRecord& se) {
  if (!se.symmetric || se.amp) throw ConfigError("gfom_to_amp: expected a symmetric GFOM record");
  InducedAmp out;
  out.theta = se.theta;
  out.onsager = se.b;
  auto map = std::make_shared<const CompositeMap>(se.theta);
  for (std::size_t t = 1; t <= se.T; ++t) {
    out.Fr.push_back(compose(map, t - 1, prog.F[t - 1], "induced_F" + std::to_string(t)));
  }
  return out;
}

InducedAmpAsym gfom_to_amp(const AsymmetricProgram& prog, const SeRecord& se) {
  if (se.symmetric || se.amp) throw ConfigError("gfom_to_amp: expected an asymmetric GFOM record");
  InducedAmpAsym out;
  out.phi = se.phi;
  out.xi = se.xi;
  out.bF = se.f;
  out.bG = se.g;
  auto phi = std::make_shared<const CompositeMap>(se.phi);
  auto xi = std::make_shared<const CompositeMap>(se.xi);
  for (std::size_t t = 1; t <= se.T; ++t) {
    out.Fr.push_back(compose(xi, t - 1, prog.F1[t - 1], "induced_F" + std::to_string(t)));
    out.Gr.push_back(compose(phi, t, prog.G2[t - 1], "induced_G" + std::to_string(t)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Predictions

namespace {

struct TrackView {
  const CompositeMap* map;
  const GaussianLawTable* law;
  bool fast;
};

TrackView view(const SeRecord& se, Track track, std::size_t t) {
  TrackView v{};
  switch (track) {
    case Track::z:
      if (!se.symmetric) throw ConfigError("z track requested from an asymmetric record");
      v = {&se.theta, &se.law_z, se.fast_path};
      break;
    case Track::u:
      if (se.symmetric) throw ConfigError("u track requested from a symmetric record");
      v = {&se.phi, &se.law_u, se.fast_u};
      break;
    case Track::v:
      if (se.symmetric) throw ConfigError("v track requested from a symmetric record");
      v = {&se.xi, &se.law_v, se.fast_v};
      break;
  }
  if (t > v.law->horizon()) throw ConfigError("prediction beyond state-evolution horizon");
  return v;
}

double path_value(const TrackView& v, const PathFactor& L, std::size_t k, const double* z,
                  std::size_t t, std::vector<double>& x, std::vector<double>& w) {
  x.assign(t + 1, 0.0);
  w.assign(t + 1, 0.0);
  x[0] = v.law->init(static_cast<Eigen::Index>(k));
  L.transform(z, x.data() + 1);
  v.map->eval(k, x, t, w);
  return w[t];
}

}  // namespace

Prediction predict_entrywise(const SeRecord& se, Track track, std::size_t t,
                             const std::vector<std::size_t>& coords,
                             const std::function<double(double)>& psi, std::size_t n_paths,
                             std::uint64_t seed) {
  const TrackView v = view(se, track, t);
  const MomentMatchedNormals X(n_paths, t, seed);
  const std::size_t N = X.samples();
  Prediction out;
  out.coordinates = coords;
  out.mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(coords.size()));
  out.se = out.mean;
  std::vector<double> z(std::max<std::size_t>(t, 1)), x, w;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const std::size_t k = coords[i];
    if (k >= v.law->rows()) throw ValidationError("prediction coordinate out of range");
    PathFactor L;
    const Eigen::MatrixXd& C = v.law->at(k);
    for (Eigen::Index d = 0; d < static_cast<Eigen::Index>(t); ++d) {
      L.append(C.row(d).head(d + 1).transpose());
    }
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
      for (std::size_t d = 0; d < t; ++d) z[d] = X(j, d);
      const double val = psi(path_value(v, L, k, z.data(), t, x, w));
      sum += val;
      sumsq += val * val;
    }
    const double mean = sum / static_cast<double>(N);
    const double var = std::max(0.0, sumsq / static_cast<double>(N) - mean * mean) *
                       static_cast<double>(N) / static_cast<double>(N - 1);
    out.mean(static_cast<Eigen::Index>(i)) = mean;
    out.se(static_cast<Eigen::Index>(i)) = std::sqrt(var / static_cast<double>(N));
  }
  return out;
}

AveragedPrediction predict_averaged(const SeRecord& se, Track track, std::size_t t,
                                    const std::function<double(double)>& psi,
                                    std::size_t n_paths, std::uint64_t seed) {
  const TrackView v = view(se, track, t);
  const std::size_t rows = v.law->rows();
  if (rows == 0) return {};
  if (v.fast) {
    const Prediction p = predict_entrywise(se, track, t, {0}, psi, n_paths, seed);
    return {p.mean(0), p.se(0)};
  }
  const MomentMatchedNormals X(n_paths, t, seed);
  const std::size_t N = X.samples();
  GaussianLawTable truncated = *v.law;
  const std::vector<PathFactor> factors = factors_for(truncated, t);
  std::vector<double> z(std::max<std::size_t>(t, 1)), x, w;
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t j = 0; j < N; ++j) {
    const std::size_t k = j % rows;
    for (std::size_t d = 0; d < t; ++d) z[d] = X(j, d);
    const PathFactor& L = factors.size() == 1 ? factors.front() : factors[k];
    const double val = psi(path_value(v, L, k, z.data(), t, x, w));
    sum += val;
    sumsq += val * val;
  }
  const double mean = sum / static_cast<double>(N);
  const double var = std::max(0.0, sumsq / static_cast<double>(N) - mean * mean) *
                     static_cast<double>(N) / static_cast<double>(N - 1);
  return {mean, std::sqrt(var / static_cast<double>(N))};
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& M) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(M.size()));
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    for (Eigen::Index c = 0; c < M.cols(); ++c) data.push_back(M(r, c));
  }
  return {{"rows", M.rows()}, {"cols", M.cols()}, {"data", data}};
}

nlohmann::json vector_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

nlohmann::json law_json(const GaussianLawTable& law) {
  nlohmann::json cov = nlohmann::json::array();
  for (const auto& C : law.cov) cov.push_back(matrix_json(C));
  return {{"homogeneous", law.homogeneous}, {"init", vector_json(law.init)}, {"cov", cov}};
}

nlohmann::json table_json(const CoefTable& c) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t t = 0; t <= c.horizon(); ++t) {
    for (std::size_t s = 0; s <= t; ++s) {
      if (c.has(t, s)) out.push_back({{"t", t}, {"s", s}, {"values", vector_json(c.at(t, s))}});
    }
  }
  return out;
}

}  // namespace

nlohmann::json to_json(const SeRecord& se) {
  nlohmann::json j;
  j["symmetric"] = se.symmetric;
  j["amp"] = se.amp;
  j["T"] = se.T;
  j["mc_samples"] = se.mc_samples;
  j["seed"] = se.seed;
  if (se.symmetric) {
    j["fast_path"] = se.fast_path;
    j["law_z"] = law_json(se.law_z);
    j["law_z_se"] = law_json(se.law_z_se);
    j["b"] = table_json(se.b);
    j["b_se"] = table_json(se.b_se);
  } else {
    j["fast_u"] = se.fast_u;
    j["fast_v"] = se.fast_v;
    j["law_u"] = law_json(se.law_u);
    j["law_u_se"] = law_json(se.law_u_se);
    j["law_v"] = law_json(se.law_v);
    j["law_v_se"] = law_json(se.law_v_se);
    j["f"] = table_json(se.f);
    j["f_se"] = table_json(se.f_se);
    j["g"] = table_json(se.g);
    j["g_se"] = table_json(se.g_se);
  }
  return j;
}

}  // namespace gfom
