#include "gfomlab/programs.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gfomlab/error.hpp"
#include "gfomlab/rng.hpp"

namespace gfom {

CoefTable::CoefTable(std::size_t horizon) { resize(horizon); }

void CoefTable::resize(std::size_t horizon) {
  c_.resize(horizon + 1);
  for (std::size_t t = 0; t <= horizon; ++t) c_[t].resize(t + 1);
}

const Eigen::VectorXd& CoefTable::at(std::size_t t, std::size_t s) const {
  if (!has(t, s)) {
    std::ostringstream os;
    os << "missing coefficient (t=" << t << ", s=" << s << ")";
    throw ConfigError(os.str());
  }
  return c_[t][s];
}

void CoefTable::set(std::size_t t, std::size_t s, Eigen::VectorXd v) {
  if (s > t) throw ConfigError("CoefTable::set requires s <= t");
  if (t >= c_.size()) resize(t);
  c_[t][s] = std::move(v);
}

bool CoefTable::operator==(const CoefTable& other) const {
  if (c_.size() != other.c_.size()) return false;
  for (std::size_t t = 0; t < c_.size(); ++t) {
    for (std::size_t s = 0; s <= t; ++s) {
      if (has(t, s) != other.has(t, s)) return false;
      if (has(t, s) && c_[t][s] != other.c_[t][s]) return false;
    }
  }
  return true;
}

namespace {

void check_arity(const std::vector<RowFunction>& fns, std::size_t T, std::size_t extra,
                 const char* label) {
  if (fns.size() != T) {
    std::ostringstream os;
    os << label << ": expected " << T << " functions, got " << fns.size();
    throw ConfigError(os.str());
  }
  for (std::size_t t = 1; t <= T; ++t) {
    if (fns[t - 1].arity() != t + extra) {
      std::ostringstream os;
      os << label << "_" << t << ": arity " << fns[t - 1].arity() << ", expected " << t + extra;
      throw ConfigError(os.str());
    }
  }
}

bool all_free(const std::vector<RowFunction>& fns) {
  return std::all_of(fns.begin(), fns.end(),
                     [](const RowFunction& f) { return f.coordinate_free(); });
}

bool is_constant_vector(const Eigen::VectorXd& v) {
  return v.size() == 0 || (v.array() == v(0)).all();
}

}  // namespace

void SymmetricProgram::validate() const {
  if (T == 0) throw ConfigError("program horizon must be at least 1");
  check_arity(F, T, 0, "F");
  check_arity(G, T, 0, "G");
}

bool SymmetricProgram::coordinate_free() const { return all_free(F) && all_free(G); }

void AsymmetricProgram::validate() const {
  if (T == 0) throw ConfigError("program horizon must be at least 1");
  check_arity(F1, T, 0, "F1");
  check_arity(F2, T, 0, "F2");
  check_arity(G1, T, 0, "G1");
  check_arity(G2, T, 1, "G2");
}

bool AsymmetricProgram::coordinate_free() const {
  return all_free(F1) && all_free(F2) && all_free(G1) && all_free(G2);
}

SymmetricProgram build_power_iteration(std::size_t T, Eigen::VectorXd z0) {
  if (T == 0) throw ConfigError("power iteration requires T >= 1");
  SymmetricProgram p;
  p.T = T;
  p.z0 = std::move(z0);
  p.name = "power_iteration";
  for (std::size_t t = 1; t <= T; ++t) {
    p.F.push_back(RowFunction::identity_last(t));
    p.G.push_back(RowFunction::zero(t));
  }
  return p;
}

SymmetricProgram amp_as_gfom(const std::vector<RowFunction>& Fr, const CoefTable& onsager,
                             Eigen::VectorXd z0, std::string name) {
  const std::size_t T = Fr.size();
  SymmetricProgram p;
  p.T = T;
  p.z0 = std::move(z0);
  p.name = std::move(name);
  for (std::size_t t = 1; t <= T; ++t) {
    p.F.push_back(Fr[t - 1]);
    std::vector<std::size_t> terms;
    bool free = true;
    for (std::size_t s = 1; s < t; ++s) {
      if (onsager.has(t, s) && !Fr[s - 1].is_zero()) {
        terms.push_back(s);
        free = free && is_constant_vector(onsager.at(t, s)) && Fr[s - 1].coordinate_free();
      }
    }
    if (terms.empty()) {
      p.G.push_back(RowFunction::zero(t));
      continue;
    }
    std::vector<Eigen::VectorXd> coefs;
    std::vector<RowFunction> fns;
    for (std::size_t s : terms) {
      coefs.push_back(onsager.at(t, s));
      fns.push_back(Fr[s - 1]);
    }
    p.G.push_back(RowFunction(
        t,
        [coefs, fns](std::size_t i, std::span<const double> h) {
          double acc = 0.0;
          for (std::size_t q = 0; q < fns.size(); ++q) {
            acc -= coefs[q](static_cast<Eigen::Index>(i)) * fns[q](i, h.first(fns[q].arity()));
          }
          return acc;
        },
        [coefs, fns](std::size_t i, std::span<const double> h, std::size_t w) {
          double acc = 0.0;
          for (std::size_t q = 0; q < fns.size(); ++q) {
            const std::size_t a = fns[q].arity();
            if (w < a) {
              acc -= coefs[q](static_cast<Eigen::Index>(i)) * fns[q].partial(i, h.first(a), w);
            }
          }
          return acc;
        },
        "onsager", free));
  }
  return p;
}

SymmetricProgram build_tanh_amp(std::size_t T, Eigen::VectorXd z0,
                                const std::vector<Eigen::VectorXd>& onsager) {
  if (T == 0) throw ConfigError("tanh_amp requires T >= 1");
  if (onsager.size() + 1 < T) throw ConfigError("tanh_amp: Onsager table too short");
  std::vector<RowFunction> Fr;
  for (std::size_t t = 1; t <= T; ++t) Fr.push_back(RowFunction::tanh_last(t));
  CoefTable b(T);
  for (std::size_t t = 2; t <= T; ++t) b.set(t, t - 1, onsager[t - 2]);
  return amp_as_gfom(Fr, b, std::move(z0), "tanh_amp");
}

AsymmetricProgram build_pgd_linear(const PgdLinearParams& p) {
  if (!(p.eta > 0.0)) throw ValidationError("pgd_linear: eta must be positive");
  if (p.T == 0) throw ConfigError("pgd_linear requires T >= 1");
  const auto m = p.xi.size();
  const auto n = p.mu0.size();
  if (p.mu_init.size() != 0 && p.mu_init.size() != n) {
    throw ConfigError("pgd_linear: mu_init has the wrong length");
  }
  AsymmetricProgram prog;
  prog.T = p.T;
  prog.name = "pgd_linear";
  prog.u0 = Eigen::VectorXd::Zero(m);
  prog.v0 = Eigen::VectorXd(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    prog.v0(j) = p.prox.inverse(p.eta, p.mu_init.size() ? p.mu_init(j) : 0.0);
  }
  const ProxSpec prox = p.prox;
  const double eta = p.eta;
  const Eigen::VectorXd mu0 = p.mu0;
  const Eigen::VectorXd xi = p.xi;
  const Loss loss = p.loss;
  for (std::size_t t = 1; t <= p.T; ++t) {
    const std::size_t last = t - 1;
    prog.F1.push_back(RowFunction(
        t,
        [prox, eta, mu0, last](std::size_t j, std::span<const double> h) {
          return prox.eval(eta, h[last]) - mu0(static_cast<Eigen::Index>(j));
        },
        [prox, eta, last](std::size_t, std::span<const double> h, std::size_t w) {
          return w == last ? prox.derivative(eta, h[last]) : 0.0;
        },
        "prox_minus_mu0"));
    prog.G1.push_back(RowFunction::zero(t));
    prog.G2.push_back(RowFunction(
        t + 1,
        [loss, eta, xi, t](std::size_t i, std::span<const double> h) {
          return eta * loss.d1(xi(static_cast<Eigen::Index>(i)) - h[t]);
        },
        [loss, eta, xi, t](std::size_t i, std::span<const double> h, std::size_t w) {
          return w == t ? -eta * loss.d2(xi(static_cast<Eigen::Index>(i)) - h[t]) : 0.0;
        },
        "eta_dloss"));
    prog.F2.push_back(RowFunction::of_last(
        t, [prox, eta](double x) { return prox.eval(eta, x); },
        [prox, eta](double x) { return prox.derivative(eta, x); }, "prox",
        prox.lipschitz(eta)));
  }
  return prog;
}

AsymmetricProgram build_gd(const GdParams& p) {
  if (!(p.eta >= 0.0)) throw ValidationError("gd: eta must be nonnegative");
  if (!(p.lambda >= 0.0)) throw ValidationError("gd: lambda must be nonnegative");
  if (p.T == 0) throw ConfigError("gd requires T >= 1");
  const auto m = p.xi.size();
  const auto n = p.mu0.size();
  if (!p.masks.empty() && p.masks.size() < p.T) throw ConfigError("gd: need one mask per step");
  for (const auto& s : p.masks) {
    if (s.size() != m) throw ConfigError("gd: mask length must equal m");
    if (!((s.array() == 0.0) || (s.array() == 1.0)).all()) {
      throw ValidationError("gd: masks must be 0/1 vectors");
    }
  }
  AsymmetricProgram prog;
  prog.T = p.T;
  prog.name = p.beta != 0.0 ? "gd_momentum" : "gd";
  prog.u0 = Eigen::VectorXd::Zero(m);
  prog.v0 = -p.mu0;
  const double eta = p.eta;
  const double lambda = p.lambda;
  const double beta = p.beta;
  const Eigen::VectorXd mu0 = p.mu0;
  const Eigen::VectorXd xi = p.xi;
  const Loss loss = p.loss;
  const bool free_mu0 = lambda == 0.0 || is_constant_vector(mu0);
  (void)n;
  for (std::size_t t = 1; t <= p.T; ++t) {
    prog.F1.push_back(RowFunction::identity_last(t));
    prog.G1.push_back(RowFunction::zero(t));
    Eigen::VectorXd mask =
        p.masks.empty() ? Eigen::VectorXd::Ones(m) : p.masks[t - 1];
    prog.G2.push_back(RowFunction(
        t + 1,
        [loss, eta, xi, mask, t](std::size_t i, std::span<const double> h) {
          const auto r = static_cast<Eigen::Index>(i);
          return mask(r) == 0.0 ? 0.0 : eta * loss.d1(xi(r) - h[t]);
        },
        [loss, eta, xi, mask, t](std::size_t i, std::span<const double> h, std::size_t w) {
          const auto r = static_cast<Eigen::Index>(i);
          if (w != t || mask(r) == 0.0) return 0.0;
          return -eta * loss.d2(xi(r) - h[t]);
        },
        "eta_mask_dloss"));
    const bool momentum = beta != 0.0 && t >= 2;
    const double a = 1.0 - eta * lambda + (momentum ? beta : 0.0);
    const double c = momentum ? -beta : 0.0;
    prog.F2.push_back(RowFunction(
        t,
        [a, c, eta, lambda, mu0, t](std::size_t j, std::span<const double> h) {
          double out = a * h[t - 1] - eta * lambda * mu0(static_cast<Eigen::Index>(j));
          if (c != 0.0) out += c * h[t - 2];
          return out;
        },
        [a, c, t](std::size_t, std::span<const double>, std::size_t w) {
          if (w == t - 1) return a;
          if (c != 0.0 && t >= 2 && w == t - 2) return c;
          return 0.0;
        },
        "gd_linear_part", free_mu0));
  }
  return prog;
}

AsymmetricProgram build_gd_ridge(const Loss& loss, double eta, double lambda,
                                 const Eigen::VectorXd& mu0, const Eigen::VectorXd& xi,
                                 const std::vector<Eigen::VectorXd>& masks, std::size_t T) {
  GdParams p;
  p.loss = loss;
  p.eta = eta;
  p.lambda = lambda;
  p.mu0 = mu0;
  p.xi = xi;
  p.masks = masks;
  p.T = T;
  return build_gd(p);
}

std::vector<Eigen::VectorXd> bernoulli_masks(std::size_t m, std::size_t T, double p,
                                             std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("mask probability must lie in [0, 1]");
  std::vector<Eigen::VectorXd> out;
  for (std::size_t t = 0; t < T; ++t) {
    CounterEngine eng(derive_seed(seed, t));
    Eigen::VectorXd s(static_cast<Eigen::Index>(m));
    for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = uniform_open01(eng) < p ? 1.0 : 0.0;
    out.push_back(std::move(s));
  }
  return out;
}

double mollifier(double x, double sigma) {
  if (sigma <= 0.0) return x >= 0.0 ? 1.0 : 0.0;
  const double s = x / sigma;
  if (s <= -1.0) return 0.0;
  if (s >= 1.0) return 1.0;
  const double u = 0.5 * (s + 1.0);
  return u * u * (3.0 - 2.0 * u);
}

double mollifier_d1(double x, double sigma) {
  if (sigma <= 0.0) return 0.0;
  const double s = x / sigma;
  if (s <= -1.0 || s >= 1.0) return 0.0;
  const double u = 0.5 * (s + 1.0);
  return 3.0 * u * (1.0 - u) / sigma;
}

double logistic_d1(double x, double y, double xi, double sigma) {
  const double c = 2.0 * mollifier(y + xi, sigma) - 1.0;
  return -c * rho_d1(-c * x);
}

double logistic_d1_dx(double x, double y, double xi, double sigma) {
  const double c = 2.0 * mollifier(y + xi, sigma) - 1.0;
  return c * c * rho_d2(-c * x);
}

double logistic_d1_dy(double x, double y, double xi, double sigma) {
  const double c = 2.0 * mollifier(y + xi, sigma) - 1.0;
  const double dc = 2.0 * mollifier_d1(y + xi, sigma);
  return dc * (-rho_d1(-c * x) + c * x * rho_d2(-c * x));
}

AsymmetricProgram build_logistic(const LogisticParams& p) {
  if (!(p.eta > 0.0)) throw ValidationError("logistic: eta must be positive");
  if (!(p.sigma >= 0.0)) throw ValidationError("logistic: sigma must be nonnegative");
  if (p.T == 0) throw ConfigError("logistic requires T >= 1");
  const auto m = p.xi.size();
  const auto n = p.mu0.size();
  const double L =
      p.clamp ? *p.clamp : 20.0 * std::log(static_cast<double>(std::max<Eigen::Index>(n, 2)));
  if (!(L > 0.0)) throw ValidationError("logistic: clamp level must be positive");
  const ProxSpec prox = p.prox;
  const double eta = p.eta;
  const double sigma = p.sigma;
  const Eigen::VectorXd xi = p.xi;

  AsymmetricProgram prog;
  prog.T = p.T + 1;
  prog.name = "logistic";
  prog.u0 = Eigen::VectorXd::Zero(m);
  prog.v0 = Eigen::VectorXd::Zero(n);
  // Step 1: u^{(1)} = A mu0 and v^{(1)} is the pre-image of mu^{(0)} = 0.
  prog.F1.push_back(RowFunction::constant_vector(1, p.mu0));
  prog.G1.push_back(RowFunction::zero(1));
  prog.G2.push_back(RowFunction::zero(2));
  const double v1 = prox.inverse(eta, 0.0);
  prog.F2.push_back(RowFunction::constant(1, v1));
  for (std::size_t t = 2; t <= prog.T; ++t) {
    auto prox_last = RowFunction::of_last(
        t, [prox, eta](double x) { return prox.eval(eta, x); },
        [prox, eta](double x) { return prox.derivative(eta, x); }, "prox", prox.lipschitz(eta));
    prog.F1.push_back(prox_last);
    prog.G1.push_back(RowFunction::zero(t));
    prog.G2.push_back(RowFunction(
        t + 1,
        [eta, sigma, xi, L, t](std::size_t i, std::span<const double> h) {
          const double x = std::clamp(h[t], -L, L);
          return -eta * logistic_d1(x, h[1], xi(static_cast<Eigen::Index>(i)), sigma);
        },
        [eta, sigma, xi, L, t](std::size_t i, std::span<const double> h, std::size_t w) {
          const double x = std::clamp(h[t], -L, L);
          const double e = xi(static_cast<Eigen::Index>(i));
          if (w == t) return std::abs(h[t]) < L ? -eta * logistic_d1_dx(x, h[1], e, sigma) : 0.0;
          if (w == 1) return -eta * logistic_d1_dy(x, h[1], e, sigma);
          return 0.0;
        },
        "logistic_gradient"));
    prog.F2.push_back(prox_last);
  }
  return prog;
}

Eigen::MatrixXd embed_matrix(const Eigen::MatrixXd& A) {
  const auto m = A.rows();
  const auto n = A.cols();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m + n, m + n);
  out.topRightCorner(m, n) = A;
  out.bottomLeftCorner(n, m) = A.transpose();
  return out;
}

SymmetricProgram symmetrize(const AsymmetricProgram& prog) {
  prog.validate();
  const std::size_t m = prog.m();
  const std::size_t n = prog.n();
  const std::size_t T = prog.T;
  SymmetricProgram out;
  out.T = 2 * T;
  out.name = prog.name + "_symmetrized";
  out.z0.resize(static_cast<Eigen::Index>(m + n));
  out.z0 << prog.u0, prog.v0;

  // v^{(s)} lives at zeta index 2s (s >= 1), u^{(s)} at 2s - 1; both s = 0 at 0.
  auto v_index = [](std::size_t s) { return 2 * s; };
  auto u_index = [](std::size_t s) { return s == 0 ? std::size_t{0} : 2 * s - 1; };

  for (std::size_t t = 1; t <= T; ++t) {
    const std::size_t odd = 2 * t - 1;  // arity of F/G at zeta step 2t - 1
    const std::size_t even = 2 * t;

    std::vector<std::size_t> vmap(t), umap(t), umap_inc(t + 1);
    for (std::size_t s = 0; s < t; ++s) {
      vmap[s] = v_index(s);
      umap[s] = u_index(s);
    }
    for (std::size_t s = 0; s <= t; ++s) umap_inc[s] = u_index(s);

    out.F.push_back(RowFunction::blocks(m, RowFunction::zero(odd),
                                        prog.F1[t - 1].remapped(odd, vmap, m)));
    out.G.push_back(RowFunction::blocks(m, prog.G1[t - 1].remapped(odd, umap, 0),
                                        RowFunction::zero(odd)));
    out.F.push_back(RowFunction::blocks(m, prog.G2[t - 1].remapped(even, umap_inc, 0),
                                        RowFunction::zero(even)));
    out.G.push_back(RowFunction::blocks(m, RowFunction::zero(even),
                                        prog.F2[t - 1].remapped(even, vmap, m)));
  }
  return out;
}

const std::vector<ProgramInfo>& program_registry() {
  static const std::vector<ProgramInfo> reg = {
      {"power_iteration", "symmetric", "F_t = z^{(t-1)}, G_t = 0"},
      {"tanh_amp", "symmetric", "AMP with tanh denoiser and state-evolution Onsager terms"},
      {"pgd_linear", "asymmetric", "proximal gradient for the linear model"},
      {"gd", "asymmetric", "(stochastic) gradient descent with ridge penalty and momentum"},
      {"logistic", "asymmetric", "smoothed logistic proximal gradient"},
  };
  return reg;
}

}  // namespace gfom
