#include "gfomlab/erm.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "gfomlab/dynamics.hpp"
#include "gfomlab/error.hpp"
#include "gfomlab/programs.hpp"
#include "gfomlab/rng.hpp"

namespace gfom {

void ErmProblem::validate() const {
  const auto m = A.rows();
  const auto n = A.cols();
  if (m == 0 || n == 0) throw ConfigError("ERM: empty design");
  if (mu0.size() != 0 && mu0.size() != n) throw ConfigError("ERM: mu0 length must equal n");
  if (xi.size() != 0 && xi.size() != m) throw ConfigError("ERM: xi length must equal m");
  if (Y.size() != 0 && Y.size() != m) throw ConfigError("ERM: Y length must equal m");
  if (mu_init.size() != 0 && mu_init.size() != n) throw ConfigError("ERM: mu_init length");
  if (model == Model::linear && Y.size() == 0 && (mu0.size() == 0 || xi.size() == 0)) {
    throw ConfigError("ERM: linear model needs Y or (mu0, xi)");
  }
  if (model == Model::logistic && (mu0.size() == 0 || xi.size() == 0)) {
    throw ConfigError("ERM: logistic model needs mu0 and xi");
  }
  if (!(sigma >= 0.0)) throw ValidationError("ERM: sigma must be >= 0");
  if (clamp && !(*clamp > 0.0)) throw ValidationError("ERM: clamp must be positive");
}

Eigen::VectorXd ErmProblem::responses() const {
  if (Y.size() != 0) return Y;
  return A * mu0 + xi;
}

double ErmProblem::step() const { return eta > 0.0 ? eta : default_step(A); }

double ErmProblem::clamp_level() const {
  return clamp ? *clamp : 20.0 * std::log(static_cast<double>(std::max<std::size_t>(n(), 2)));
}

double operator_norm_estimate(const Eigen::MatrixXd& A, std::size_t iterations) {
  if (A.size() == 0) return 0.0;
  CounterEngine eng(stream_tag("operator_norm"));
  std::normal_distribution<double> normal;
  Eigen::VectorXd x(A.cols());
  for (Eigen::Index j = 0; j < x.size(); ++j) x(j) = normal(eng);
  x.normalize();
  double norm = 0.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    Eigen::VectorXd y = A.transpose() * (A * x);
    const double len = y.norm();
    if (len == 0.0) return 0.0;
    norm = std::sqrt(len);
    x = y / len;
  }
  return norm;
}

double default_step(const Eigen::MatrixXd& A) {
  const double s = operator_norm_estimate(A);
  if (s == 0.0) return 1.0;
  return 0.5 / (s * s);
}

namespace {

Eigen::VectorXd prox_vec(const ProxSpec& prox, double eta, const Eigen::VectorXd& x) {
  Eigen::VectorXd out(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) out(j) = prox.eval(eta, x(j));
  return out;
}

// Gradient of the data term.
Eigen::VectorXd data_gradient(const ErmProblem& p, const Eigen::VectorXd& Y,
                              const Eigen::VectorXd& mu) {
  if (p.model == ErmProblem::Model::linear) {
    Eigen::VectorXd r = Y - p.A * mu;
    for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = p.loss.d1(r(i));
    return -(p.A.transpose() * r);
  }
  const Eigen::VectorXd x = p.A * mu;
  const Eigen::VectorXd y = p.A * p.mu0;
  const double L = p.clamp_level();
  Eigen::VectorXd d(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    d(i) = logistic_d1(std::clamp(x(i), -L, L), y(i), p.xi(i), p.sigma);
  }
  return p.A.transpose() * d;
}

Eigen::VectorXd step_with(const ErmProblem& p, double eta, const Eigen::VectorXd& Y,
                          const Eigen::VectorXd& mu) {
  return prox_vec(p.prox, eta, mu - eta * data_gradient(p, Y, mu));
}

void check_finite(const Eigen::VectorXd& mu, std::size_t t) {
  if (!mu.allFinite() || (mu.size() && mu.cwiseAbs().maxCoeff() > kDivergenceThreshold)) {
    std::ostringstream os;
    os << "PGD iterate diverged at t=" << t;
    throw DivergenceError(t, os.str());
  }
}

std::vector<Eigen::VectorXd> run(const ErmProblem& p, std::size_t T) {
  p.validate();
  const double eta = p.step();
  const Eigen::VectorXd Y = p.model == ErmProblem::Model::linear ? p.responses() : Eigen::VectorXd();
  std::vector<Eigen::VectorXd> hist;
  hist.reserve(T + 1);
  hist.push_back(p.mu_init.size() ? p.mu_init : Eigen::VectorXd::Zero(p.A.cols()));
  for (std::size_t t = 1; t <= T; ++t) {
    hist.push_back(step_with(p, eta, Y, hist.back()));
    check_finite(hist.back(), t);
  }
  return hist;
}

}  // namespace

Eigen::VectorXd pgd_step(const ErmProblem& p, const Eigen::VectorXd& mu) {
  p.validate();
  const Eigen::VectorXd Y = p.model == ErmProblem::Model::linear ? p.responses() : Eigen::VectorXd();
  return step_with(p, p.step(), Y, mu);
}

std::vector<Eigen::VectorXd> pgd_linear(const ErmProblem& p, std::size_t T) {
  if (p.model != ErmProblem::Model::linear) throw ConfigError("pgd_linear: not a linear model");
  return run(p, T);
}

std::vector<Eigen::VectorXd> pgd_logistic(const ErmProblem& p, std::size_t T) {
  if (p.model != ErmProblem::Model::logistic) {
    throw ConfigError("pgd_logistic: not a logistic model");
  }
  return run(p, T);
}

std::vector<Eigen::VectorXd> pgd(const ErmProblem& p, std::size_t T) { return run(p, T); }

double erm_objective(const ErmProblem& p, const Eigen::VectorXd& mu) {
  p.validate();
  double data = 0.0;
  if (p.model == ErmProblem::Model::linear) {
    const Eigen::VectorXd r = p.responses() - p.A * mu;
    for (Eigen::Index i = 0; i < r.size(); ++i) data += p.loss.value(r(i));
  } else {
    const Eigen::VectorXd x = p.A * mu;
    const Eigen::VectorXd y = p.A * p.mu0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double c = 2.0 * mollifier(y(i) + p.xi(i), p.sigma) - 1.0;
      data += rho(-c * x(i));
    }
  }
  double reg = 0.0;
  for (Eigen::Index j = 0; j < mu.size(); ++j) reg += p.prox.value(mu(j));
  return data + reg;
}

FixedPointResult solve_fixed_point(const ErmProblem& p, double tol, std::size_t max_T) {
  p.validate();
  FixedPointResult out;
  out.eta = p.step();
  const Eigen::VectorXd Y = p.model == ErmProblem::Model::linear ? p.responses() : Eigen::VectorXd();
  Eigen::VectorXd mu = p.mu_init.size() ? p.mu_init : Eigen::VectorXd::Zero(p.A.cols());
  Eigen::VectorXd next = step_with(p, out.eta, Y, mu);
  out.last_change = (next - mu).cwiseAbs().maxCoeff();
  std::size_t t = 0;
  while (out.last_change > tol && t < max_T) {
    mu = std::move(next);
    ++t;
    check_finite(mu, t);
    next = step_with(p, out.eta, Y, mu);
    out.last_change = (next - mu).cwiseAbs().maxCoeff();
  }
  out.converged = out.last_change <= tol;
  out.iterations = t;
  out.residual = out.last_change;
  out.mu = std::move(mu);
  return out;
}

GradientPair logistic_objective_check(const Eigen::MatrixXd& A, const Eigen::VectorXd& mu0,
                                      const Eigen::VectorXd& xi, const ProxSpec& f,
                                      const Eigen::VectorXd& mu) {
  if (mu0.size() != A.cols() || mu.size() != A.cols() || xi.size() != A.rows()) {
    throw ConfigError("logistic_objective_check: dimension mismatch");
  }
  const Eigen::VectorXd signal = A * mu0;
  const Eigen::VectorXd x = A * mu;
  Eigen::VectorXd reg(mu.size());
  for (Eigen::Index j = 0; j < mu.size(); ++j) reg(j) = f.gradient(mu(j));

  Eigen::VectorXd wd(x.size()), we(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double y = signal(i) + xi(i) >= 0.0 ? 1.0 : -1.0;
    wd(i) = -y * rho_d1(-y * x(i));
    we(i) = logistic_d1(x(i), signal(i), xi(i), 0.0);
  }
  return {A.transpose() * wd + reg, A.transpose() * we + reg};
}

std::vector<Eigen::VectorXd> leave_one_out_run(const ErmProblem& p, DropKind kind,
                                               std::size_t index, std::size_t T) {
  p.validate();
  ErmProblem q = p;
  if (q.eta <= 0.0) q.eta = p.step();
  if (kind == DropKind::predictor) {
    if (index >= p.n()) throw ValidationError("leave_one_out_run: predictor index out of range");
    q.A.col(static_cast<Eigen::Index>(index)).setZero();
    if (p.model == ErmProblem::Model::linear && p.mu0.size() && p.xi.size()) {
      q.Y = q.A * p.mu0 + p.xi;
    }
  } else {
    if (index >= p.m()) throw ValidationError("leave_one_out_run: sample index out of range");
    const auto k = static_cast<Eigen::Index>(index);
    auto drop_row = [k](const Eigen::MatrixXd& M) {
      Eigen::MatrixXd out(M.rows() - 1, M.cols());
      out.topRows(k) = M.topRows(k);
      out.bottomRows(M.rows() - k - 1) = M.bottomRows(M.rows() - k - 1);
      return out;
    };
    auto drop_entry = [k](const Eigen::VectorXd& v) {
      if (v.size() == 0) return v;
      Eigen::VectorXd out(v.size() - 1);
      out.head(k) = v.head(k);
      out.tail(v.size() - k - 1) = v.tail(v.size() - k - 1);
      return out;
    };
    q.Y = drop_entry(p.model == ErmProblem::Model::linear ? p.responses() : p.Y);
    q.xi = drop_entry(p.xi);
    q.A = drop_row(p.A);
  }
  return run(q, T);
}

void write_solution_csv(std::ostream& os, const Eigen::VectorXd& mu) {
  const auto old = os.precision(17);
  os << "coordinate,value\n";
  for (Eigen::Index j = 0; j < mu.size(); ++j) os << j << ',' << mu(j) << '\n';
  os.precision(old);
}

nlohmann::json to_json(const FixedPointResult& r) {
  return {{"iterations", r.iterations},
          {"residual", r.residual},
          {"last_change", r.last_change},
          {"converged", r.converged},
          {"eta", r.eta}};
}

}  // namespace gfom
