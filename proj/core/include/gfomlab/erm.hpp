#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "gfomlab/losses.hpp"
#include "gfomlab/prox.hpp"

namespace gfom {

// Regularized empirical risk minimization over mu in R^n with design A (m x n).
// linear:   sum_i L(Y_i - A_i^T mu) + sum_j f(mu_j), Y = A mu0 + xi unless given.
// logistic: sum_i L_sigma(A_i^T mu, A_i^T mu0; xi_i) + sum_j f(mu_j).
struct ErmProblem {
  enum class Model { linear, logistic };

  Model model = Model::linear;
  Eigen::MatrixXd A;
  Eigen::VectorXd Y;    // linear responses; derived from mu0 and xi when empty
  Eigen::VectorXd mu0;  // length n
  Eigen::VectorXd xi;   // length m
  Loss loss = Loss::squared();
  double sigma = 0.0;            // logistic smoothing width
  std::optional<double> clamp;   // logistic clamp level; 20 log n when unset
  ProxSpec prox = ProxSpec::zero();
  double eta = 0.0;              // values <= 0 select default_step(A)
  Eigen::VectorXd mu_init;       // starting point; zero when empty

  std::size_t m() const noexcept { return static_cast<std::size_t>(A.rows()); }
  std::size_t n() const noexcept { return static_cast<std::size_t>(A.cols()); }
  void validate() const;
  Eigen::VectorXd responses() const;
  double step() const;
  double clamp_level() const;
};

// ||A||_op from 50 power-iteration steps on A^T A (deterministic start).
double operator_norm_estimate(const Eigen::MatrixXd& A, std::size_t iterations = 50);
// 0.5 / ||A||_op^2.
double default_step(const Eigen::MatrixXd& A);

// One proximal gradient step from mu.
Eigen::VectorXd pgd_step(const ErmProblem& p, const Eigen::VectorXd& mu);

// mu^{(0..T)}; iterates above the divergence threshold raise DivergenceError.
std::vector<Eigen::VectorXd> pgd_linear(const ErmProblem& p, std::size_t T);
std::vector<Eigen::VectorXd> pgd_logistic(const ErmProblem& p, std::size_t T);
std::vector<Eigen::VectorXd> pgd(const ErmProblem& p, std::size_t T);

double erm_objective(const ErmProblem& p, const Eigen::VectorXd& mu);

struct FixedPointResult {
  Eigen::VectorXd mu;
  std::size_t iterations = 0;
  double residual = 0.0;   // ||mu - step(mu)||_inf at the returned point
  double last_change = 0.0;
  bool converged = false;
  double eta = 0.0;
};
// Iterates until ||mu^{(t)} - mu^{(t-1)}||_inf <= tol or max_T steps.
FixedPointResult solve_fixed_point(const ErmProblem& p, double tol = 1e-10,
                                   std::size_t max_T = 100000);

// Gradients of sum_i rho(-Y_i A_i^T mu) + sum_j f(mu_j) with Y_i = 2 1{A_i^T mu0 + xi_i >= 0} - 1,
// and of sum_i L(A_i^T mu, A_i^T mu0; xi_i) + sum_j f(mu_j) with the hard indicator.
struct GradientPair {
  Eigen::VectorXd direct;
  Eigen::VectorXd equivalent;
};
GradientPair logistic_objective_check(const Eigen::MatrixXd& A, const Eigen::VectorXd& mu0,
                                      const Eigen::VectorXd& xi, const ProxSpec& f,
                                      const Eigen::VectorXd& mu);

enum class DropKind { predictor, sample };
// PGD with column `index` zeroed (responses recomputed from mu0, xi when
// available) or with row `index` removed.
std::vector<Eigen::VectorXd> leave_one_out_run(const ErmProblem& p, DropKind kind,
                                               std::size_t index, std::size_t T);

void write_solution_csv(std::ostream& os, const Eigen::VectorXd& mu);
nlohmann::json to_json(const FixedPointResult& r);

}  // namespace gfom
