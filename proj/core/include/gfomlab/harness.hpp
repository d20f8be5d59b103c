#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "gfomlab/config.hpp"
#include "gfomlab/dynamics.hpp"
#include "gfomlab/ensembles.hpp"
#include "gfomlab/erm.hpp"
#include "gfomlab/programs.hpp"

namespace gfom {

// One compared quantity. gap = estimate_a - estimate_b exactly.
//   two_sided: pass <=> |gap| <= tolerance
//   at_most:   pass <=> gap <= tolerance   (one-sided diagnostics)
//   at_least:  pass <=> gap >= -tolerance
struct Statistic {
  enum class Check { two_sided, at_most, at_least };

  std::string name;
  std::string series;
  double x = 0.0;
  double estimate_a = 0.0;
  double estimate_b = 0.0;
  double gap = 0.0;
  double se_a = 0.0;
  double se_b = 0.0;
  double combined_se = 0.0;
  double tolerance = 0.0;
  Check check = Check::two_sided;
  bool pass = false;
};

Statistic make_statistic(std::string name, std::string series, double x, double a, double b,
                         double se_a, double se_b, double tolerance,
                         Statistic::Check check = Statistic::Check::two_sided);

// se_multiple * combined_se floored at `exact`, then capped by `abs` when set.
double se_tolerance(const Tolerances& tol, double combined_se);

struct PlotPoint {
  std::string series;
  double x = 0.0;
  double y = 0.0;
  double y_err = 0.0;
};

struct ComparisonReport {
  std::string experiment;
  std::vector<Statistic> stats;
  std::vector<PlotPoint> plot;
  std::size_t replicates = 0;
  std::size_t divergent_a = 0;
  std::size_t divergent_b = 0;
  double runtime_seconds = 0.0;
  nlohmann::json details = nlohmann::json::object();

  bool passed() const;
};

nlohmann::json to_json(const ComparisonReport& r);

// Sample mean and standard error of the mean (0 for fewer than two values).
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  double variance = 0.0;  // unbiased
};
MeanSe mean_se(const std::vector<double>& x);

// sup_x |F_n(x) - Phi(x)| against the standard normal.
double ks_distance_normal(std::vector<double> x);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};
// Least squares y = intercept + slope x; needs two distinct x values.
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

// ||v||_inf / (||v||_2 / sqrt(n)); 1 for the zero vector.
double delocalization_ratio(const Eigen::VectorXd& v);

// Vector from a params entry: {"kind": ones|e1|zero|constant|gaussian|rademacher|logistic,
// "scale": s} or a bare kind string. Random kinds draw from derive_seed(seed, stream_tag(tag)).
Eigen::VectorXd make_vector(const nlohmann::json& spec, std::size_t len, std::uint64_t seed,
                            const std::string& tag);

// A configured program with its fixed inputs.
struct ProgramInstance {
  bool symmetric = true;
  SymmetricProgram sym;
  AsymmetricProgram asym;
  std::optional<GdParams> gd;
  std::optional<PgdLinearParams> pgd;
  std::optional<LogisticParams> logistic;
  // gd only: Bernoulli mask rate and whether replicates redraw the masks.
  double mask_p = 1.0;
  bool resample_masks = false;

  std::size_t rows() const noexcept { return symmetric ? sym.dim() : asym.m(); }
  std::size_t cols() const noexcept { return symmetric ? sym.dim() : asym.n(); }
};

bool program_is_symmetric(const std::string& key);
// Ensemble of the config for the given program kind and dimensions.
EnsembleSpec ensemble_for(const ExperimentConfig& c);
// Builds the program named by c.program from c.params; tanh_amp derives its
// Onsager terms from the state evolution of `spec`.
ProgramInstance build_program(const ExperimentConfig& c, const EnsembleSpec& spec);
// The program a replicate runs: `base` unless gd masks are redrawn per replicate.
ProgramInstance replicate_instance(const ProgramInstance& base, const ExperimentConfig& c,
                                   std::size_t r);
// Linear or logistic ERM problem over design A from pgd_linear / logistic params.
ErmProblem build_erm_problem(const ExperimentConfig& c, const Eigen::MatrixXd& A);

// Seed of replicate r.
std::uint64_t replicate_seed(std::uint64_t seed, std::size_t r);

ComparisonReport universality_averaged(const ExperimentConfig& c);
ComparisonReport universality_entrywise(const ExperimentConfig& c);
ComparisonReport universality_sweep(const ExperimentConfig& c);
ComparisonReport se_vs_simulation(const ExperimentConfig& c);
ComparisonReport gd_gaussianity_test(const ExperimentConfig& c);
ComparisonReport correspondence_check(const ExperimentConfig& c);
ComparisonReport embedding_check(const ExperimentConfig& c);

// Rows t = 0..T of ||mu^{(t)} - mu_hat||_2 / sqrt(n) and ||.||_inf.
struct DecayTable {
  std::vector<double> l2;
  std::vector<double> linf;
  bool converged = false;
  double fixed_point_residual = 0.0;
  std::optional<LinearFit> fit;  // log(l2) on t in [1, T] above the noise floor
};
DecayTable decay_table(const ErmProblem& problem, std::size_t T, double fp_tol = 1e-13);
ComparisonReport convergence_decay_report(const ErmProblem& problem, std::size_t T,
                                          const Tolerances& tol = {});
ComparisonReport convergence_decay(const ExperimentConfig& c);

// Ratios per step from `traj`; leave-one-out gaps max_t ||z^{(t)} - z_loo^{(t)}||_inf
// from each entry of `loo`.
ComparisonReport delocalization_report(const Trajectory& traj, const std::vector<Trajectory>& loo,
                                       const Tolerances& tol = {});
ComparisonReport delocalization(const ExperimentConfig& c);

}  // namespace gfom
