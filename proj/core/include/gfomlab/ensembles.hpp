#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <random>
#include <utility>

#include "gfomlab/rng.hpp"

namespace gfom {

// Entry distributions, each standardized to mean 0 and variance 1.
struct EntryLaw {
  enum class Kind { gaussian, rademacher, uniform_pm, shifted_bernoulli };

  Kind kind = Kind::gaussian;
  double p = 0.5;  // only read by shifted_bernoulli

  static EntryLaw gaussian() { return {Kind::gaussian, 0.5}; }
  static EntryLaw rademacher() { return {Kind::rademacher, 0.5}; }
  static EntryLaw uniform_pm() { return {Kind::uniform_pm, 0.5}; }
  // Takes -sqrt((1-p)/p) with probability p and sqrt(p/(1-p)) otherwise;
  // skewed for p != 1/2.
  static EntryLaw shifted_bernoulli(double p);

  std::string name() const;
  static EntryLaw parse(const std::string& name, double p = 0.5);

  // Closed-form third moment, used to label stress tests.
  double third_moment() const;

  bool operator==(const EntryLaw&) const = default;
};

// Pre-normalization second moments E A0_ij^2. Either a constant or a dense
// matrix; the constant form keeps homogeneous experiments O(1) in memory.
class VarianceProfile {
 public:
  VarianceProfile() = default;

  static VarianceProfile constant(std::size_t rows, std::size_t cols, double value);
  static VarianceProfile dense(Eigen::MatrixXd values);
  static VarianceProfile from_function(std::size_t rows, std::size_t cols,
                                       const std::function<double(std::size_t, std::size_t)>& fn);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool is_constant() const noexcept { return !dense_.has_value(); }
  double constant_value() const noexcept { return value_; }

  double at(std::size_t i, std::size_t j) const {
    return dense_ ? (*dense_)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) : value_;
  }

  // Materialized matrix (allocates for the constant form).
  Eigen::MatrixXd matrix() const;
  VarianceProfile scaled(double factor) const;

  // Throws ValidationError on negative or non-finite entries, and on
  // asymmetry when `symmetric` is set.
  void validate(bool symmetric) const;

  // y = P x and y = P^T x without materializing constant profiles.
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  Eigen::VectorXd apply_transpose(const Eigen::VectorXd& x) const;

  bool operator==(const VarianceProfile& other) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  double value_ = 0.0;
  std::optional<Eigen::MatrixXd> dense_;
};

enum class Normalization { inv_sqrt_n, inv_sqrt_m, inv_sqrt_m_plus_n };

std::string to_string(Normalization n);
Normalization parse_normalization(const std::string& s);

struct EnsembleSpec {
  EntryLaw law;
  VarianceProfile profile;
  Normalization normalization = Normalization::inv_sqrt_n;
  bool symmetric = true;
  // When set, Gaussian draws are clipped at +-c*sqrt(log n). Off by default.
  std::optional<double> truncation;

  // Shape and normalization consistency; throws ConfigError / ValidationError.
  void validate(std::size_t rows, std::size_t cols) const;
  double denominator(std::size_t rows, std::size_t cols) const;

  // Post-normalization second moments E A_ij^2, the quantity the state
  // evolution consumes.
  VarianceProfile second_moments() const;

  static EnsembleSpec wigner(std::size_t n, EntryLaw law = EntryLaw::gaussian());
  // Homogeneous rectangular design normalized by sqrt(m).
  static EnsembleSpec rectangular(std::size_t m, std::size_t n,
                                  EntryLaw law = EntryLaw::gaussian());
};

// Stream of standardized draws from one law on one counter stream.
class EntrySampler {
 public:
  EntrySampler(EntryLaw law, std::uint64_t key, std::optional<double> clip = {})
      : law_(law), eng_(key), clip_(clip) {}
  double operator()();

 private:
  EntryLaw law_;
  CounterEngine eng_;
  std::normal_distribution<double> normal_;
  std::optional<double> clip_;
};

// A = A0 / sqrt(n) with independent upper-triangle entries. Row i of the
// upper triangle is drawn from its own counter stream derive_seed(seed, i).
Eigen::MatrixXd sample_symmetric(const EnsembleSpec& spec, std::size_t n, std::uint64_t seed);

Eigen::MatrixXd sample_asymmetric(const EnsembleSpec& spec, std::size_t m, std::size_t n,
                                  std::uint64_t seed);

// Draws (A, B) with identical profile and normalization and laws spec.law and
// law_b, from independent child seeds. For symmetric specs m is ignored.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> matched_pair(const EnsembleSpec& spec_a,
                                                         const EntryLaw& law_b, std::size_t m,
                                                         std::size_t n, std::uint64_t seed);

// Dispatches on spec.symmetric.
Eigen::MatrixXd sample_matrix(const EnsembleSpec& spec, std::size_t m, std::size_t n,
                              std::uint64_t seed);

}  // namespace gfom
