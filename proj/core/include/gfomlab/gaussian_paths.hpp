#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include <Eigen/Dense>

namespace gfom {

// A samples x dims block of standard normals with antithetic rows
// (row j + samples/2 = -row j) whitened so that X^T X / samples = I exactly.
// Column d depends only on columns [0, d], so a larger `dims` extends a
// smaller draw with the same seed without changing its leading columns.
class MomentMatchedNormals {
 public:
  MomentMatchedNormals() = default;
  // `samples` is rounded up to an even count and must be at least 2 * dims + 2.
  MomentMatchedNormals(std::size_t samples, std::size_t dims, std::uint64_t seed);

  std::size_t samples() const noexcept { return static_cast<std::size_t>(x_.rows()); }
  std::size_t dims() const noexcept { return static_cast<std::size_t>(x_.cols()); }
  const Eigen::MatrixXd& matrix() const noexcept { return x_; }
  double operator()(std::size_t j, std::size_t d) const {
    return x_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(d));
  }

 private:
  Eigen::MatrixXd x_;
};

// Plain i.i.d. standard normals (no matching), column d from stream d.
Eigen::MatrixXd iid_normals(std::size_t samples, std::size_t dims, std::uint64_t seed);

// Lower-triangular semidefinite Cholesky factor grown one row at a time, so
// the factor of the leading t x t block never changes when t + 1 is added.
class PathFactor {
 public:
  std::size_t dim() const noexcept { return static_cast<std::size_t>(l_.rows()); }
  const Eigen::MatrixXd& matrix() const noexcept { return l_; }
  // cov_row holds Cov(X_{t}, X_{s}) for s = 1..t, the new row of the covariance.
  void append(const Eigen::VectorXd& cov_row);
  // path[d] = sum_{e <= d} L(d, e) z[e] for d < dim().
  void transform(const double* z, double* path) const;

 private:
  Eigen::MatrixXd l_;
};

// Symmetrizes `cov` and checks its spectrum. Eigenvalues below -tol raise
// NumericalError naming `context`; values in [-tol, 0) are treated as zero.
Eigen::MatrixXd checked_covariance(const Eigen::MatrixXd& cov, const std::string& context,
                                   double tol = 1e-10);

}  // namespace gfom
