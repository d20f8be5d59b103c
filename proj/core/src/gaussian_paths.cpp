#include "gfomlab/gaussian_paths.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "gfomlab/error.hpp"
#include "gfomlab/rng.hpp"

namespace gfom {

MomentMatchedNormals::MomentMatchedNormals(std::size_t samples, std::size_t dims,
                                           std::uint64_t seed) {
  if (samples % 2) ++samples;
  if (samples < 2 * dims + 2) {
    std::ostringstream os;
    os << "moment-matched normals need at least " << 2 * dims + 2 << " samples, got "
       << samples;
    throw ConfigError(os.str());
  }
  const auto S = static_cast<Eigen::Index>(samples);
  const auto D = static_cast<Eigen::Index>(dims);
  const Eigen::Index half = S / 2;
  x_.resize(S, D);
  for (Eigen::Index d = 0; d < D; ++d) {
    CounterEngine eng(derive_seed(seed, static_cast<std::uint64_t>(d)));
    std::normal_distribution<double> normal;
    for (Eigen::Index j = 0; j < half; ++j) {
      const double z = normal(eng);
      x_(j, d) = z;
      x_(j + half, d) = -z;
    }
  }
  if (D == 0) return;
  const Eigen::MatrixXd gram = (x_.transpose() * x_) / static_cast<double>(S);
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) throw NumericalError("moment matching: singular Gram matrix");
  // X <- X L^{-T}; L^{-T} is upper triangular, so column d mixes columns <= d.
  const Eigen::MatrixXd L = llt.matrixL();
  x_ = L.triangularView<Eigen::Lower>().solve(x_.transpose()).transpose();
}

Eigen::MatrixXd iid_normals(std::size_t samples, std::size_t dims, std::uint64_t seed) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(samples), static_cast<Eigen::Index>(dims));
  for (Eigen::Index d = 0; d < x.cols(); ++d) {
    CounterEngine eng(derive_seed(seed, static_cast<std::uint64_t>(d)));
    std::normal_distribution<double> normal;
    for (Eigen::Index j = 0; j < x.rows(); ++j) x(j, d) = normal(eng);
  }
  return x;
}

void PathFactor::append(const Eigen::VectorXd& cov_row) {
  const Eigen::Index t = l_.rows();
  if (cov_row.size() != t + 1) throw ConfigError("PathFactor::append: row length mismatch");
  Eigen::MatrixXd next = Eigen::MatrixXd::Zero(t + 1, t + 1);
  next.topLeftCorner(t, t) = l_;
  double scale = std::abs(cov_row(t));
  for (Eigen::Index d = 0; d < t; ++d) scale = std::max(scale, l_(d, d) * l_(d, d));
  const double pivot_floor = 1e-13 * std::sqrt(std::max(scale, 1e-300));
  for (Eigen::Index e = 0; e < t; ++e) {
    double acc = cov_row(e);
    for (Eigen::Index q = 0; q < e; ++q) acc -= next(t, q) * l_(e, q);
    next(t, e) = l_(e, e) > pivot_floor ? acc / l_(e, e) : 0.0;
  }
  double diag = cov_row(t);
  for (Eigen::Index q = 0; q < t; ++q) diag -= next(t, q) * next(t, q);
  next(t, t) = diag > 0.0 ? std::sqrt(diag) : 0.0;
  l_ = std::move(next);
}

void PathFactor::transform(const double* z, double* path) const {
  const Eigen::Index D = l_.rows();
  for (Eigen::Index d = 0; d < D; ++d) {
    double acc = 0.0;
    for (Eigen::Index e = 0; e <= d; ++e) acc += l_(d, e) * z[e];
    path[d] = acc;
  }
}

Eigen::MatrixXd checked_covariance(const Eigen::MatrixXd& cov, const std::string& context,
                                   double tol) {
  Eigen::MatrixXd sym = 0.5 * (cov + cov.transpose());
  if (sym.size() == 0) return sym;
  if (!sym.allFinite()) throw NumericalError("non-finite covariance (" + context + ")");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  if (lo < -tol) {
    std::ostringstream os;
    os << "covariance is not positive semidefinite (" << context << "): min eigenvalue " << lo;
    throw NumericalError(os.str());
  }
  return sym;
}

}  // namespace gfom
