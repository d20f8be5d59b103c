#include "gfomlab/ensembles.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gfomlab/error.hpp"

namespace gfom {

EntryLaw EntryLaw::shifted_bernoulli(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw ValidationError("shifted_bernoulli: p must lie in (0, 1)");
  }
  return {Kind::shifted_bernoulli, p};
}

std::string EntryLaw::name() const {
  switch (kind) {
    case Kind::gaussian: return "gaussian";
    case Kind::rademacher: return "rademacher";
    case Kind::uniform_pm: return "uniform_pm";
    case Kind::shifted_bernoulli: {
      std::ostringstream os;
      os << "shifted_bernoulli(" << p << ")";
      return os.str();
    }
  }
  return "unknown";
}

EntryLaw EntryLaw::parse(const std::string& name, double p) {
  if (name == "gaussian") return gaussian();
  if (name == "rademacher") return rademacher();
  if (name == "uniform_pm") return uniform_pm();
  if (name == "shifted_bernoulli") return shifted_bernoulli(p);
  throw ConfigError("unknown entry law '" + name + "'");
}

double EntryLaw::third_moment() const {
  if (kind != Kind::shifted_bernoulli) return 0.0;
  const double lo = -std::sqrt((1.0 - p) / p);
  const double hi = std::sqrt(p / (1.0 - p));
  return p * lo * lo * lo + (1.0 - p) * hi * hi * hi;
}

double EntrySampler::operator()() {
  switch (law_.kind) {
    case EntryLaw::Kind::gaussian: {
      double x = normal_(eng_);
      if (clip_) x = std::clamp(x, -*clip_, *clip_);
      return x;
    }
    case EntryLaw::Kind::rademacher:
      return (eng_() >> 63) ? 1.0 : -1.0;
    case EntryLaw::Kind::uniform_pm:
      // Uniform on [-sqrt(3), sqrt(3)] has unit variance.
      return std::sqrt(3.0) * (2.0 * uniform_open01(eng_) - 1.0);
    case EntryLaw::Kind::shifted_bernoulli: {
      const double p = law_.p;
      return uniform_open01(eng_) < p ? -std::sqrt((1.0 - p) / p) : std::sqrt(p / (1.0 - p));
    }
  }
  return 0.0;
}

VarianceProfile VarianceProfile::constant(std::size_t rows, std::size_t cols, double value) {
  VarianceProfile p;
  p.rows_ = rows;
  p.cols_ = cols;
  p.value_ = value;
  return p;
}

VarianceProfile VarianceProfile::dense(Eigen::MatrixXd values) {
  VarianceProfile p;
  p.rows_ = static_cast<std::size_t>(values.rows());
  p.cols_ = static_cast<std::size_t>(values.cols());
  p.dense_ = std::move(values);
  return p;
}

VarianceProfile VarianceProfile::from_function(
    std::size_t rows, std::size_t cols, const std::function<double(std::size_t, std::size_t)>& fn) {
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t j = 0; j < cols; ++j)
    for (std::size_t i = 0; i < rows; ++i)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = fn(i, j);
  return dense(std::move(m));
}

Eigen::MatrixXd VarianceProfile::matrix() const {
  if (dense_) return *dense_;
  return Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(rows_),
                                   static_cast<Eigen::Index>(cols_), value_);
}

VarianceProfile VarianceProfile::scaled(double factor) const {
  VarianceProfile p = *this;
  if (p.dense_) {
    *p.dense_ *= factor;
  } else {
    p.value_ *= factor;
  }
  return p;
}

void VarianceProfile::validate(bool symmetric) const {
  if (dense_) {
    if (!dense_->allFinite()) throw ValidationError("variance profile has non-finite entries");
    if ((dense_->array() < 0.0).any()) {
      throw ValidationError("variance profile has negative entries");
    }
    if (symmetric) {
      if (rows_ != cols_) throw ConfigError("symmetric variance profile must be square");
      if (!(dense_->transpose().array() == dense_->array()).all()) {
        throw ValidationError("symmetric variance profile is not symmetric");
      }
    }
  } else {
    if (!std::isfinite(value_) || value_ < 0.0) {
      throw ValidationError("variance profile value must be finite and nonnegative");
    }
    if (symmetric && rows_ != cols_) throw ConfigError("symmetric variance profile must be square");
  }
}

Eigen::VectorXd VarianceProfile::apply(const Eigen::VectorXd& x) const {
  if (dense_) return (*dense_) * x;
  return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(rows_), value_ * x.sum());
}

Eigen::VectorXd VarianceProfile::apply_transpose(const Eigen::VectorXd& x) const {
  if (dense_) return dense_->transpose() * x;
  return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(cols_), value_ * x.sum());
}

bool VarianceProfile::operator==(const VarianceProfile& other) const {
  if (rows_ != other.rows_ || cols_ != other.cols_) return false;
  if (is_constant() != other.is_constant()) return false;
  if (is_constant()) return value_ == other.value_;
  return *dense_ == *other.dense_;
}

std::string to_string(Normalization n) {
  switch (n) {
    case Normalization::inv_sqrt_n: return "inv_sqrt_n";
    case Normalization::inv_sqrt_m: return "inv_sqrt_m";
    case Normalization::inv_sqrt_m_plus_n: return "inv_sqrt_m_plus_n";
  }
  return "unknown";
}

Normalization parse_normalization(const std::string& s) {
  if (s == "inv_sqrt_n") return Normalization::inv_sqrt_n;
  if (s == "inv_sqrt_m") return Normalization::inv_sqrt_m;
  if (s == "inv_sqrt_m_plus_n") return Normalization::inv_sqrt_m_plus_n;
  throw ConfigError("unknown normalization '" + s + "'");
}

void EnsembleSpec::validate(std::size_t rows, std::size_t cols) const {
  if (rows == 0 || cols == 0) throw ValidationError("matrix dimensions must be positive");
  if (profile.rows() != rows || profile.cols() != cols) {
    std::ostringstream os;
    os << "variance profile shape (" << profile.rows() << "," << profile.cols()
       << ") does not match requested (" << rows << "," << cols << ")";
    throw ConfigError(os.str());
  }
  if (symmetric) {
    if (rows != cols) throw ConfigError("symmetric ensemble requires a square shape");
    if (normalization != Normalization::inv_sqrt_n) {
      throw ConfigError("symmetric ensemble requires inv_sqrt_n normalization");
    }
  } else if (normalization == Normalization::inv_sqrt_n) {
    throw ConfigError("asymmetric ensemble requires inv_sqrt_m or inv_sqrt_m_plus_n");
  }
  if (truncation && !(*truncation > 0.0)) throw ValidationError("truncation constant must be positive");
  profile.validate(symmetric);
}

double EnsembleSpec::denominator(std::size_t rows, std::size_t cols) const {
  switch (normalization) {
    case Normalization::inv_sqrt_n: return std::sqrt(static_cast<double>(cols));
    case Normalization::inv_sqrt_m: return std::sqrt(static_cast<double>(rows));
    case Normalization::inv_sqrt_m_plus_n: return std::sqrt(static_cast<double>(rows + cols));
  }
  return 1.0;
}

VarianceProfile EnsembleSpec::second_moments() const {
  const double d = denominator(profile.rows(), profile.cols());
  return profile.scaled(1.0 / (d * d));
}

EnsembleSpec EnsembleSpec::wigner(std::size_t n, EntryLaw law) {
  EnsembleSpec s;
  s.law = law;
  s.profile = VarianceProfile::constant(n, n, 1.0);
  s.normalization = Normalization::inv_sqrt_n;
  s.symmetric = true;
  return s;
}

EnsembleSpec EnsembleSpec::rectangular(std::size_t m, std::size_t n, EntryLaw law) {
  EnsembleSpec s;
  s.law = law;
  s.profile = VarianceProfile::constant(m, n, 1.0);
  s.normalization = Normalization::inv_sqrt_m;
  s.symmetric = false;
  return s;
}

namespace {

std::optional<double> clip_level(const EnsembleSpec& spec, std::size_t dim) {
  if (!spec.truncation || spec.law.kind != EntryLaw::Kind::gaussian) return std::nullopt;
  return *spec.truncation * std::sqrt(std::log(static_cast<double>(std::max<std::size_t>(dim, 2))));
}

}  // namespace

Eigen::MatrixXd sample_symmetric(const EnsembleSpec& spec, std::size_t n, std::uint64_t seed) {
  if (!spec.symmetric) throw ConfigError("sample_symmetric called with an asymmetric spec");
  spec.validate(n, n);
  const double scale = 1.0 / spec.denominator(n, n);
  const auto clip = clip_level(spec, n);
  const auto N = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd a(N, N);
  for (Eigen::Index i = 0; i < N; ++i) {
    EntrySampler draw(spec.law, derive_seed(seed, static_cast<std::uint64_t>(i)), clip);
    for (Eigen::Index j = i; j < N; ++j) {
      const double sd = std::sqrt(spec.profile.at(static_cast<std::size_t>(i),
                                                  static_cast<std::size_t>(j)));
      const double x = draw() * sd * scale;
      a(i, j) = x;
      a(j, i) = x;
    }
  }
  return a;
}

Eigen::MatrixXd sample_asymmetric(const EnsembleSpec& spec, std::size_t m, std::size_t n,
                                  std::uint64_t seed) {
  if (spec.symmetric) throw ConfigError("sample_asymmetric called with a symmetric spec");
  spec.validate(m, n);
  const double scale = 1.0 / spec.denominator(m, n);
  const auto clip = clip_level(spec, std::max(m, n));
  const auto M = static_cast<Eigen::Index>(m);
  const auto N = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd a(M, N);
  for (Eigen::Index i = 0; i < M; ++i) {
    EntrySampler draw(spec.law, derive_seed(seed, static_cast<std::uint64_t>(i)), clip);
    for (Eigen::Index j = 0; j < N; ++j) {
      const double sd = std::sqrt(spec.profile.at(static_cast<std::size_t>(i),
                                                  static_cast<std::size_t>(j)));
      a(i, j) = draw() * sd * scale;
    }
  }
  return a;
}

Eigen::MatrixXd sample_matrix(const EnsembleSpec& spec, std::size_t m, std::size_t n,
                              std::uint64_t seed) {
  return spec.symmetric ? sample_symmetric(spec, n, seed) : sample_asymmetric(spec, m, n, seed);
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> matched_pair(const EnsembleSpec& spec_a,
                                                         const EntryLaw& law_b, std::size_t m,
                                                         std::size_t n, std::uint64_t seed) {
  EnsembleSpec spec_b = spec_a;
  spec_b.law = law_b;
  return {sample_matrix(spec_a, m, n, derive_seed(seed, 0)),
          sample_matrix(spec_b, m, n, derive_seed(seed, 1))};
}

}  // namespace gfom
