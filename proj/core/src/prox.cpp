#include "gfomlab/prox.hpp"

#include <cmath>
#include <sstream>

#include "gfomlab/error.hpp"

namespace gfom {

ProxSpec ProxSpec::zero() { return ProxSpec{}; }

ProxSpec ProxSpec::ridge(double lambda) {
  if (!(lambda >= 0.0)) throw ValidationError("ridge: lambda must be nonnegative");
  ProxSpec p;
  p.kind = Kind::ridge;
  p.lambda = lambda;
  return p;
}

ProxSpec ProxSpec::lasso(double lambda) {
  if (!(lambda >= 0.0)) throw ValidationError("lasso: lambda must be nonnegative");
  ProxSpec p;
  p.kind = Kind::lasso;
  p.lambda = lambda;
  return p;
}

ProxSpec ProxSpec::smooth_custom(std::function<double(double)> f,
                                 std::function<double(double)> df,
                                 std::function<double(double)> d2f, double alpha,
                                 std::string label) {
  if (!df || !d2f) throw ConfigError("smooth_custom requires f' and f''");
  if (!(alpha >= 0.0)) throw ValidationError("smooth_custom: alpha must be nonnegative");
  ProxSpec p;
  p.kind = Kind::smooth_custom;
  p.f = std::move(f);
  p.df = std::move(df);
  p.d2f = std::move(d2f);
  p.alpha = alpha;
  p.label = std::move(label);
  return p;
}

std::string ProxSpec::name() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::zero: return "zero";
    case Kind::ridge: os << "ridge(" << lambda << ")"; break;
    case Kind::lasso: os << "lasso(" << lambda << ")"; break;
    case Kind::smooth_custom: os << "smooth_custom(" << label << ")"; break;
  }
  return os.str();
}

namespace {

// Root of g(w) = w - x + eta f'(w), which is strictly increasing for convex f.
double custom_prox(const ProxSpec& p, double eta, double x) {
  auto g = [&](double w) { return w - x + eta * p.df(w); };
  double lo = x;
  double hi = x;
  double step = 1.0 + std::abs(x);
  double glo = g(lo);
  double ghi = glo;
  if (glo == 0.0) return x;
  // Bracket the root; g(x) has the sign of f'(x).
  int guard = 0;
  if (glo > 0.0) {
    while (glo > 0.0) {
      hi = lo;
      ghi = glo;
      lo -= step;
      step *= 2.0;
      glo = g(lo);
      if (++guard > 200) throw NumericalError("prox: failed to bracket root");
    }
  } else {
    while (ghi < 0.0) {
      lo = hi;
      glo = ghi;
      hi += step;
      step *= 2.0;
      ghi = g(hi);
      if (++guard > 200) throw NumericalError("prox: failed to bracket root");
    }
  }
  double w = 0.5 * (lo + hi);
  for (int it = 0; it < 100; ++it) {
    const double gw = g(w);
    if (std::abs(gw) <= 1e-12 * (1.0 + std::abs(x))) return w;
    if (gw > 0.0) {
      hi = w;
    } else {
      lo = w;
    }
    const double slope = 1.0 + eta * p.d2f(w);
    double next = w - gw / slope;
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    if (std::abs(next - w) <= 1e-15 * (1.0 + std::abs(w))) return next;
    w = next;
  }
  throw NumericalError("prox: Newton iteration did not converge in 100 steps");
}

}  // namespace

double ProxSpec::eval(double eta, double x) const {
  switch (kind) {
    case Kind::zero: return x;
    case Kind::ridge: return x / (1.0 + eta * lambda);
    case Kind::lasso: {
      const double t = eta * lambda;
      if (x > t) return x - t;
      if (x < -t) return x + t;
      return 0.0;
    }
    case Kind::smooth_custom: return custom_prox(*this, eta, x);
  }
  return x;
}

double ProxSpec::derivative(double eta, double x) const {
  switch (kind) {
    case Kind::zero: return 1.0;
    case Kind::ridge: return 1.0 / (1.0 + eta * lambda);
    case Kind::lasso: return std::abs(x) > eta * lambda ? 1.0 : 0.0;
    case Kind::smooth_custom: {
      const double w = custom_prox(*this, eta, x);
      return 1.0 / (1.0 + eta * d2f(w));
    }
  }
  return 1.0;
}

double ProxSpec::inverse(double eta, double w) const {
  switch (kind) {
    case Kind::zero: return w;
    case Kind::ridge: return w * (1.0 + eta * lambda);
    case Kind::lasso:
      if (w > 0.0) return w + eta * lambda;
      if (w < 0.0) return w - eta * lambda;
      return 0.0;
    case Kind::smooth_custom: return w + eta * df(w);
  }
  return w;
}

double ProxSpec::lipschitz(double eta) const { return 1.0 / (1.0 + eta * strong_convexity()); }

double ProxSpec::strong_convexity() const {
  switch (kind) {
    case Kind::ridge: return lambda;
    case Kind::smooth_custom: return alpha;
    default: return 0.0;
  }
}

double ProxSpec::value(double w) const {
  switch (kind) {
    case Kind::zero: return 0.0;
    case Kind::ridge: return 0.5 * lambda * w * w;
    case Kind::lasso: return lambda * std::abs(w);
    case Kind::smooth_custom: return f ? f(w) : 0.0;
  }
  return 0.0;
}

double ProxSpec::gradient(double w) const {
  switch (kind) {
    case Kind::zero: return 0.0;
    case Kind::ridge: return lambda * w;
    case Kind::lasso: return w > 0.0 ? lambda : (w < 0.0 ? -lambda : 0.0);
    case Kind::smooth_custom: return df(w);
  }
  return 0.0;
}

}  // namespace gfom
