#include "gfomlab/losses.hpp"

#include <cmath>

#include "gfomlab/error.hpp"

namespace gfom {

Loss Loss::squared() {
  return {"squared", [](double x) { return 0.5 * x * x; }, [](double x) { return x; },
          [](double) { return 1.0; }};
}

Loss Loss::squared_cos(double a) {
  return {"squared_cos", [a](double x) { return 0.5 * x * x + a * std::cos(x); },
          [a](double x) { return x - a * std::sin(x); },
          [a](double x) { return 1.0 - a * std::cos(x); }};
}

Loss Loss::logcosh() {
  return {"logcosh",
          [](double x) {
            const double ax = std::abs(x);
            return ax + std::log1p(std::exp(-2.0 * ax)) - std::log(2.0);
          },
          [](double x) { return std::tanh(x); },
          [](double x) {
            const double c = std::cosh(x);
            return 1.0 / (c * c);
          }};
}

Loss Loss::parse(const std::string& name) {
  if (name == "squared") return squared();
  if (name == "squared_cos") return squared_cos();
  if (name == "logcosh") return logcosh();
  throw ConfigError("unknown loss '" + name + "'");
}

double rho(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double rho_d1(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double rho_d2(double x) {
  const double s = rho_d1(x);
  return s * (1.0 - s);
}

}  // namespace gfom
