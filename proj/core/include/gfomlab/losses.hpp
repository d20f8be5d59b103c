#pragma once

#include <functional>
#include <string>

namespace gfom {

// Scalar loss L with its first two derivatives, evaluated at residuals.
struct Loss {
  std::string name;
  std::function<double(double)> value;
  std::function<double(double)> d1;
  std::function<double(double)> d2;

  // x^2 / 2.
  static Loss squared();
  // x^2 / 2 + a cos(x); non-convex for a > 1, smooth for all a.
  static Loss squared_cos(double a = 0.1);
  // log cosh(x): convex with bounded derivative.
  static Loss logcosh();

  static Loss parse(const std::string& name);
};

// Logistic link helpers: rho(x) = log(1 + e^x) and its derivatives.
double rho(double x);
double rho_d1(double x);
double rho_d2(double x);

}  // namespace gfom
