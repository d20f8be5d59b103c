#pragma once

#include <functional>
#include <string>

namespace gfom {

// Separable regularizer f with its scalar proximal map
// prox_{eta f}(x) = argmin_w { (x - w)^2 / 2 + eta f(w) }.
struct ProxSpec {
  enum class Kind { zero, ridge, lasso, smooth_custom };

  Kind kind = Kind::zero;
  double lambda = 0.0;
  // smooth_custom only: f, f', f'' and a strong-convexity modulus alpha >= 0.
  std::function<double(double)> f;
  std::function<double(double)> df;
  std::function<double(double)> d2f;
  double alpha = 0.0;
  std::string label;

  static ProxSpec zero();
  static ProxSpec ridge(double lambda);
  static ProxSpec lasso(double lambda);
  static ProxSpec smooth_custom(std::function<double(double)> f, std::function<double(double)> df,
                                std::function<double(double)> d2f, double alpha,
                                std::string label = "custom");

  std::string name() const;

  // Throws NumericalError when the Newton solve for smooth_custom stalls.
  double eval(double eta, double x) const;
  // d prox / dx (a.e. for lasso).
  double derivative(double eta, double x) const;
  // A point x with prox(x) = w. For lasso at w = 0 this is 0.
  double inverse(double eta, double w) const;
  // Upper bound on the Lipschitz constant of prox_{eta f}: 1 / (1 + eta alpha).
  double lipschitz(double eta) const;
  // Strong-convexity modulus of f (lambda for ridge, alpha for custom).
  double strong_convexity() const;
  // f(w) and f'(w) (subgradient 0 at the lasso kink).
  double value(double w) const;
  double gradient(double w) const;
};

}  // namespace gfom
