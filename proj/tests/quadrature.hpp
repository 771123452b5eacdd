#pragma once

#include <cmath>

// Test-only numeric-integration oracle for Beta-distribution moments.
// tanh-sinh quadrature on (0, 1) handles the integrable endpoint
// singularities of x^(a-1) (1-x)^(b-1) for a, b > 0.5 comfortably.
namespace kgqr::testing {

template <typename F>
double tanh_sinh_01(F f, double step) {
  const double half_pi = 1.5707963267948966;
  double acc = 0.0;
  for (double t = -4.0; t <= 4.0; t += step) {
    double s = std::sinh(t);
    double x = 0.5 * (1.0 + std::tanh(half_pi * s));
    double w = 0.5 * half_pi * std::cosh(t) / std::pow(std::cosh(half_pi * s), 2);
    if (x <= 0.0 || x >= 1.0 || !std::isfinite(w)) continue;
    acc += w * f(x);
  }
  return acc * step;
}

// Var(Beta(a, b)) via raw moments, no Gamma functions involved.
inline double beta_variance_by_quadrature(double a, double b, double step = 5e-3) {
  auto kernel = [&](double x) { return std::pow(x, a - 1.0) * std::pow(1.0 - x, b - 1.0); };
  double m0 = tanh_sinh_01([&](double x) { return kernel(x); }, step);
  double m1 = tanh_sinh_01([&](double x) { return x * kernel(x); }, step);
  double m2 = tanh_sinh_01([&](double x) { return x * x * kernel(x); }, step);
  double mean = m1 / m0;
  return m2 / m0 - mean * mean;
}

// KL(Beta(a1,b1) || Beta(a2,b2)) by direct integration of the log-density
// ratio under the first distribution.
inline double beta_kl_by_quadrature(double a1, double b1, double a2, double b2,
                                    double step = 5e-3) {
  auto kernel = [](double a, double b, double x) {
    return std::pow(x, a - 1.0) * std::pow(1.0 - x, b - 1.0);
  };
  double z1 = tanh_sinh_01([&](double x) { return kernel(a1, b1, x); }, step);
  double z2 = tanh_sinh_01([&](double x) { return kernel(a2, b2, x); }, step);
  double cross = tanh_sinh_01(
      [&](double x) {
        double p = kernel(a1, b1, x) / z1;
        return p * ((a1 - a2) * std::log(x) + (b1 - b2) * std::log(1.0 - x));
      },
      step);
  return cross + std::log(z2 / z1);
}

}  // namespace kgqr::testing
