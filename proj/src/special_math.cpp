#include "kgqr/special_math.hpp"

#include <cassert>
#include <cmath>

namespace kgqr {

namespace {

constexpr double kHalfLogTwoPi = 0.91893853320467274178;  // ln(2*pi)/2

// Stirling series for ln Gamma, valid for large y:
//   (y - 1/2) ln y - y + ln(2*pi)/2 + sum B_{2n} / (2n (2n-1) y^{2n-1})
double log_gamma_asymptotic(double y) {
  const double r = 1.0 / y;
  const double r2 = r * r;
  double series = r * (1.0 / 12.0 + r2 * (-1.0 / 360.0 + r2 * (1.0 / 1260.0 + r2 * (-1.0 / 1680.0 + r2 * (1.0 / 1188.0 + r2 * (-691.0 / 360360.0 + r2 * (1.0 / 156.0)))))));
  return (y - 0.5) * std::log(y) - y + kHalfLogTwoPi + series;
}

// psi(y) ~ ln y - 1/(2y) - sum B_{2n} / (2n y^{2n})
double digamma_asymptotic(double y) {
  const double r2 = 1.0 / (y * y);
  double series = r2 * (1.0 / 12.0 + r2 * (-1.0 / 120.0 + r2 * (1.0 / 252.0 + r2 * (-1.0 / 240.0 + r2 * (1.0 / 132.0 + r2 * (-691.0 / 32760.0 + r2 * (1.0 / 12.0)))))));
  return std::log(y) - 0.5 / y - series;
}

// psi'(y) ~ 1/y + 1/(2y^2) + sum B_{2n} / y^{2n+1}
double trigamma_asymptotic(double y) {
  const double r = 1.0 / y;
  const double r2 = r * r;
  double series = r * r2 * (1.0 / 6.0 + r2 * (-1.0 / 30.0 + r2 * (1.0 / 42.0 + r2 * (-1.0 / 30.0 + r2 * (5.0 / 66.0 + r2 * (-691.0 / 2730.0 + r2 * (7.0 / 6.0)))))));
  return r + 0.5 * r2 + series;
}

}  // namespace

double log_gamma(double x) {
  assert(x > 0.0);
  double shift = 0.0;
  double y = x;
  while (y < 10.0) {
    shift += std::log(y);
    y += 1.0;
  }
  return log_gamma_asymptotic(y) - shift;
}

double digamma(double x) {
  assert(x > 0.0);
  double shift = 0.0;
  double y = x;
  while (y < 6.0) {
    shift += 1.0 / y;
    y += 1.0;
  }
  return digamma_asymptotic(y) - shift;
}

double trigamma(double x) {
  assert(x > 0.0);
  double shift = 0.0;
  double y = x;
  while (y < 6.0) {
    shift += 1.0 / (y * y);
    y += 1.0;
  }
  return trigamma_asymptotic(y) + shift;
}

}  // namespace kgqr
