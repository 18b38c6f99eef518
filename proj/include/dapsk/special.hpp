// Log-domain special functions used by the likelihoods.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "dapsk/common.hpp"

namespace dapsk {

/// log of the standard normal CDF. Finite down to about x = -1e150.
inline double log_normal_cdf(double x) {
  if (std::isnan(x)) return x;
  if (x > 0.0) return std::log1p(-0.5 * std::erfc(x / std::sqrt(2.0)));
  if (x > -20.0) return std::log(0.5 * std::erfc(-x / std::sqrt(2.0)));
  // Mills-ratio expansion: Phi(x) ~ phi(x)/|x| (1 - 1/x^2 + 3/x^4 - ...).
  const double inv2 = 1.0 / (x * x);
  double term = 1.0;
  double series = 1.0;
  for (int k = 1; k <= 6; ++k) {
    term *= -(2.0 * k - 1.0) * inv2;
    series += term;
  }
  return -0.5 * x * x - std::log(-x) - 0.5 * std::log(2.0 * kPi) + std::log(series);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

namespace detail {

inline double log_add(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log1p(std::exp(b - a));
}

// Power series sum_k (x/2)^(2k+nu) / (k! Gamma(k+nu+1)) accumulated in logs.
inline double log_bessel_i_series(double nu, double x) {
  const double lq = 2.0 * std::log(x / 2.0);
  double lt = nu * std::log(x / 2.0) - std::lgamma(nu + 1.0);
  double acc = lt;
  for (int k = 1; k < 100000; ++k) {
    lt += lq - std::log(static_cast<double>(k)) - std::log(k + nu);
    acc = log_add(acc, lt);
    if (lt - acc < -40.0 && k > x / 2.0) break;
  }
  return acc;
}

// Uniform (Debye) expansion in 1/nu, five correction terms.
inline double log_bessel_i_debye(double nu, double x) {
  const double z = x / nu;
  const double root = std::sqrt(1.0 + z * z);
  const double t = 1.0 / root;
  const double eta = root + std::log(z / (1.0 + root));
  const double t2 = t * t;
  const double u1 = t * (3.0 - 5.0 * t2) / 24.0;
  const double u2 = t2 * (81.0 - 462.0 * t2 + 385.0 * t2 * t2) / 1152.0;
  const double u3 = t * t2 * (30375.0 - 369603.0 * t2 + 765765.0 * t2 * t2 - 425425.0 * t2 * t2 * t2) /
                    414720.0;
  const double t4 = t2 * t2;
  const double u4 = t4 *
                    (4465125.0 - 94121676.0 * t2 + 349922430.0 * t4 - 446185740.0 * t4 * t2 +
                     185910725.0 * t4 * t4) /
                    39813120.0;
  const double u5 = t4 * t *
                    (1519035525.0 - 49286948607.0 * t2 + 284499769554.0 * t4 -
                     614135872350.0 * t4 * t2 + 566098157625.0 * t4 * t4 -
                     188699385875.0 * t4 * t4 * t2) /
                    6688604160.0;
  const double inv = 1.0 / nu;
  const double series = 1.0 + inv * (u1 + inv * (u2 + inv * (u3 + inv * (u4 + inv * u5))));
  return nu * eta - 0.5 * std::log(2.0 * kPi * nu) - 0.5 * std::log(root) + std::log(series);
}

// Large-argument expansion, valid for x >> nu^2.
inline double log_bessel_i_large_x(double nu, double x) {
  const double mu = 4.0 * nu * nu;
  double term = 1.0;
  double series = 1.0;
  for (int k = 1; k < 30; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= -(mu - odd * odd) / (k * 8.0 * x);
    series += term;
    if (std::abs(term) < 1e-17 * std::abs(series)) break;
  }
  return x - 0.5 * std::log(2.0 * kPi * x) + std::log(series);
}

}  // namespace detail

/// log I_nu(x) for nu >= 0, x > 0 without overflow; log I_nu(0) is 0 for nu = 0, -inf otherwise.
inline double log_bessel_i(double nu, double x) {
  require(nu >= 0.0 && x >= 0.0 && std::isfinite(nu), "log_bessel_i: need nu >= 0, x >= 0");
  if (x == 0.0) return nu == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  if (std::isinf(x)) return x;
  if (nu >= 20.0) return detail::log_bessel_i_debye(nu, x);
  if (x <= 2000.0) return detail::log_bessel_i_series(nu, x);
  return detail::log_bessel_i_large_x(nu, x);
}

}  // namespace dapsk
