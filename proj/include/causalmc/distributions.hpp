#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace causalmc {

// Student-t and F cumulative distribution functions via the regularized
// incomplete beta function (continued fraction evaluation).
namespace dist {

namespace detail {

inline double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kFpMin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("incomplete_beta: a, b must be > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::betacf(a, b, x) / a;
  return 1.0 - front * detail::betacf(b, a, 1.0 - x) / b;
}

inline double t_cdf(double x, double nu) {
  if (!(nu > 0.0)) throw std::invalid_argument("t_cdf: nu must be > 0");
  if (std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
  const double tail = 0.5 * incomplete_beta(nu / 2.0, 0.5, nu / (nu + x * x));
  return x >= 0.0 ? 1.0 - tail : tail;
}

inline double f_cdf(double x, double d1, double d2) {
  if (!(d1 > 0.0) || !(d2 > 0.0)) throw std::invalid_argument("f_cdf: dof must be > 0");
  if (x <= 0.0) return 0.0;
  return incomplete_beta(d1 / 2.0, d2 / 2.0, d1 * x / (d1 * x + d2));
}

// Two-sided p-values.
inline double t_two_sided_p(double stat, double nu) {
  return 2.0 * (1.0 - t_cdf(std::abs(stat), nu));
}

inline double f_two_sided_p(double stat, double d1, double d2) {
  const double c = f_cdf(stat, d1, d2);
  return 2.0 * std::min(c, 1.0 - c);
}

}  // namespace dist

}  // namespace causalmc
