#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "bactree/error.hpp"

namespace bactree::dist {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

/// Inverse of the standard normal CDF: Acklam's rational approximation followed by
/// one Halley step against erfc, giving close to full double precision.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw Error("normal quantile: probability outside [0, 1]");
  }
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= 1 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    const double q = std::sqrt(-2 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1 + 0.5 * x * u);
}

/// Two-sided critical value z with P(|Z| <= z) = level.
inline double normal_critical(double level) {
  if (!(level > 0.0 && level < 1.0)) throw Error("confidence level must lie in (0, 1)");
  return normal_quantile(0.5 + 0.5 * level);
}

namespace detail {

// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  constexpr int max_iter = 20000;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) return h;
  }
  throw Error("incomplete beta continued fraction did not converge");
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b). `y` must equal 1 - x; passing it separately
/// keeps precision when x is close to 1.
inline double regularized_beta(double a, double b, double x, double y) {
  if (!(a > 0 && b > 0)) throw Error("incomplete beta: parameters must be positive");
  if (x <= 0.0) return 0.0;
  if (y <= 0.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log(y);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * detail::beta_continued_fraction(b, a, y) / b;
}

inline double regularized_beta(double a, double b, double x) { return regularized_beta(a, b, x, 1.0 - x); }

/// P(|T| >= |t|) for Student's t with `df` degrees of freedom.
inline double student_t_two_sided(double t, double df) {
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return 0.0;
  if (std::isinf(df)) return std::erfc(std::fabs(t) / std::numbers::sqrt2);
  const double t2 = t * t;
  return regularized_beta(0.5 * df, 0.5, df / (df + t2), t2 / (df + t2));
}

inline double student_t_cdf(double t, double df) {
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double tail = 0.5 * student_t_two_sided(t, df);
  return t > 0 ? 1.0 - tail : tail;
}

/// Quantile of Student's t by safeguarded Newton iteration on the CDF.
inline double student_t_quantile(double p, double df) {
  if (!(p > 0.0 && p < 1.0)) throw Error("t quantile: probability must lie in (0, 1)");
  if (std::isinf(df)) return normal_quantile(p);
  if (p == 0.5) return 0.0;
  // Work in the lower tail for precision, then mirror.
  const bool upper = p > 0.5;
  const double target = upper ? 1.0 - p : p;
  double hi = 0.0;
  double lo = std::min(normal_quantile(target), -1.0);
  while (student_t_cdf(lo, df) > target) lo *= 2.0;
  double x = 0.5 * (lo + hi);
  const double log_norm = std::lgamma(0.5 * (df + 1)) - std::lgamma(0.5 * df) - 0.5 * std::log(df * std::numbers::pi);
  for (int it = 0; it < 200; ++it) {
    const double f = student_t_cdf(x, df) - target;
    if (f > 0)
      hi = x;
    else
      lo = x;
    const double pdf = std::exp(log_norm - 0.5 * (df + 1) * std::log1p(x * x / df));
    double next = x - f / pdf;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::fabs(next - x) <= 1e-15 * std::max(1.0, std::fabs(x))) {
      x = next;
      break;
    }
    x = next;
  }
  return upper ? -x : x;
}

/// Two-sided critical value with P(|T| <= q) = level.
inline double student_t_critical(double level, double df) {
  if (!(level > 0.0 && level < 1.0)) throw Error("confidence level must lie in (0, 1)");
  return student_t_quantile(0.5 + 0.5 * level, df);
}

/// Kolmogorov distribution tail Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2),
/// truncated once a term drops below 1e-12. For lambda < 0.2 the series cancels badly and
/// the equivalent theta-function form of the CDF is used instead.
inline double kolmogorov_sf(double lambda) {
  if (std::isnan(lambda)) return std::numeric_limits<double>::quiet_NaN();
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) {
    // P(K <= lambda) = sqrt(2 pi)/lambda * sum exp(-(2k-1)^2 pi^2 / (8 lambda^2)); < 1e-60 here.
    const double c = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double cdf = 0.0;
    for (int k = 1; k < 10; ++k) cdf += std::exp(-(2.0 * k - 1) * (2.0 * k - 1) * c);
    return 1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * cdf;
  }
  const double a = -2.0 * lambda * lambda;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 1000; ++k) {
    const double term = std::exp(a * k * k);
    sum += sign * term;
    if (term < 1e-12) break;
    sign = -sign;
  }
  const double q = 2.0 * sum;
  return q < 0.0 ? 0.0 : (q > 1.0 ? 1.0 : q);
}

/// Small-sample corrected argument of the Kolmogorov tail for an effective size `ne`.
inline double kolmogorov_lambda(double d, double ne) {
  const double s = std::sqrt(ne);
  return (s + 0.12 + 0.11 / s) * d;
}

}  // namespace bactree::dist
