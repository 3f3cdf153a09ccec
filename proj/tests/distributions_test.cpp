#include "bactree/distributions.hpp"

#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numbers>

using namespace bactree::dist;

namespace {

double t_density(double x, double df) {
  return std::exp(std::lgamma(0.5 * (df + 1)) - std::lgamma(0.5 * df) - 0.5 * std::log(df * std::numbers::pi) -
                  0.5 * (df + 1) * std::log1p(x * x / df));
}

// Oracle: P(T > t) by adaptive Gauss-Kronrod quadrature of the density.
double t_upper_tail_quadrature(double t, double df) {
  using boost::math::quadrature::gauss_kronrod;
  return gauss_kronrod<double, 61>::integrate([df](double x) { return t_density(x, df); }, t,
                                              std::numeric_limits<double>::infinity(), 15, 1e-13);
}

// Oracle: Kolmogorov CDF through the theta-function series, summed to machine precision.
double kolmogorov_theta_sf(double lambda) {
  const double c = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
  double s = 0;
  for (int k = 1; k < 200; ++k) s += std::exp(-(2.0 * k - 1) * (2.0 * k - 1) * c);
  return 1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s;
}

}  // namespace

TEST(Normal, QuantileInvertsCdf) {
  for (double p = 1e-12; p < 1; p = p < 0.01 ? p * 10 : p + 0.01) {
    const double x = normal_quantile(p);
    EXPECT_NEAR(normal_cdf(x), p, 1e-14 + 1e-12 * p) << p;
  }
  EXPECT_NEAR(normal_critical(0.95), 1.959963984540054, 1e-13);
  EXPECT_NEAR(normal_critical(0.99), 2.5758293035489004, 1e-13);
  EXPECT_EQ(normal_quantile(0.5), 0.0);
  EXPECT_EQ(normal_quantile(0.0), -std::numeric_limits<double>::infinity());
  EXPECT_THROW(normal_quantile(-0.1), bactree::Error);
  EXPECT_THROW(normal_critical(1.0), bactree::Error);
}

TEST(StudentT, CdfMatchesQuadratureOnGrid) {
  for (double df : {1.0, 2.0, 3.0, 5.0, 7.5, 10.0, 30.0, 100.0, 1000.0})
    for (double t = -8.0; t <= 8.0; t += 0.25) {
      const double upper = t >= 0 ? t_upper_tail_quadrature(t, df) : 1.0 - t_upper_tail_quadrature(-t, df);
      EXPECT_NEAR(student_t_cdf(t, df), 1.0 - upper, 1e-8) << "df=" << df << " t=" << t;
      if (t >= 0) {
        EXPECT_NEAR(student_t_two_sided(t, df), 2 * upper, 1e-8) << "df=" << df << " t=" << t;
      }
    }
}

TEST(StudentT, FarTailRelativeAccuracy) {
  for (double df : {3.0, 10.0, 50.0})
    for (double t : {10.0, 20.0, 40.0}) {
      const double oracle = 2 * t_upper_tail_quadrature(t, df);
      EXPECT_NEAR(student_t_two_sided(t, df) / oracle, 1.0, 1e-7) << df << " " << t;
    }
}

TEST(StudentT, KnownValuesAndLimits) {
  // Cauchy: P(|T| >= 1) = 1/2.
  EXPECT_NEAR(student_t_two_sided(1.0, 1.0), 0.5, 1e-14);
  EXPECT_EQ(student_t_two_sided(0.0, 7.0), 1.0);
  EXPECT_EQ(student_t_two_sided(std::numeric_limits<double>::infinity(), 7.0), 0.0);
  // Reference quantiles computed to 40 digits with mpmath.
  EXPECT_NEAR(student_t_critical(0.95, 10.0), 2.2281388519862747, 1e-13);
  EXPECT_NEAR(student_t_critical(0.99, 4.0), 4.6040948713499932, 1e-12);
  EXPECT_NEAR(student_t_two_sided(2.0, std::numeric_limits<double>::infinity()), std::erfc(2.0 / std::numbers::sqrt2),
              1e-15);
}

TEST(StudentT, QuantileInvertsCdf) {
  for (double df : {1.0, 2.5, 6.0, 40.0, 1e5})
    for (double p : {1e-10, 1e-4, 0.01, 0.2, 0.5, 0.7, 0.975, 0.999999}) {
      const double q = student_t_quantile(p, df);
      EXPECT_NEAR(student_t_cdf(q, df), p, 1e-12 + 1e-9 * p) << df << " " << p;
    }
}

TEST(IncompleteBeta, SymmetryAndEndpoints) {
  for (double a : {0.5, 1.0, 2.5, 30.0})
    for (double b : {0.5, 3.0, 12.0})
      for (double x = 0.05; x < 1; x += 0.1) {
        EXPECT_NEAR(regularized_beta(a, b, x) + regularized_beta(b, a, 1 - x), 1.0, 1e-13);
      }
  EXPECT_EQ(regularized_beta(2, 3, 0.0), 0.0);
  EXPECT_EQ(regularized_beta(2, 3, 1.0), 1.0);
  // I_x(1, 1) = x and I_x(a, 1) = x^a.
  EXPECT_NEAR(regularized_beta(1, 1, 0.3), 0.3, 1e-15);
  EXPECT_NEAR(regularized_beta(4, 1, 0.6), std::pow(0.6, 4), 1e-15);
}

TEST(Kolmogorov, TailMatchesThetaForm) {
  for (double lambda = 0.05; lambda <= 3.0; lambda += 0.01)
    EXPECT_NEAR(kolmogorov_sf(lambda), kolmogorov_theta_sf(lambda), 1e-8) << lambda;
  EXPECT_EQ(kolmogorov_sf(0.0), 1.0);
  EXPECT_LT(kolmogorov_sf(10.0), 1e-80);
}

TEST(Kolmogorov, TailIsMonotone) {
  double prev = 1.0;
  for (double lambda = 0.01; lambda <= 4.0; lambda += 0.005) {
    const double q = kolmogorov_sf(lambda);
    EXPECT_LE(q, prev + 1e-15);
    prev = q;
  }
}
