#pragma once

// Statistical kernel: least squares with coefficient inference, Welch two-sample test,
// Fisher-z correlation intervals and two-sample Kolmogorov-Smirnov test. Missing values
// are NaN and are removed listwise by each operation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bactree/distributions.hpp"
#include "bactree/error.hpp"

namespace bactree {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

struct Interval {
  double lower = 0;
  double upper = 0;
  bool contains(double x) const { return lower <= x && x <= upper; }
  double width() const { return upper - lower; }
};

struct TestResult {
  double statistic = 0;
  double p_value = 1;
  std::optional<double> df;
  std::optional<Interval> ci;
  double level = 0.95;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
};

// ---------------------------------------------------------------------------
// Ordinary least squares
// ---------------------------------------------------------------------------

struct OlsFit {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd standard_errors;
  Eigen::VectorXd t_stats;
  Eigen::VectorXd p_values;
  Eigen::VectorXd residuals;
  double r_squared = 0;
  double sigma2 = 0;  // RSS / (n - p)
  std::size_t n = 0;  // rows used
  std::size_t dropped = 0;
  std::vector<std::string> names;
};

/// Least squares of y on the columns of X (X carries its own intercept column).
/// Rows with a NaN in y or X are dropped. Two-sided p-values use t(n - p).
inline OlsFit ols(std::span<const double> y, const Eigen::MatrixXd& X, std::vector<std::string> names = {}) {
  if (static_cast<std::size_t>(X.rows()) != y.size()) throw Error("ols: y and X have different row counts");
  const auto p = static_cast<std::size_t>(X.cols());
  if (names.empty())
    for (std::size_t j = 0; j < p; ++j) names.push_back("x" + std::to_string(j));
  if (names.size() != p) throw Error("ols: one name per column required");

  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    if (!std::isnan(y[static_cast<std::size_t>(i)]) && !X.row(i).array().isNaN().any()) rows.push_back(i);
  const std::size_t n = rows.size();
  if (n <= p)
    throw DegenerateDataError("ols: " + std::to_string(n) + " complete rows for " + std::to_string(p) +
                              " coefficients");

  Eigen::MatrixXd A(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  Eigen::VectorXd b(static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) {
    A.row(static_cast<Eigen::Index>(k)) = X.row(rows[k]);
    b(static_cast<Eigen::Index>(k)) = y[static_cast<std::size_t>(rows[k])];
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  qr.setThreshold(1e-10);
  if (static_cast<std::size_t>(qr.rank()) < p) {
    std::string cols;
    const auto perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < static_cast<Eigen::Index>(p); ++k) {
      if (!cols.empty()) cols += ", ";
      cols += names[static_cast<std::size_t>(perm(k))];
    }
    throw RankDeficientError(cols, "ols: design is rank deficient; collinear column(s): " + cols);
  }

  OlsFit fit;
  fit.names = std::move(names);
  fit.n = n;
  fit.dropped = y.size() - n;
  fit.coefficients = qr.solve(b);
  fit.residuals = b - A * fit.coefficients;
  const double rss = fit.residuals.squaredNorm();
  const double dof = static_cast<double>(n - p);
  fit.sigma2 = rss / dof;

  const Eigen::MatrixXd xtx_inv =
      (A.transpose() * A).ldlt().solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p)));
  fit.standard_errors = (fit.sigma2 * xtx_inv.diagonal().array()).sqrt();
  fit.t_stats.resize(static_cast<Eigen::Index>(p));
  fit.p_values.resize(static_cast<Eigen::Index>(p));
  for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(p); ++j) {
    const double se = fit.standard_errors(j);
    const double c = fit.coefficients(j);
    if (se > 0) {
      fit.t_stats(j) = c / se;
      fit.p_values(j) = dist::student_t_two_sided(fit.t_stats(j), dof);
    } else {
      // Exact fit: any nonzero coefficient is infinitely significant.
      fit.t_stats(j) = c == 0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), c);
      fit.p_values(j) = c == 0 ? 1.0 : 0.0;
    }
  }
  const double ybar = b.mean();
  const double tss = (b.array() - ybar).square().sum();
  fit.r_squared = tss > 0 ? 1.0 - rss / tss : 1.0;
  return fit;
}

/// Design matrix [1, x1, x2, ...] from equally long columns.
inline Eigen::MatrixXd design_with_intercept(std::initializer_list<std::span<const double>> columns) {
  const std::size_t n = columns.size() == 0 ? 0 : columns.begin()->size();
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(columns.size() + 1));
  X.col(0).setOnes();
  Eigen::Index j = 1;
  for (auto col : columns) {
    if (col.size() != n) throw Error("design matrix columns differ in length");
    for (std::size_t i = 0; i < n; ++i) X(static_cast<Eigen::Index>(i), j) = col[i];
    ++j;
  }
  return X;
}

// ---------------------------------------------------------------------------
// Two-sample comparison of means
// ---------------------------------------------------------------------------

namespace stattests_detail {

inline std::vector<double> finite(std::span<const double> xs) {
  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs)
    if (!std::isnan(x)) out.push_back(x);
  return out;
}

struct Moments {
  double mean = 0;
  double var = 0;
};

inline Moments moments(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, s / static_cast<double>(v.size() - 1)};
}

}  // namespace stattests_detail

struct WelchResult {
  TestResult test;  // statistic t, Welch-Satterthwaite df, CI of mean(x) - mean(y)
  double mean_x = 0;
  double mean_y = 0;
  Interval mean_ci_x;
  Interval mean_ci_y;
};

/// Welch's unequal-variance t test of mean(x) = mean(y), with per-sample mean
/// intervals at `level`.
inline WelchResult student_two_sample(std::span<const double> xs, std::span<const double> ys, double level = 0.95) {
  using namespace stattests_detail;
  const auto x = finite(xs);
  const auto y = finite(ys);
  if (x.size() < 2 || y.size() < 2) throw DegenerateDataError("Welch test needs at least two values per sample");
  const auto mx = moments(x);
  const auto my = moments(y);
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  const double vx = mx.var / nx;
  const double vy = my.var / ny;
  const double se = std::sqrt(vx + vy);
  const double diff = mx.mean - my.mean;

  WelchResult out;
  out.mean_x = mx.mean;
  out.mean_y = my.mean;
  auto& t = out.test;
  t.level = level;
  t.n1 = x.size();
  t.n2 = y.size();
  if (se > 0) {
    const double df = (vx + vy) * (vx + vy) / (vx * vx / (nx - 1) + vy * vy / (ny - 1));
    t.df = df;
    t.statistic = diff / se;
    t.p_value = dist::student_t_two_sided(t.statistic, df);
    const double q = dist::student_t_critical(level, df);
    t.ci = Interval{diff - q * se, diff + q * se};
  } else {
    t.df = nx + ny - 2;
    t.statistic = diff == 0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
    t.p_value = diff == 0 ? 1.0 : 0.0;
    t.ci = Interval{diff, diff};
  }
  const double qx = dist::student_t_critical(level, nx - 1);
  const double qy = dist::student_t_critical(level, ny - 1);
  out.mean_ci_x = {mx.mean - qx * std::sqrt(vx), mx.mean + qx * std::sqrt(vx)};
  out.mean_ci_y = {my.mean - qy * std::sqrt(vy), my.mean + qy * std::sqrt(vy)};
  return out;
}

// ---------------------------------------------------------------------------
// Correlation
// ---------------------------------------------------------------------------

/// Pearson correlation of complete pairs with a Fisher-z interval
/// tanh(atanh(r) -/+ z / sqrt(n - 3)). The p-value tests rho = 0 with t(n - 2).
inline TestResult correlation_ci(std::span<const double> xs, std::span<const double> ys, double level = 0.95) {
  if (xs.size() != ys.size()) throw Error("correlation: samples must be paired");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (!std::isnan(xs[i]) && !std::isnan(ys[i])) {
      x.push_back(xs[i]);
      y.push_back(ys[i]);
    }
  const std::size_t n = x.size();
  if (n < 4) throw DegenerateDataError("correlation interval needs at least 4 complete pairs");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) throw DegenerateDataError("correlation undefined: a sample has zero variance");
  const double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);

  TestResult t;
  t.statistic = r;
  t.level = level;
  t.n1 = t.n2 = n;
  t.df = static_cast<double>(n - 2);
  if (1.0 - std::fabs(r) <= 1e-12) {  // exact linear relation up to rounding
    t.p_value = 0.0;
    t.ci = Interval{r, r};
    return t;
  }
  const double tt = r * std::sqrt(static_cast<double>(n - 2) / (1 - r * r));
  t.p_value = dist::student_t_two_sided(tt, static_cast<double>(n - 2));
  const double z = std::atanh(r);
  const double h = dist::normal_critical(level) / std::sqrt(static_cast<double>(n - 3));
  t.ci = Interval{std::tanh(z - h), std::tanh(z + h)};
  return t;
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov
// ---------------------------------------------------------------------------

/// Two-sample KS test: D = sup |F_x - F_y| over all sample points (right-continuous
/// empirical CDFs), asymptotic p-value Q((sqrt(ne) + 0.12 + 0.11/sqrt(ne)) D).
inline TestResult ks_two_sample(std::span<const double> xs, std::span<const double> ys) {
  auto x = stattests_detail::finite(xs);
  auto y = stattests_detail::finite(ys);
  if (x.empty() || y.empty()) throw DegenerateDataError("KS test needs two nonempty samples");
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
  }
  TestResult t;
  t.statistic = d;
  t.n1 = x.size();
  t.n2 = y.size();
  t.p_value = dist::kolmogorov_sf(dist::kolmogorov_lambda(d, nx * ny / (nx + ny)));
  return t;
}

/// One-sample KS test of values in [0, 1] against the uniform distribution.
inline TestResult ks_uniform(std::span<const double> us) {
  auto u = stattests_detail::finite(us);
  if (u.empty()) throw DegenerateDataError("KS uniformity test needs a nonempty sample");
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double f = std::clamp(u[i], 0.0, 1.0);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  TestResult t;
  t.statistic = d;
  t.n1 = u.size();
  t.p_value = dist::kolmogorov_sf(dist::kolmogorov_lambda(d, n));
  return t;
}

}  // namespace bactree
