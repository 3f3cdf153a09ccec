#pragma once

// ARMA(1,1) fitting by conditional sum of squares:
//   e_t = (x_t - mu) - phi (x_{t-1} - mu) - theta e_{t-1},  e_0 = 0, x_0 - mu = 0.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "bactree/error.hpp"
#include "bactree/optimize.hpp"

namespace bactree {

struct Arma11Fit {
  double phi = 0;
  double theta = 0;
  double intercept = 0;  // mu, the process mean
  std::vector<double> residuals;
  double css = 0;
  std::size_t evaluations = 0;
};

struct Arma11Options {
  double bound = 0.99;  // search box |phi|, |theta| <= bound
  NelderMeadOptions simplex{};
};

/// Residuals e_1..e_T for given parameters.
inline std::vector<double> arma11_residuals(std::span<const double> x, double phi, double theta, double mu) {
  std::vector<double> e(x.size());
  double prev_dev = 0, prev_e = 0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    const double dev = x[t] - mu;
    e[t] = dev - phi * prev_dev - theta * prev_e;
    prev_dev = dev;
    prev_e = e[t];
  }
  return e;
}

inline double arma11_css(std::span<const double> x, double phi, double theta, double mu) {
  double prev_dev = 0, prev_e = 0, s = 0;
  for (double v : x) {
    const double dev = v - mu;
    const double e = dev - phi * prev_dev - theta * prev_e;
    s += e * e;
    prev_dev = dev;
    prev_e = e;
  }
  return s;
}

/// Minimises the CSS over (phi, theta, mu) inside the search box, running the simplex
/// from a 3x3 grid of (phi, theta) starts. Among equally good optima (the
/// phi = -theta ridge of white noise) the one closest to (0, 0) is returned.
inline Arma11Fit arma11_fit(std::span<const double> series, const Arma11Options& opt = {}) {
  const std::size_t T = series.size();
  if (T < 10) throw DegenerateDataError("ARMA(1,1) fit needs at least 10 observations");
  double mean = 0;
  for (double v : series) {
    if (!std::isfinite(v)) throw Error("ARMA(1,1) fit: series must be compacted (no missing values)");
    mean += v;
  }
  mean /= static_cast<double>(T);
  double ss = 0;
  for (double v : series) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(T - 1));
  const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
  if (*lo == *hi || !(sd > 0)) throw DegenerateDataError("ARMA(1,1) fit: constant series");

  // Fit on the standardized series; mu and the residuals are mapped back afterwards.
  std::vector<double> z(T);
  for (std::size_t t = 0; t < T; ++t) z[t] = (series[t] - mean) / sd;

  std::size_t evals = 0;
  auto objective = [&](const std::vector<double>& p) {
    ++evals;
    if (std::fabs(p[0]) > opt.bound || std::fabs(p[1]) > opt.bound) return std::numeric_limits<double>::infinity();
    return arma11_css(z, p[0], p[1], p[2]);
  };

  NelderMeadResult best;
  bool any_converged = false;
  constexpr std::array<double, 3> grid{-0.5, 0.0, 0.5};
  for (double phi0 : grid)
    for (double theta0 : grid) {
      auto r = nelder_mead(objective, {phi0, theta0, 0.0}, {0.1, 0.1, 0.1}, opt.simplex);
      if (!r.converged) {
        if (!any_converged && r.value < best.value) best = r;
        continue;
      }
      const double tol = 1e-9 * (std::fabs(r.value) + 1e-300);
      const auto norm = [](const NelderMeadResult& m) { return m.x[0] * m.x[0] + m.x[1] * m.x[1]; };
      if (!any_converged || r.value < best.value - tol ||
          (std::fabs(r.value - best.value) <= tol && norm(r) < norm(best)))
        best = r;
      any_converged = true;
    }
  if (!any_converged)
    throw ConvergenceError("ARMA(1,1) simplex search did not converge",
                           {best.x[0], best.x[1], mean + sd * best.x[2]}, sd * sd * best.value);

  Arma11Fit fit;
  fit.phi = best.x[0];
  fit.theta = best.x[1];
  fit.intercept = mean + sd * best.x[2];
  fit.residuals = arma11_residuals(series, fit.phi, fit.theta, fit.intercept);
  fit.css = arma11_css(series, fit.phi, fit.theta, fit.intercept);
  fit.evaluations = evals;
  return fit;
}

}  // namespace bactree
