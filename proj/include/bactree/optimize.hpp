#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "bactree/error.hpp"

namespace bactree {

struct NelderMeadOptions {
  std::size_t max_iterations = 5000;
  double f_tolerance = 1e-12;  // relative spread of simplex values
  double x_tolerance = 1e-9;   // largest vertex distance from the best vertex
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  bool converged = false;
};

/// Derivative-free simplex minimisation (reflection 1, expansion 2, contraction 1/2,
/// shrink 1/2). The objective may return +inf to reject a point.
template <class F>
NelderMeadResult nelder_mead(F&& f, std::vector<double> start, const std::vector<double>& steps,
                             const NelderMeadOptions& opt = {}) {
  const std::size_t n = start.size();
  if (n == 0 || steps.size() != n) throw Error("nelder_mead: start and steps must have equal nonzero size");

  std::vector<std::vector<double>> pts(n + 1, start);
  for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += steps[i];
  std::vector<double> vals(n + 1);
  for (std::size_t i = 0; i <= n; ++i) vals[i] = f(pts[i]);

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), trial(n), trial2(n);
  NelderMeadResult res;

  auto point_along = [&](double t, std::vector<double>& out) {
    const auto& worst = pts[order[n]];
    for (std::size_t k = 0; k < n; ++k) out[k] = centroid[k] + t * (worst[k] - centroid[k]);
  };

  for (std::size_t iter = 0; iter < opt.max_iterations; ++iter) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const double fbest = vals[order[0]];
    const double fworst = vals[order[n]];
    double size = 0;
    for (std::size_t i = 1; i <= n; ++i)
      for (std::size_t k = 0; k < n; ++k)
        size = std::max(size, std::fabs(pts[order[i]][k] - pts[order[0]][k]));
    res.iterations = iter;
    if (std::isfinite(fworst) && fworst - fbest <= opt.f_tolerance * (std::fabs(fbest) + 1e-300) &&
        size <= opt.x_tolerance) {
      res.converged = true;
      break;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) centroid[k] += pts[order[i]][k] / static_cast<double>(n);

    point_along(-1.0, trial);
    const double fr = f(trial);
    if (fr < fbest) {
      point_along(-2.0, trial2);
      const double fe = f(trial2);
      if (fe < fr) {
        pts[order[n]] = trial2;
        vals[order[n]] = fe;
      } else {
        pts[order[n]] = trial;
        vals[order[n]] = fr;
      }
      continue;
    }
    if (fr < vals[order[n - 1]]) {
      pts[order[n]] = trial;
      vals[order[n]] = fr;
      continue;
    }
    // Contraction: outside if the reflection improved on the worst point, inside otherwise.
    const bool outside = fr < fworst;
    point_along(outside ? -0.5 : 0.5, trial2);
    const double fc = f(trial2);
    if (fc < (outside ? fr : fworst)) {
      pts[order[n]] = trial2;
      vals[order[n]] = fc;
      continue;
    }
    const auto best = pts[order[0]];
    for (std::size_t i = 1; i <= n; ++i) {
      auto& p = pts[order[i]];
      for (std::size_t k = 0; k < n; ++k) p[k] = best[k] + 0.5 * (p[k] - best[k]);
      vals[order[i]] = f(p);
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  res.x = pts[best];
  res.value = vals[best];
  return res;
}

}  // namespace bactree
