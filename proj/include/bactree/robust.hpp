#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "bactree/error.hpp"

namespace bactree {

/// Normal-consistency factor for the median absolute deviation.
inline constexpr double kMadConsistency = 1.4826;

/// Median; the mean of the two middle values for even sizes.
inline double median(std::span<const double> xs) {
  if (xs.empty()) throw DegenerateDataError("median of an empty sample");
  std::vector<double> v(xs.begin(), xs.end());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

/// Mean after discarding floor(trim * n) values from each end.
inline double trimmed_mean(std::span<const double> xs, double trim) {
  if (xs.empty()) throw DegenerateDataError("trimmed mean of an empty sample");
  if (!(trim >= 0.0 && trim < 0.5)) throw Error("trim fraction must lie in [0, 0.5)");
  std::vector<double> v(xs.begin(), xs.end());
  std::sort(v.begin(), v.end());
  const auto k = static_cast<std::size_t>(std::floor(trim * static_cast<double>(v.size())));
  double sum = 0;
  for (std::size_t i = k; i < v.size() - k; ++i) sum += v[i];
  return sum / static_cast<double>(v.size() - 2 * k);
}

/// Scaled median absolute deviation, `constant * median(|x - median(x)|)`.
inline double mad(std::span<const double> xs, double constant = kMadConsistency) {
  if (xs.empty()) throw DegenerateDataError("MAD of an empty sample");
  const double m = median(xs);
  std::vector<double> dev(xs.size());
  std::transform(xs.begin(), xs.end(), dev.begin(), [m](double x) { return std::fabs(x - m); });
  return constant * median(dev);
}

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw DegenerateDataError("mean of an empty sample");
  double s = 0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

/// Unbiased sample variance (n - 1 denominator), two-pass.
inline double variance(std::span<const double> xs) {
  if (xs.size() < 2) throw DegenerateDataError("variance needs at least two values");
  const double m = mean(xs);
  double s = 0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

/// Tukey five-number summary (min, lower hinge, median, upper hinge, max), the
/// convention used by box plots.
inline std::array<double, 5> five_number_summary(std::span<const double> xs) {
  if (xs.empty()) throw DegenerateDataError("five-number summary of an empty sample");
  std::vector<double> v(xs.begin(), xs.end());
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  const double n4 = std::floor((n + 3.0) / 2.0) / 2.0;
  const std::array<double, 5> depth{1.0, n4, (n + 1.0) / 2.0, n + 1.0 - n4, n};
  std::array<double, 5> out{};
  for (std::size_t i = 0; i < 5; ++i) {
    const auto lo = static_cast<std::size_t>(std::floor(depth[i])) - 1;
    const auto hi = static_cast<std::size_t>(std::ceil(depth[i])) - 1;
    out[i] = 0.5 * (v[lo] + v[hi]);
  }
  return out;
}

}  // namespace bactree
