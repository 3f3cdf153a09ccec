#pragma once

// Small hand-built datasets shared by several test binaries.

#include <array>
#include <vector>

#include "bactree/dataset.hpp"
#include "bactree/preprocess.hpp"

namespace fixtures {

inline constexpr int kShortTree = 90;
inline constexpr int kShiftedTree = 91;
inline constexpr int kOutlierTree = 92;
inline constexpr std::array<int, 6> kCleanTrees{1, 2, 3, 4, 5, 6};
inline constexpr int kOutlierGeneration = 15;

inline constexpr double kCentre = 0.03;
inline constexpr std::array<double, 4> kWiggle{-0.0015, -0.0005, 0.0005, 0.0015};

/// Comb tree with N and O cells in generations 1..last, rates kCentre + offset + wiggle.
inline bactree::LineageTree comb_tree(int id, int last, double offset) {
  bactree::LineageTree t(id);
  int k = id;
  for (int g = 1; g <= last; ++g)
    for (auto side : {bactree::PoleType::N, bactree::PoleType::O}) {
      bactree::CellRecord r;
      r.generation = g;
      r.pole = side;
      r.growth_rate = kCentre + offset + kWiggle[static_cast<std::size_t>(k++ % 4)];
      t.add(r);
    }
  return t;
}

inline bactree::Dataset build_fixture(double shift, double outlier) {
  bactree::Dataset ds;
  for (int id : kCleanTrees) ds.trees.emplace(id, comb_tree(id, 30, 0.0));
  ds.trees.emplace(kShortTree, comb_tree(kShortTree, 19, 0.0));
  ds.trees.emplace(kShiftedTree, comb_tree(kShiftedTree, 30, shift));

  const bactree::LineageTree base = comb_tree(kOutlierTree, 30, 0.0);
  std::vector<double> old_rates;
  for (const auto& r : base.records())
    if (r.pole == bactree::PoleType::O && r.generation != kOutlierGeneration) old_rates.push_back(*r.growth_rate);
  const double class_median = bactree::median(old_rates);
  bactree::LineageTree t(kOutlierTree);
  for (auto r : base.records()) {
    if (r.generation == kOutlierGeneration && r.pole == bactree::PoleType::O) r.growth_rate = class_median + outlier;
    t.add(r);
  }
  ds.trees.emplace(kOutlierTree, t);
  return ds;
}

/// Six clean 30-generation trees, one short tree (generations 1..19), one tree shifted by
/// `shift_sigmas` and one tree holding a single old-pole cell `outlier_sigmas` above its
/// class median. Sigma is the scaled MAD of the fixture itself (short tree excluded),
/// found by fixed-point iteration since the shifted tree feeds into it.
inline bactree::Dataset preprocessing_fixture(double shift_sigmas = 2.0, double outlier_sigmas = 4.0) {
  double sigma = 0.001;
  for (int it = 0; it < 50; ++it) {
    auto ds = build_fixture(shift_sigmas * sigma, outlier_sigmas * sigma);
    ds.trees.erase(kShortTree);
    sigma = bactree::robust_stats(ds).sigma;
  }
  return build_fixture(shift_sigmas * sigma, outlier_sigmas * sigma);
}

}  // namespace fixtures
