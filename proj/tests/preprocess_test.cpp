#include "bactree/preprocess.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "bactree/bar.hpp"
#include "fixtures.hpp"

using namespace bactree;

TEST(TrimmedMean, Examples) {
  EXPECT_DOUBLE_EQ(trimmed_mean(std::vector<double>{1, 2, 3}, 0.0), 2.0);
  EXPECT_DOUBLE_EQ(trimmed_mean(std::vector<double>{0, 1, 2, 3, 100}, 0.2), 2.0);
  EXPECT_DOUBLE_EQ(trimmed_mean(std::vector<double>{4, 4, 4, 4}, 0.3), 4.0);
  EXPECT_THROW(trimmed_mean(std::vector<double>{}, 0.1), DegenerateDataError);
  EXPECT_THROW(trimmed_mean(std::vector<double>{1}, 0.5), Error);
}

TEST(TrimmedMean, MatchesEnumerationOracle) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> x(5 + rep);
    for (auto& v : x) v = g(rng);
    const double trim = 0.05 * (rep % 9);
    // Oracle: repeatedly delete the current min and max.
    std::vector<double> y = x;
    const auto k = static_cast<std::size_t>(std::floor(trim * static_cast<double>(x.size())));
    for (std::size_t i = 0; i < k; ++i) {
      y.erase(std::min_element(y.begin(), y.end()));
      y.erase(std::max_element(y.begin(), y.end()));
    }
    const double oracle = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    EXPECT_NEAR(trimmed_mean(x, trim), oracle, 1e-12);
  }
}

TEST(Mad, Examples) {
  EXPECT_EQ(mad(std::vector<double>{2, 2, 2}), 0.0);
  EXPECT_DOUBLE_EQ(mad(std::vector<double>{1, 2, 3, 4, 5}), 1.4826);
  EXPECT_DOUBLE_EQ(mad(std::vector<double>{1, 2, 3, 4, 5}, 1.0), 1.0);
  EXPECT_THROW(mad(std::vector<double>{}), DegenerateDataError);
}

TEST(RobustStats, PermutationAndTranslationProperties) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> x(20 + rep);
    for (auto& v : x) v = g(rng);
    const double c = 10 * g(rng);
    std::vector<double> shifted = x, perm = x;
    for (auto& v : shifted) v += c;
    std::shuffle(perm.begin(), perm.end(), rng);
    EXPECT_NEAR(trimmed_mean(shifted, 0.05), trimmed_mean(x, 0.05) + c, 1e-9);
    EXPECT_NEAR(mad(shifted), mad(x), 1e-9);
    EXPECT_EQ(trimmed_mean(perm, 0.05), trimmed_mean(x, 0.05));
    EXPECT_EQ(mad(perm), mad(x));
  }
}

TEST(FiveNumber, HingeConvention) {
  const auto f = five_number_summary(std::vector<double>{1, 2, 3, 4});
  EXPECT_DOUBLE_EQ(f[0], 1);
  EXPECT_DOUBLE_EQ(f[1], 1.5);
  EXPECT_DOUBLE_EQ(f[2], 2.5);
  EXPECT_DOUBLE_EQ(f[3], 3.5);
  EXPECT_DOUBLE_EQ(f[4], 4);
  const auto one = five_number_summary(std::vector<double>{0.7});
  for (double v : one) EXPECT_EQ(v, 0.7);
  const auto odd = five_number_summary(std::vector<double>{5, 1, 3, 2, 4});
  EXPECT_DOUBLE_EQ(odd[1], 2);
  EXPECT_DOUBLE_EQ(odd[3], 4);
}

TEST(FilterTrees, ShortTreeRemovedAndCentredTreeKept) {
  auto ds = fixtures::preprocessing_fixture();
  const auto [kept, report] = filter_trees(ds);
  EXPECT_EQ(report.trees_removed_short, std::vector<int>{fixtures::kShortTree});
  EXPECT_EQ(report.trees_removed_aberrant, std::vector<int>{fixtures::kShiftedTree});
  EXPECT_TRUE(kept.trees.contains(fixtures::kOutlierTree));
  for (int id : fixtures::kCleanTrees) EXPECT_TRUE(kept.trees.contains(id));
  const double shift = report.tree_means.at(fixtures::kShiftedTree) - report.stats.m;
  EXPECT_GT(std::fabs(shift), report.stats.sigma);
  EXPECT_GT(report.stats.sigma, 0);
}

TEST(FilterTrees, TreeAtCentreIsRetainedWithZeroSigma) {
  Dataset ds;
  for (int id = 1; id <= 3; ++id)
    for (int g = 1; g <= 25; ++g) {
      CellRecord r;
      r.generation = g;
      r.pole = PoleType::O;
      r.growth_rate = 0.03;
      ds.tree(id).add(r);
    }
  const auto [kept, report] = filter_trees(ds);
  EXPECT_EQ(kept.trees.size(), 3u);
  EXPECT_EQ(report.stats.sigma, 0.0);
}

TEST(FilterTrees, AllRemovedIsAnError) {
  Dataset ds;
  CellRecord r;
  r.generation = 3;
  r.growth_rate = 0.03;
  ds.tree(1).add(r);
  EXPECT_THROW(filter_trees(ds), DegenerateDataError);
}

TEST(MarkOutliers, ClosedIntervalBoundary) {
  LineageTree t(1);
  const double sigma = 0.001;
  const double centre = 0.03;
  // Median of the old-pole class is exactly `centre`.
  for (double v : {centre - 0.0005, centre, centre + 0.0005}) {
    CellRecord r;
    r.generation = 20;
    r.pole = PoleType::O;
    r.growth_rate = v;
    t.add(r);
  }
  CellRecord at;
  at.pole = PoleType::O;
  at.generation = 21;
  at.growth_rate = centre + 3.0 * sigma;
  CellRecord beyond = at;
  beyond.growth_rate = centre + 3.01 * sigma;
  CellRecord below = at;
  below.growth_rate = centre - 3.0 * sigma;
  // Two symmetric extremes keep the median at `centre`.
  LineageTree t2 = t;
  t2.add(at);
  t2.add(below);
  MarkingLog log;
  const auto marked = mark_outliers(t2, sigma, 3.0, &log);
  EXPECT_EQ(log.counts.total(), 0u);
  for (const auto& r : marked.records()) EXPECT_FALSE(r.outlier);

  LineageTree t3 = t;
  t3.add(beyond);
  below.growth_rate = centre - 3.01 * sigma;
  t3.add(below);
  MarkingLog log3;
  const auto marked3 = mark_outliers(t3, sigma, 3.0, &log3);
  EXPECT_EQ(log3.counts.old_pole, 2u);
  EXPECT_TRUE(marked3.records()[3].outlier);
  // The recorded value survives marking.
  EXPECT_DOUBLE_EQ(*marked3.records()[3].growth_rate, centre + 3.01 * sigma);
  EXPECT_FALSE(marked3.records()[3].rate());
}

TEST(MarkOutliers, FilamentationTailIsMarked) {
  // Spine steady at 0.03 (+/- 0.0005), then collapsing towards 0 over the last 6 generations.
  LineageTree t(1);
  const double sigma = 0.001;
  const int n = 60;
  for (int g = 1; g <= n; ++g) {
    CellRecord r;
    r.generation = g;
    r.pole = PoleType::O;
    const double wiggle = 0.0005 * ((g % 3) - 1);
    r.growth_rate = g <= n - 6 ? 0.03 + wiggle : 0.03 * (n - g) / 7.0;
    t.add(r);
  }
  std::vector<double> rates;
  for (const auto& r : t.records()) rates.push_back(*r.growth_rate);
  const double med = median(rates);
  const auto marked = mark_outliers(t, sigma);
  for (const auto& r : marked.records()) {
    const bool outside = *r.growth_rate < med - 3 * sigma || *r.growth_rate > med + 3 * sigma;
    EXPECT_EQ(r.outlier, outside) << r.generation;
    if (r.generation > n - 5) {
      EXPECT_TRUE(r.outlier);
    }
  }
}

TEST(MarkOutliers, EmptyPoleClassIsSkippedWithWarning) {
  LineageTree t(4);
  CellRecord r;
  r.generation = 1;
  r.pole = PoleType::O;
  r.growth_rate = 0.03;
  t.add(r);
  MarkingLog log;
  mark_outliers(t, 0.001, 3.0, &log);
  ASSERT_EQ(log.warnings.size(), 1u);
  EXPECT_NE(log.warnings[0].find("no N cells"), std::string::npos);
}

TEST(Preprocess, FixtureConformance) {
  const auto ds = fixtures::preprocessing_fixture();
  const auto [out, report] = preprocess(ds);
  EXPECT_EQ(report.total_marked(), 1u);
  EXPECT_EQ(report.outliers_marked.at(fixtures::kOutlierTree).total(), 1u);
  const auto& t = out.trees.at(fixtures::kOutlierTree);
  std::size_t marked = 0;
  for (const auto& r : t.records())
    if (r.outlier) {
      ++marked;
      EXPECT_EQ(r.generation, fixtures::kOutlierGeneration);
      EXPECT_EQ(r.pole, PoleType::O);
    }
  EXPECT_EQ(marked, 1u);
}

TEST(Preprocess, IdempotentWithFrozenStatistics) {
  SimulationConfig cfg;
  cfg.params = {0.0304, 0.0664, 0.0281, 0.0994, 0.004, 0.0};
  cfg.generations = 80;
  cfg.trees = 30;
  cfg.seed = 21;
  auto ds = simulate_comb(cfg);
  // Add heavy-tailed corruption so that marking has work to do.
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> pick(0, 150);
  for (auto& [id, t] : ds.trees) {
    LineageTree copy(id);
    int i = 0;
    for (auto r : t.records()) {
      if (r.growth_rate && pick(rng) == 0) *r.growth_rate += 0.05;
      if (id % 10 == 0 && r.growth_rate) *r.growth_rate += 0.02;
      copy.add(r);
      ++i;
    }
    t = copy;
  }
  const auto [once, r1] = preprocess(ds);
  EXPECT_GT(r1.total_marked(), 0u);
  EXPECT_FALSE(r1.trees_removed_aberrant.empty());
  PreprocessConfig frozen;
  frozen.frozen = r1.stats;
  const auto [twice, r2] = preprocess(once, frozen);
  EXPECT_TRUE(r2.trees_removed_short.empty());
  EXPECT_TRUE(r2.trees_removed_aberrant.empty());
  EXPECT_EQ(r2.total_marked(), 0u);
  ASSERT_EQ(once.trees.size(), twice.trees.size());
  for (const auto& [id, t] : once.trees)
    for (std::size_t i = 0; i < t.size(); ++i)
      EXPECT_EQ(t.records()[i].outlier, twice.trees.at(id).records()[i].outlier);
}
