#include "bactree/bar.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

using namespace bactree;

namespace {

const BarParams kTruth{0.0304, 0.0664, 0.0281, 0.0994, 0.005, 0.0};

SimulationConfig config(int generations, int trees, std::uint64_t seed, double missing = 0.0) {
  SimulationConfig cfg;
  cfg.params = kTruth;
  cfg.generations = generations;
  cfg.trees = trees;
  cfg.seed = seed;
  cfg.missing_prob = missing;
  return cfg;
}

// Oracle: accumulate the normal equations by looping over trees and generations directly,
// with explicit observation indicators on daughter and mother.
struct NaiveSystem {
  std::array<std::array<double, 3>, 2> s{};  // per block: count, sum x, sum x^2
  std::array<std::array<double, 2>, 2> r{};  // per block: sum y, sum x y
};

NaiveSystem naive_comb_system(const Dataset& ds) {
  NaiveSystem out;
  for (const auto& [id, t] : ds.trees)
    for (int l = 0; l < t.max_generation(); ++l) {
      const CellRecord* m = t.spine(l);
      for (int side = 0; side < 2; ++side) {
        const CellRecord* d = t.comb(l + 1, side == 0 ? PoleType::N : PoleType::O);
        if (!d) continue;
        const double x = m ? (m->observed() ? *m->rate() : NAN) : d->mother_growth_rate.value_or(NAN);
        const double y = d->observed() ? *d->rate() : NAN;
        const double delta = std::isnan(x) || std::isnan(y) ? 0.0 : 1.0;
        if (delta == 0.0) continue;
        const auto b = static_cast<std::size_t>(side);
        out.s[b][0] += 1;
        out.s[b][1] += x;
        out.s[b][2] += x * x;
        out.r[b][0] += y;
        out.r[b][1] += x * y;
      }
    }
  return out;
}

std::array<double, 4> solve(const NaiveSystem& ns) {
  std::array<double, 4> th{};
  for (std::size_t b = 0; b < 2; ++b) {
    const double det = ns.s[b][0] * ns.s[b][2] - ns.s[b][1] * ns.s[b][1];
    th[2 * b] = (ns.s[b][2] * ns.r[b][0] - ns.s[b][1] * ns.r[b][1]) / det;
    th[2 * b + 1] = (ns.s[b][0] * ns.r[b][1] - ns.s[b][1] * ns.r[b][0]) / det;
  }
  return th;
}

Dataset transform_rates(const Dataset& ds, double c, double d) {
  Dataset out;
  out.source = ds.source;
  for (const auto& [id, t] : ds.trees) {
    auto& u = out.tree(id);
    for (auto r : t.records()) {
      if (r.growth_rate) *r.growth_rate = c + d * *r.growth_rate;
      if (r.mother_growth_rate) *r.mother_growth_rate = c + d * *r.mother_growth_rate;
      u.add(r);
    }
  }
  return out;
}

}  // namespace

TEST(BarSimulate, CombLayout) {
  const auto ds = simulate_comb(config(5, 2, 1));
  ASSERT_EQ(ds.trees.size(), 2u);
  const auto& t = ds.trees.at(1);
  EXPECT_EQ(t.size(), 11u);
  EXPECT_EQ(t.max_generation(), 5);
  for (int g = 1; g <= 5; ++g) {
    const auto* o = t.spine(g);
    const auto* n = t.comb(g, PoleType::N);
    ASSERT_TRUE(o && n);
    EXPECT_EQ(*o->consec_old, g);
    EXPECT_EQ(*o->label, comb_labels(g).second);
    EXPECT_EQ(*n->label, comb_labels(g).first);
    EXPECT_DOUBLE_EQ(*o->mother_growth_rate, *t.spine(g - 1)->growth_rate);
  }
}

TEST(BarSimulate, DeterministicPerSeedAndTree) {
  const auto a = simulate_comb(config(20, 3, 9));
  auto cfg = config(20, 1, 9);
  cfg.first_tree_id = 2;
  const auto b = simulate_comb(cfg);
  const auto& ta = a.trees.at(2);
  const auto& tb = b.trees.at(2);
  for (std::size_t i = 0; i < ta.size(); ++i) EXPECT_EQ(ta.records()[i].growth_rate, tb.records()[i].growth_rate);
}

TEST(BarEstimate, NoiselessDataRecoveredExactly) {
  auto cfg = config(6, 20, 2);
  cfg.params.noise_sd = 0;
  cfg.initial.sd = 0.01;
  const auto est = estimate_comb(simulate_comb(cfg));
  const auto truth = kTruth.theta();
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(est.theta_hat[i], truth[i], 1e-9) << i;
  EXPECT_LT(est.noise_var_hat, 1e-24);

  const auto full = estimate_full_tree(simulate_full_tree(cfg));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(full.theta_hat[i], truth[i], 1e-9) << i;
}

TEST(BarEstimate, FixedPointMakesSystemSingular) {
  auto cfg = config(10, 5, 3);
  cfg.params.noise_sd = 0;
  cfg.initial.sd = 0.0;
  // Root at the spine fixed point: every observed mother rate is identical.
  try {
    estimate_comb(simulate_comb(cfg));
    FAIL() << "expected RankDeficientError";
  } catch (const RankDeficientError& e) {
    EXPECT_EQ(e.block(), "S0");
  }
}

TEST(BarEstimate, NoObservedPairsIsRankDeficient) {
  auto ds = simulate_comb(config(10, 2, 4));
  Dataset stripped;
  for (const auto& [id, t] : ds.trees) {
    auto& u = stripped.tree(id);
    for (auto r : t.records()) {
      if (r.pole == PoleType::O || r.generation == 0) r.growth_rate.reset();
      r.mother_growth_rate.reset();
      u.add(r);
    }
  }
  try {
    estimate_comb(stripped);
    FAIL() << "expected RankDeficientError";
  } catch (const RankDeficientError& e) {
    EXPECT_EQ(e.block(), "S0");
  }
}

TEST(BarEstimate, MatchesNaiveAccumulation) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto ds = simulate_comb(config(60, 8, seed, 0.25));
    const auto est = estimate_comb(ds);
    const auto ns = naive_comb_system(ds);
    for (std::size_t b = 0; b < 2; ++b) {
      const auto o = static_cast<Eigen::Index>(2 * b);
      EXPECT_EQ(est.S_n(o, o), ns.s[b][0]);
      EXPECT_NEAR(est.S_n(o, o + 1), ns.s[b][1], 1e-12);
      EXPECT_NEAR(est.S_n(o + 1, o + 1), ns.s[b][2], 1e-12);
      EXPECT_NEAR(est.rhs(o), ns.r[b][0], 1e-12);
      EXPECT_NEAR(est.rhs(o + 1), ns.r[b][1], 1e-12);
      EXPECT_EQ(est.S_n(o, o + 2 - 4 * static_cast<Eigen::Index>(b)), 0.0);
    }
    const auto th = solve(ns);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(est.theta_hat[i], th[i], 1e-8);
  }
}

TEST(BarEstimate, AffineEquivariance) {
  const auto ds = simulate_comb(config(50, 10, 6, 0.1));
  const double c = 0.7, d = 3.0;
  const auto a = estimate_comb(ds);
  const auto b = estimate_comb(transform_rates(ds, c, d));
  // Y' = c + d Y: slopes unchanged, intercepts a' = c + d a - b c.
  EXPECT_NEAR(b.theta_hat[1], a.theta_hat[1], 1e-8);
  EXPECT_NEAR(b.theta_hat[3], a.theta_hat[3], 1e-8);
  EXPECT_NEAR(b.theta_hat[0], c + d * a.theta_hat[0] - a.theta_hat[1] * c, 1e-8);
  EXPECT_NEAR(b.theta_hat[2], c + d * a.theta_hat[2] - a.theta_hat[3] * c, 1e-8);
  EXPECT_NEAR(b.noise_var_hat, d * d * a.noise_var_hat, 1e-12);
}

TEST(BarEstimate, FullTreeEstimatorAgreesOnCombData) {
  const auto ds = simulate_comb(config(40, 6, 7, 0.2));
  const auto a = estimate_comb(ds);
  const auto b = estimate_full_tree(ds);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(a.theta_hat[i], b.theta_hat[i], 1e-10);
  EXPECT_EQ(a.n_pairs, b.n_pairs);
}

TEST(BarEstimate, ThreadCountDoesNotChangeResult) {
  const auto ds = simulate_comb(config(80, 40, 8, 0.1));
  EstimateOptions one, many;
  many.threads = 6;
  const auto a = estimate_comb(ds, one);
  const auto b = estimate_comb(ds, many);
  EXPECT_EQ(a.theta_hat, b.theta_hat);
  EXPECT_EQ(a.noise_var_hat, b.noise_var_hat);
}

TEST(BarEstimate, ErrorShrinksLikeInverseRootN) {
  // Mean absolute error at n generations over independent replications; the log-log
  // slope of error against n should be about -1/2.
  const std::vector<int> ns{25, 100, 400};
  std::vector<double> log_n, log_err;
  for (int n : ns) {
    double err = 0;
    const int reps = 60;
    for (int k = 0; k < reps; ++k) {
      const auto est = estimate_comb(simulate_comb(config(n, 20, 1000 + static_cast<std::uint64_t>(k))));
      const auto truth = kTruth.theta();
      for (std::size_t i = 0; i < 4; ++i) err += std::fabs(est.theta_hat[i] - truth[i]);
    }
    log_n.push_back(std::log(n));
    log_err.push_back(std::log(err / reps));
  }
  const double mx = std::accumulate(log_n.begin(), log_n.end(), 0.0) / 3;
  const double my = std::accumulate(log_err.begin(), log_err.end(), 0.0) / 3;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    sxy += (log_n[i] - mx) * (log_err[i] - my);
    sxx += (log_n[i] - mx) * (log_n[i] - mx);
  }
  const double slope = sxy / sxx;
  EXPECT_GT(slope, -0.7);
  EXPECT_LT(slope, -0.3);
}

TEST(BarEstimate, MissingAtRandomStaysConsistent) {
  const auto est = estimate_comb(simulate_comb(config(200, 100, 11, 0.3)));
  const auto truth = kTruth.theta();
  for (int i = 0; i < 4; ++i) {
    // Within five standard errors of the truth.
    EXPECT_LT(std::fabs(est.theta_hat[static_cast<std::size_t>(i)] - truth[static_cast<std::size_t>(i)]),
              5 * std::sqrt(est.cov(i, i)))
        << i;
  }
  EXPECT_NEAR(std::sqrt(est.noise_var_hat), 0.005, 0.0002);
  // About (1 - 0.3)^2 of the pairs survive.
  const double used = static_cast<double>(est.n_pairs[0] + est.n_pairs[1]) / (2.0 * 200 * 100);
  EXPECT_NEAR(used, 0.49, 0.02);
}

TEST(BarEstimate, FullTreeRecoversParameters) {
  auto cfg = config(12, 10, 13, 0.1);
  cfg.params.noise_correlation = 0.3;
  const auto est = estimate_full_tree(simulate_full_tree(cfg));
  const auto truth = kTruth.theta();
  for (int i = 0; i < 4; ++i)
    EXPECT_LT(std::fabs(est.theta_hat[static_cast<std::size_t>(i)] - truth[static_cast<std::size_t>(i)]),
              5 * std::sqrt(est.cov(i, i)));
}

TEST(BarEstimate, ConfidenceIntervalWidthFollowsLevel) {
  const auto est = estimate_comb(simulate_comb(config(100, 10, 14)));
  const auto ci90 = confidence_intervals(est, 0.90);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_TRUE(est.ci[i].contains(est.theta_hat[i]));
    EXPECT_NEAR(est.ci[i].width() / ci90[i].width(), dist::normal_critical(0.95) / dist::normal_critical(0.90), 1e-12);
  }
}
