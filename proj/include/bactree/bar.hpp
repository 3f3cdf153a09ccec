#pragma once

// Asymmetric bifurcating autoregressive (BAR) model
//
//   X_{2k}   = a0 + b0 X_k + eps_{2k}     (new-pole daughter)
//   X_{2k+1} = a1 + b1 X_k + eps_{2k+1}   (old-pole daughter)
//
// with a simulator for comb and complete trees, and the least-squares estimator in
// which a mother-daughter pair contributes only when both rates are observed.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "bactree/dataset.hpp"
#include "bactree/distributions.hpp"
#include "bactree/error.hpp"
#include "bactree/lineage.hpp"
#include "bactree/parallel.hpp"
#include "bactree/random.hpp"
#include "bactree/stattests.hpp"

namespace bactree {

struct BarParams {
  double a0 = 0, b0 = 0, a1 = 0, b1 = 0;
  double noise_sd = 0;
  double noise_correlation = 0;  // between sister noises

  std::array<double, 4> theta() const { return {a0, b0, a1, b1}; }
  /// Fixed point of the old-pole recursion, the stationary mean of the spine.
  double spine_mean() const { return a1 / (1.0 - b1); }
  bool stationary() const { return std::fabs(b0) < 1 && std::fabs(b1) < 1; }
};

/// Law of the root rate. Defaults: mean a1/(1-b1), sd noise_sd/sqrt(1-b1^2).
struct InitialLaw {
  std::optional<double> mean;
  std::optional<double> sd;
};

struct SimulationConfig {
  BarParams params;
  int generations = 2;  // daughter generations below the root
  int trees = 1;
  double missing_prob = 0;
  std::uint64_t seed = 1;
  InitialLaw initial;
  int first_tree_id = 1;
};

namespace bar_detail {

inline void validate(const SimulationConfig& cfg) {
  if (cfg.generations < 1) throw Error("simulation needs at least one generation");
  if (cfg.trees < 1) throw Error("simulation needs at least one tree");
  if (!(cfg.missing_prob >= 0 && cfg.missing_prob < 1)) throw Error("missing probability must lie in [0, 1)");
  if (!(cfg.params.noise_sd >= 0)) throw Error("noise standard deviation must be non-negative");
  if (!(std::fabs(cfg.params.noise_correlation) <= 1)) throw Error("noise correlation must lie in [-1, 1]");
}

struct Sampler {
  Rng rng;
  const SimulationConfig& cfg;
  std::normal_distribution<double> gauss{0.0, 1.0};
  std::uniform_real_distribution<double> unif{0.0, 1.0};

  double root() {
    const auto& p = cfg.params;
    const double mean = cfg.initial.mean.value_or(p.spine_mean());
    const double sd = cfg.initial.sd.value_or(std::fabs(p.b1) < 1 ? p.noise_sd / std::sqrt(1 - p.b1 * p.b1) : p.noise_sd);
    return mean + sd * gauss(rng);
  }

  // (new-pole, old-pole) daughters of a mother value.
  std::pair<double, double> daughters(double mother) {
    const auto& p = cfg.params;
    const double z1 = gauss(rng);
    const double z2 = gauss(rng);
    const double rho = p.noise_correlation;
    const double e0 = p.noise_sd * z1;
    const double e1 = p.noise_sd * (rho * z1 + std::sqrt(1 - rho * rho) * z2);
    return {p.a0 + p.b0 * mother + e0, p.a1 + p.b1 * mother + e1};
  }

  bool hidden() { return unif(rng) < cfg.missing_prob; }
};

}  // namespace bar_detail

/// Comb trees in the 9-column layout: the root (generation 0) followed by the
/// new-pole/old-pole pair of every generation along the old-pole spine. Each cell is
/// hidden independently with probability missing_prob. Tree j uses sub-stream j of the seed.
inline Dataset simulate_comb(const SimulationConfig& cfg) {
  bar_detail::validate(cfg);
  Dataset ds;
  ds.source = Source::Wang;
  for (int j = 0; j < cfg.trees; ++j) {
    const int id = cfg.first_tree_id + j;
    bar_detail::Sampler s{substream(cfg.seed, static_cast<std::uint64_t>(id)), cfg};
    LineageTree& tree = ds.tree(id);

    double spine = s.root();
    bool spine_hidden = s.hidden();
    CellRecord root;
    root.generation = 0;
    root.label = CellLabel::root();
    if (!spine_hidden) root.growth_rate = spine;
    root.consec_old = 0;
    root.consec_new = 0;
    tree.add(root);

    for (int g = 1; g <= cfg.generations; ++g) {
      const auto [xn, xo] = s.daughters(spine);
      const bool hn = s.hidden();
      const bool ho = s.hidden();
      for (PoleType side : {PoleType::N, PoleType::O}) {
        CellRecord r;
        r.generation = g;
        r.pole = side;
        r.label = materialize(CombPosition{g, side});
        r.mother_generation = g - 1;
        const bool old = side == PoleType::O;
        if (!(old ? ho : hn)) r.growth_rate = old ? xo : xn;
        if (!spine_hidden) r.mother_growth_rate = spine;
        r.consec_old = old ? g : 0;
        r.consec_new = old ? 0 : 1;
        if (g >= 2) {
          r.mother_consec_old = g - 1;
          r.mother_consec_new = 0;
        }
        tree.add(std::move(r));
      }
      spine = xo;
      spine_hidden = ho;
    }
  }
  return ds;
}

/// Complete trees in the 11-column layout, labels 1 .. 2^{generations+1} - 1.
inline Dataset simulate_full_tree(const SimulationConfig& cfg) {
  bar_detail::validate(cfg);
  if (cfg.generations > 24) throw Error("complete-tree simulation is limited to 24 generations");
  Dataset ds;
  ds.source = Source::Stewart;
  const std::size_t cells = (std::size_t{1} << (cfg.generations + 1)) - 1;
  for (int j = 0; j < cfg.trees; ++j) {
    const int id = cfg.first_tree_id + j;
    bar_detail::Sampler s{substream(cfg.seed, static_cast<std::uint64_t>(id)), cfg};
    std::vector<double> x(cells + 1);
    std::vector<char> hidden(cells + 1);
    x[1] = s.root();
    hidden[1] = s.hidden();
    for (std::size_t k = 1; 2 * k + 1 <= cells; ++k) {
      const auto [xn, xo] = s.daughters(x[k]);
      x[2 * k] = xn;
      x[2 * k + 1] = xo;
      hidden[2 * k] = s.hidden();
      hidden[2 * k + 1] = s.hidden();
    }
    LineageTree& tree = ds.tree(id);
    for (std::size_t k = 1; k <= cells; ++k) {
      const CellLabel label(k);
      CellRecord r;
      r.label = label;
      r.generation = label.generation();
      r.pole = r.generation >= 2 ? pole_type(label) : PoleType::Unknown;
      if (!hidden[k]) r.growth_rate = x[k];
      if (r.generation >= 2) {
        const auto run = consecutive_poles(label);
        r.consec_old = run.type == PoleType::O ? run.count : 0;
        r.consec_new = run.type == PoleType::N ? run.count : 0;
      }
      if (k > 1) {
        const CellLabel m = mother(label);
        r.mother_label = m;
        r.mother_generation = m.generation();
        if (!hidden[k / 2]) r.mother_growth_rate = x[k / 2];
        if (m.generation() >= 2) {
          const auto run = consecutive_poles(m);
          r.mother_consec_old = run.type == PoleType::O ? run.count : 0;
          r.mother_consec_new = run.type == PoleType::N ? run.count : 0;
        }
      }
      tree.add(std::move(r));
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Estimation
// ---------------------------------------------------------------------------

/// One usable mother-daughter pair; block 0 for new-pole daughters, 1 for old-pole.
struct BarPair {
  int tree = 0;
  int generation = 0;  // daughter generation
  int block = 0;
  double mother = 0;
  double daughter = 0;
};

/// Pairs of the comb subtree: for l = 0 .. n-1 the daughters 2h_l, 2h_l + 1 of the
/// spine cell h_l = 2^{l+1} - 1.
inline std::vector<BarPair> comb_pairs(const LineageTree& tree) {
  std::vector<BarPair> out;
  for (int l = 0; l < tree.max_generation(); ++l)
    for (PoleType side : {PoleType::N, PoleType::O}) {
      const CellRecord* d = tree.comb(l + 1, side);
      if (!d) continue;
      const auto y = d->rate();
      const auto x = tree.mother_rate(*d);
      if (!y || !x) continue;
      out.push_back({tree.id(), l + 1, side == PoleType::O ? 1 : 0, *x, *y});
    }
  return out;
}

/// Every observed mother-daughter pair of the tree, ordered by generation then block.
inline std::vector<BarPair> full_tree_pairs(const LineageTree& tree) {
  struct Keyed {
    BarPair pair;
    std::optional<CellLabel> label;
  };
  std::vector<Keyed> keyed;
  for (const auto& r : tree.records()) {
    if (r.generation < 1) continue;
    int block;
    if (r.label) {
      if (r.label->is_root()) continue;
      block = (r.label->value() & 1) != 0 ? 1 : 0;
    } else if (r.pole != PoleType::Unknown) {
      block = r.pole == PoleType::O ? 1 : 0;
    } else {
      continue;
    }
    const auto y = r.rate();
    const auto x = tree.mother_rate(r);
    if (!y || !x) continue;
    keyed.push_back({{tree.id(), r.generation, block, *x, *y}, r.label});
  }
  std::stable_sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
    return std::tie(a.pair.generation, a.pair.block, a.label) < std::tie(b.pair.generation, b.pair.block, b.label);
  });
  std::vector<BarPair> out;
  out.reserve(keyed.size());
  for (auto& k : keyed) out.push_back(k.pair);
  return out;
}

struct BarEstimate {
  std::array<double, 4> theta_hat{};  // a0, b0, a1, b1
  Eigen::Matrix4d S_n = Eigen::Matrix4d::Zero();
  Eigen::Vector4d rhs = Eigen::Vector4d::Zero();
  Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
  std::array<Interval, 4> ci{};
  double level = 0.95;
  double noise_var_hat = 0;  // mean squared residual over both blocks
  double daughter_var = 0;   // variance of the daughter rates used
  int n_generations = 0;
  int n_trees = 0;
  std::array<std::size_t, 2> n_pairs{};

  double signal_to_noise() const { return noise_var_hat > 0 ? daughter_var / noise_var_hat : std::numeric_limits<double>::infinity(); }
};

struct EstimateOptions {
  double level = 0.95;
  unsigned threads = 1;
};

inline constexpr double kBarConditionLimit = 1e12;

namespace bar_detail {

// Inverse of a symmetric 2x2 block [[p, q], [q, r]] with a condition-number guard.
inline Eigen::Matrix2d checked_inverse(const Eigen::Matrix2d& S, const char* name) {
  const double p = S(0, 0), q = S(0, 1), r = S(1, 1);
  const double det = p * r - q * q;
  const double half_tr = 0.5 * (p + r);
  const double lmax = half_tr + std::sqrt(0.25 * (p - r) * (p - r) + q * q);
  const double lmin = lmax > 0 ? det / lmax : 0.0;
  if (!(lmax > 0) || !(lmin > 0) || lmax / lmin > kBarConditionLimit)
    throw RankDeficientError(name, std::string("BAR normal matrix block ") + name +
                                       " is singular (no pairs, or all observed mother rates equal)");
  Eigen::Matrix2d inv;
  inv << r, -q, -q, p;
  return inv / det;
}

}  // namespace bar_detail

/// theta ± z * sqrt(cov_ii) at the requested level.
inline std::array<Interval, 4> confidence_intervals(const BarEstimate& est, double level) {
  const double z = dist::normal_critical(level);
  std::array<Interval, 4> out{};
  for (int i = 0; i < 4; ++i) {
    const double h = z * std::sqrt(std::max(0.0, est.cov(i, i)));
    out[static_cast<std::size_t>(i)] = {est.theta_hat[static_cast<std::size_t>(i)] - h,
                                        est.theta_hat[static_cast<std::size_t>(i)] + h};
  }
  return out;
}

/// Least-squares solution of the block normal equations built from `pairs`.
inline BarEstimate estimate_from_pairs(const std::vector<BarPair>& pairs, const EstimateOptions& opt = {}) {
  BarEstimate est;
  est.level = opt.level;
  for (const auto& pr : pairs) {
    const int o = 2 * pr.block;
    est.S_n(o, o) += 1.0;
    est.S_n(o, o + 1) += pr.mother;
    est.S_n(o + 1, o + 1) += pr.mother * pr.mother;
    est.rhs(o) += pr.daughter;
    est.rhs(o + 1) += pr.mother * pr.daughter;
    ++est.n_pairs[static_cast<std::size_t>(pr.block)];
  }
  est.S_n(1, 0) = est.S_n(0, 1);
  est.S_n(3, 2) = est.S_n(2, 3);

  const Eigen::Matrix2d inv0 = bar_detail::checked_inverse(est.S_n.block<2, 2>(0, 0), "S0");
  const Eigen::Matrix2d inv1 = bar_detail::checked_inverse(est.S_n.block<2, 2>(2, 2), "S1");
  const Eigen::Vector2d t0 = inv0 * est.rhs.segment<2>(0);
  const Eigen::Vector2d t1 = inv1 * est.rhs.segment<2>(2);
  est.theta_hat = {t0(0), t0(1), t1(0), t1(1)};

  double rss = 0, ysum = 0;
  for (const auto& pr : pairs) {
    const double a = est.theta_hat[static_cast<std::size_t>(2 * pr.block)];
    const double b = est.theta_hat[static_cast<std::size_t>(2 * pr.block + 1)];
    const double e = pr.daughter - a - b * pr.mother;
    rss += e * e;
    ysum += pr.daughter;
  }
  const double n = static_cast<double>(pairs.size());
  est.noise_var_hat = rss / n;
  const double ybar = ysum / n;
  double yss = 0;
  for (const auto& pr : pairs) yss += (pr.daughter - ybar) * (pr.daughter - ybar);
  est.daughter_var = n > 1 ? yss / (n - 1) : 0.0;

  est.cov.block<2, 2>(0, 0) = est.noise_var_hat * inv0;
  est.cov.block<2, 2>(2, 2) = est.noise_var_hat * inv1;
  est.ci = confidence_intervals(est, opt.level);
  return est;
}

namespace bar_detail {

template <class PairFn>
BarEstimate estimate_with(const Dataset& ds, const EstimateOptions& opt, PairFn&& pairs_of) {
  std::vector<const LineageTree*> trees;
  int max_gen = 0;
  for (const auto& [id, t] : ds.trees) {
    trees.push_back(&t);
    max_gen = std::max(max_gen, t.max_generation());
  }
  auto per_tree = parallel_map<std::vector<BarPair>>(trees.size(), opt.threads,
                                                     [&](std::size_t i) { return pairs_of(*trees[i]); });
  std::vector<BarPair> pairs;
  for (auto& v : per_tree) pairs.insert(pairs.end(), v.begin(), v.end());
  // Per-block sums run in tree order, generation order: independent of the thread count.
  BarEstimate est = estimate_from_pairs(pairs, opt);
  est.n_generations = max_gen;
  est.n_trees = static_cast<int>(ds.trees.size());
  return est;
}

}  // namespace bar_detail

/// Estimator on the comb subtree of every tree (spine cells and their sisters only).
inline BarEstimate estimate_comb(const Dataset& ds, const EstimateOptions& opt = {}) {
  return bar_detail::estimate_with(ds, opt, [](const LineageTree& t) { return comb_pairs(t); });
}

/// Same normal equations over every observed mother-daughter pair.
inline BarEstimate estimate_full_tree(const Dataset& ds, const EstimateOptions& opt = {}) {
  return bar_detail::estimate_with(ds, opt, [](const LineageTree& t) { return full_tree_pairs(t); });
}

}  // namespace bactree
