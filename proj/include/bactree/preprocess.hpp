#pragma once

// Cleaning of comb data: removal of short trees, removal of trees whose mean rate is
// far from the robust global centre, and per-pole-type outlier marking.
//
// All statistics are computed from recorded rates (CellRecord::growth_rate), ignoring
// existing outlier flags, and marks are only ever added. With the global statistics
// frozen, running the procedure on its own output therefore changes nothing.

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bactree/dataset.hpp"
#include "bactree/error.hpp"
#include "bactree/robust.hpp"

namespace bactree {

struct RobustStats {
  double m = 0;      // trimmed mean of rates over retained trees
  double sigma = 0;  // scaled MAD of the same rates
};

struct PreprocessConfig {
  int min_generations = 20;  // trees whose max generation is below this are removed
  double trim = 0.05;
  double tree_k_sigma = 1.0;  // tree removed when |m_t - m| > tree_k_sigma * sigma
  double k_sigma = 3.0;       // cell marked outside [median - k_sigma*sigma, median + k_sigma*sigma]
  double mad_constant = kMadConsistency;
  std::optional<RobustStats> frozen;  // skip re-estimating m and sigma
};

struct OutlierCounts {
  std::size_t old_pole = 0;
  std::size_t new_pole = 0;
  std::size_t total() const { return old_pole + new_pole; }
};

struct PreprocessReport {
  std::vector<int> trees_removed_short;
  std::vector<int> trees_removed_aberrant;
  std::map<int, double> tree_means;
  std::map<int, OutlierCounts> outliers_marked;
  RobustStats stats;
  std::vector<std::string> warnings;

  std::size_t total_marked() const {
    std::size_t n = 0;
    for (const auto& [id, c] : outliers_marked) n += c.total();
    return n;
  }
};

namespace preprocess_detail {

inline std::vector<double> recorded_rates(const LineageTree& t) {
  std::vector<double> v;
  v.reserve(t.size());
  for (const auto& r : t.records())
    if (r.growth_rate) v.push_back(*r.growth_rate);
  return v;
}

}  // namespace preprocess_detail

/// Trimmed mean and scaled MAD of all recorded rates in the dataset.
inline RobustStats robust_stats(const Dataset& ds, double trim = 0.05, double mad_constant = kMadConsistency) {
  std::vector<double> all;
  for (const auto& [id, t] : ds.trees) {
    auto v = preprocess_detail::recorded_rates(t);
    all.insert(all.end(), v.begin(), v.end());
  }
  if (all.empty()) throw DegenerateDataError("no recorded growth rates to estimate the global centre from");
  return {trimmed_mean(all, trim), mad(all, mad_constant)};
}

/// Removes short trees, then trees whose plain mean rate deviates from the robust
/// centre by more than tree_k_sigma * sigma.
inline std::pair<Dataset, PreprocessReport> filter_trees(const Dataset& ds, const PreprocessConfig& cfg = {}) {
  PreprocessReport report;
  Dataset kept;
  kept.source = ds.source;
  kept.warnings = ds.warnings;

  for (const auto& [id, t] : ds.trees) {
    if (t.max_generation() < cfg.min_generations)
      report.trees_removed_short.push_back(id);
    else
      kept.trees.emplace(id, t);
  }
  if (kept.trees.empty()) throw DegenerateDataError("every tree is shorter than the generation threshold");

  report.stats = cfg.frozen ? *cfg.frozen : robust_stats(kept, cfg.trim, cfg.mad_constant);

  for (auto it = kept.trees.begin(); it != kept.trees.end();) {
    const auto rates = preprocess_detail::recorded_rates(it->second);
    if (rates.empty()) {
      report.warnings.push_back("tree " + std::to_string(it->first) + " has no recorded rates; removed");
      report.trees_removed_aberrant.push_back(it->first);
      it = kept.trees.erase(it);
      continue;
    }
    const double mt = mean(rates);
    report.tree_means[it->first] = mt;
    if (std::fabs(mt - report.stats.m) > cfg.tree_k_sigma * report.stats.sigma) {
      report.trees_removed_aberrant.push_back(it->first);
      it = kept.trees.erase(it);
    } else {
      ++it;
    }
  }
  if (kept.trees.empty()) throw DegenerateDataError("every tree was removed as aberrant");
  return {std::move(kept), std::move(report)};
}

struct MarkingLog {
  OutlierCounts counts;
  std::vector<std::string> warnings;
};

/// Marks each typed cell whose rate lies outside [median - k*sigma, median + k*sigma],
/// the median taken over the tree's cells of the same pole type.
inline LineageTree mark_outliers(const LineageTree& tree, double sigma, double k_sigma = 3.0,
                                 MarkingLog* log = nullptr) {
  if (!(sigma >= 0)) throw Error("sigma must be non-negative");
  LineageTree out = tree;
  const auto recs = tree.records();
  for (PoleType type : {PoleType::O, PoleType::N}) {
    std::vector<double> rates;
    for (const auto& r : recs)
      if (r.pole == type && r.growth_rate) rates.push_back(*r.growth_rate);
    if (rates.empty()) {
      if (log)
        log->warnings.push_back("tree " + std::to_string(tree.id()) + ": no " + to_char(type) +
                                " cells with a rate; skipped");
      continue;
    }
    const double centre = median(rates);
    const double lo = centre - k_sigma * sigma;
    const double hi = centre + k_sigma * sigma;
    for (std::size_t i = 0; i < recs.size(); ++i) {
      const auto& r = recs[i];
      if (r.pole != type || !r.growth_rate || r.outlier) continue;
      const double x = *r.growth_rate;
      if (x < lo || x > hi) {
        out.set_outlier(i, true);
        if (log) ++(type == PoleType::O ? log->counts.old_pole : log->counts.new_pole);
      }
    }
  }
  return out;
}

/// Full procedure: filter_trees followed by mark_outliers on every retained tree
/// with the global sigma.
inline std::pair<Dataset, PreprocessReport> preprocess(const Dataset& ds, const PreprocessConfig& cfg = {}) {
  auto [kept, report] = filter_trees(ds, cfg);
  for (auto& [id, tree] : kept.trees) {
    MarkingLog log;
    tree = mark_outliers(tree, report.stats.sigma, cfg.k_sigma, &log);
    report.outliers_marked[id] = log.counts;
    for (auto& w : log.warnings) report.warnings.push_back(std::move(w));
  }
  return {std::move(kept), std::move(report)};
}

}  // namespace bactree
