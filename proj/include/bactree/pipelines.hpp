#pragma once

// End-to-end analyses over a dataset, each producing a plot-ready report:
// mother/grandmother regressions along the old-pole spine, old- versus new-pole
// comparisons, normalized pole-accumulation trends, split-half stationarity tests on
// ARMA(1,1) residuals, and per-generation summaries.
//
// Per-tree work runs through parallel_map and is reduced in tree-id order, so every
// report is a deterministic function of the dataset and the options.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bactree/arma.hpp"
#include "bactree/dataset.hpp"
#include "bactree/error.hpp"
#include "bactree/lineage.hpp"
#include "bactree/parallel.hpp"
#include "bactree/robust.hpp"
#include "bactree/stattests.hpp"

namespace bactree {

// ---------------------------------------------------------------------------
// Histograms
// ---------------------------------------------------------------------------

struct HistogramReport {
  std::string label;
  std::vector<double> bin_edges;  // bins + 1 strictly increasing edges
  std::vector<std::size_t> counts;
  std::size_t n = 0;
};

/// Equal-width bins on [lo, hi]; the last bin is closed. Values outside are clamped
/// into the end bins, NaN values are ignored.
inline HistogramReport make_histogram(std::span<const double> values, double lo, double hi, std::size_t bins,
                                      std::string label) {
  if (bins == 0) throw Error("histogram needs at least one bin");
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  HistogramReport h;
  h.label = std::move(label);
  h.counts.assign(bins, 0);
  for (std::size_t i = 0; i <= bins; ++i)
    h.bin_edges.push_back(i == bins ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins));
  const double width = (hi - lo) / static_cast<double>(bins);
  for (double v : values) {
    if (std::isnan(v)) continue;
    auto k = static_cast<std::ptrdiff_t>(std::floor((v - lo) / width));
    k = std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(bins) - 1);
    ++h.counts[static_cast<std::size_t>(k)];
    ++h.n;
  }
  return h;
}

/// Histogram over the range of the data.
inline HistogramReport data_histogram(std::span<const double> values, std::size_t bins, std::string label) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : values)
    if (!std::isnan(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (!std::isfinite(lo)) lo = hi = 0;
  return make_histogram(values, lo, hi, bins, std::move(label));
}

struct SkippedTree {
  int tree_id = 0;
  std::string reason;
};

struct AnalysisOptions {
  unsigned threads = 1;
  std::size_t bins = 10;
  std::size_t min_triples = 6;   // mother/grandmother regressions
  std::size_t min_pairs = 6;     // single-regressor fits in the pole comparison
  std::size_t min_points = 20;   // stationarity spines
  double level = 0.99;           // pole comparison intervals
};

namespace pipeline_detail {

/// Rate of the spine cell of generation g: its own record decides when present, else the
/// mother-rate column of its old-pole daughter.
inline std::optional<double> spine_rate(const LineageTree& t, int g) {
  if (const CellRecord* r = t.spine(g)) return r->rate();
  if (const CellRecord* d = t.spine(g + 1)) return d->mother_growth_rate;
  return std::nullopt;
}

inline bool typed(const CellRecord& r) { return r.generation >= 2 && r.pole != PoleType::Unknown; }

inline std::vector<const LineageTree*> tree_list(const Dataset& ds) {
  std::vector<const LineageTree*> v;
  for (const auto& [id, t] : ds.trees) v.push_back(&t);
  return v;
}

}  // namespace pipeline_detail

// ---------------------------------------------------------------------------
// Mother / grandmother regression
// ---------------------------------------------------------------------------

struct TreeRegression {
  int tree_id = 0;
  std::size_t n = 0;
  double beta0 = 0, beta_m = 0, beta_g = 0;
  double se_m = 0, se_g = 0;
  double p_m = 1, p_g = 1;
};

struct CoefficientSummary {
  std::size_t n = 0;
  double mean = kMissing;
  double median = kMissing;
  double sd = kMissing;
  std::size_t significant_positive = 0;  // beta > 0 with p < 0.05
};

struct MotherGrandmotherReport {
  std::vector<TreeRegression> trees;
  std::vector<SkippedTree> skipped;
  HistogramReport p_mother;
  HistogramReport p_grandmother;
  CoefficientSummary beta_m;
};

inline CoefficientSummary summarize_coefficients(const std::vector<double>& beta, const std::vector<double>& p) {
  CoefficientSummary s;
  s.n = beta.size();
  if (beta.empty()) return s;
  s.mean = mean(beta);
  s.median = median(beta);
  s.sd = beta.size() > 1 ? std::sqrt(variance(beta)) : kMissing;
  for (std::size_t i = 0; i < beta.size(); ++i)
    if (beta[i] > 0 && p[i] < 0.05) ++s.significant_positive;
  return s;
}

/// Per tree, OLS of the spine rate on the rates of its mother and grandmother
/// (rate ~ 1 + mother + grandmother), using generations with all three observed.
inline MotherGrandmotherReport mother_grandmother_analysis(const Dataset& ds, const AnalysisOptions& opt = {}) {
  using Outcome = std::pair<std::optional<TreeRegression>, std::string>;
  const auto trees = pipeline_detail::tree_list(ds);
  auto results = parallel_map<Outcome>(trees.size(), opt.threads, [&](std::size_t i) -> Outcome {
    const LineageTree& t = *trees[i];
    std::vector<double> r, m, g;
    for (int gen = 2; gen <= t.max_generation(); ++gen) {
      if (!t.spine(gen)) continue;
      const auto x = t.spine(gen)->rate();
      const auto xm = pipeline_detail::spine_rate(t, gen - 1);
      const auto xg = pipeline_detail::spine_rate(t, gen - 2);
      if (!x || !xm || !xg) continue;
      r.push_back(*x);
      m.push_back(*xm);
      g.push_back(*xg);
    }
    if (r.size() < opt.min_triples)
      return {std::nullopt, std::to_string(r.size()) + " usable triples (need " + std::to_string(opt.min_triples) + ")"};
    try {
      const auto fit = ols(r, design_with_intercept({m, g}), {"const", "mother", "grandmother"});
      TreeRegression tr;
      tr.tree_id = t.id();
      tr.n = fit.n;
      tr.beta0 = fit.coefficients(0);
      tr.beta_m = fit.coefficients(1);
      tr.beta_g = fit.coefficients(2);
      tr.se_m = fit.standard_errors(1);
      tr.se_g = fit.standard_errors(2);
      tr.p_m = fit.p_values(1);
      tr.p_g = fit.p_values(2);
      return {tr, {}};
    } catch (const Error& e) {
      return {std::nullopt, e.what()};
    }
  });

  MotherGrandmotherReport rep;
  std::vector<double> pm, pg, bm;
  for (std::size_t i = 0; i < results.size(); ++i) {
    auto& [tr, why] = results[i];
    if (!tr) {
      rep.skipped.push_back({trees[i]->id(), why});
      continue;
    }
    pm.push_back(tr->p_m);
    pg.push_back(tr->p_g);
    bm.push_back(tr->beta_m);
    rep.trees.push_back(*tr);
  }
  rep.p_mother = make_histogram(pm, 0.0, 1.0, opt.bins, "p-value of mother coefficient");
  rep.p_grandmother = make_histogram(pg, 0.0, 1.0, opt.bins, "p-value of grandmother coefficient");
  rep.beta_m = summarize_coefficients(bm, pm);
  return rep;
}

// ---------------------------------------------------------------------------
// Old pole versus new pole
// ---------------------------------------------------------------------------

struct PoleComparisonReport {
  WelchResult means;            // x = old-pole rates, y = new-pole rates
  TestResult correlation_old;   // old-pole daughters against their mothers
  TestResult correlation_new;
  std::vector<std::pair<int, double>> beta_m_old;  // (tree, slope)
  std::vector<std::pair<int, double>> beta_m_new;
  HistogramReport hist_beta_m_old;
  HistogramReport hist_beta_m_new;
  std::vector<SkippedTree> skipped;
};

/// Welch comparison of old- and new-pole rates, daughter-mother correlations by daughter
/// type, and per-tree slopes of rate on mother rate by daughter type. Only cells of
/// generation 2 and later carry a known type.
inline PoleComparisonReport pole_comparison(const Dataset& ds, const AnalysisOptions& opt = {}) {
  std::vector<double> old_rates, new_rates;
  std::array<std::vector<double>, 2> dau, mom;  // index 0 = new, 1 = old
  for (const auto& [id, t] : ds.trees)
    for (const auto& r : t.records()) {
      if (!pipeline_detail::typed(r) || !r.observed()) continue;
      const std::size_t k = r.pole == PoleType::O ? 1 : 0;
      (k ? old_rates : new_rates).push_back(*r.rate());
      if (const auto x = t.mother_rate(r)) {
        dau[k].push_back(*r.rate());
        mom[k].push_back(*x);
      }
    }
  PoleComparisonReport rep;
  rep.means = student_two_sample(old_rates, new_rates, opt.level);
  rep.correlation_old = correlation_ci(dau[1], mom[1], opt.level);
  rep.correlation_new = correlation_ci(dau[0], mom[0], opt.level);

  using Slopes = std::array<std::optional<double>, 2>;
  using Outcome = std::pair<Slopes, std::array<std::string, 2>>;
  const auto trees = pipeline_detail::tree_list(ds);
  auto results = parallel_map<Outcome>(trees.size(), opt.threads, [&](std::size_t i) {
    const LineageTree& t = *trees[i];
    std::array<std::vector<double>, 2> y, x;
    for (const auto& r : t.records()) {
      if (!pipeline_detail::typed(r) || !r.observed()) continue;
      const auto xm = t.mother_rate(r);
      if (!xm) continue;
      const std::size_t k = r.pole == PoleType::O ? 1 : 0;
      y[k].push_back(*r.rate());
      x[k].push_back(*xm);
    }
    Outcome out;
    for (std::size_t k = 0; k < 2; ++k) {
      if (y[k].size() < opt.min_pairs) {
        out.second[k] = std::to_string(y[k].size()) + " usable pairs (need " + std::to_string(opt.min_pairs) + ")";
        continue;
      }
      try {
        out.first[k] = ols(y[k], design_with_intercept({x[k]}), {"const", "mother"}).coefficients(1);
      } catch (const Error& e) {
        out.second[k] = e.what();
      }
    }
    return out;
  });
  std::vector<double> bo, bn;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const int id = trees[i]->id();
    const auto& [slopes, why] = results[i];
    if (slopes[1]) {
      rep.beta_m_old.emplace_back(id, *slopes[1]);
      bo.push_back(*slopes[1]);
    } else {
      rep.skipped.push_back({id, "old-pole slope: " + why[1]});
    }
    if (slopes[0]) {
      rep.beta_m_new.emplace_back(id, *slopes[0]);
      bn.push_back(*slopes[0]);
    } else {
      rep.skipped.push_back({id, "new-pole slope: " + why[0]});
    }
  }
  rep.hist_beta_m_old = data_histogram(bo, opt.bins, "mother coefficient, old-pole daughters");
  rep.hist_beta_m_new = data_histogram(bn, opt.bins, "mother coefficient, new-pole daughters");
  return rep;
}

// ---------------------------------------------------------------------------
// Pole accumulation trends
// ---------------------------------------------------------------------------

struct PoleTrendSeries {
  std::string label;
  std::vector<int> n_values;
  std::vector<double> mean_normalized_rate;  // NaN where no cell contributes
  std::vector<std::size_t> counts;
  double slope = kMissing;  // OLS slope of mean against n over populated n
  double intercept = kMissing;
};

struct PoleTrendReport {
  PoleTrendSeries cumulated_new;  // n consecutive new poles, 1..7
  PoleTrendSeries cumulated_old;
  PoleTrendSeries switched_new;   // new-pole cell whose mother cumulated n old poles, 1..6
  PoleTrendSeries switched_old;   // old-pole cell whose mother cumulated n new poles
  std::map<std::size_t, std::size_t> group_sizes;  // normalization group size -> number of groups
  std::size_t groups_skipped = 0;                  // groups with no usable mean
  std::size_t cells_skipped = 0;
  std::size_t cells_normalized = 0;
};

namespace pipeline_detail {

struct Accumulator {
  std::vector<double> sum;
  std::vector<std::size_t> count;
  explicit Accumulator(int max_n) : sum(static_cast<std::size_t>(max_n) + 1), count(static_cast<std::size_t>(max_n) + 1) {}
  void add(int n, double v) {
    if (n < 1 || n >= static_cast<int>(sum.size())) return;
    sum[static_cast<std::size_t>(n)] += v;
    ++count[static_cast<std::size_t>(n)];
  }
  PoleTrendSeries finish(std::string label) const {
    PoleTrendSeries s;
    s.label = std::move(label);
    std::vector<double> xs, ys;
    for (std::size_t n = 1; n < sum.size(); ++n) {
      s.n_values.push_back(static_cast<int>(n));
      s.counts.push_back(count[n]);
      const double m = count[n] ? sum[n] / static_cast<double>(count[n]) : kMissing;
      s.mean_normalized_rate.push_back(m);
      if (count[n]) {
        xs.push_back(static_cast<double>(n));
        ys.push_back(m);
      }
    }
    if (xs.size() >= 2) {
      const double mx = mean(xs), my = mean(ys);
      double sxy = 0, sxx = 0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
      }
      s.slope = sxy / sxx;
      s.intercept = my - s.slope * mx;
    }
    return s;
  }
};

// Consecutive-pole run of a cell, from its label when known, else from the recorded columns.
inline std::optional<PoleRun> run_of(const CellRecord& r) {
  if (r.label && r.label->generation() >= 2) return consecutive_poles(*r.label);
  if (r.pole == PoleType::O && r.consec_old && *r.consec_old > 0) return PoleRun{*r.consec_old, PoleType::O};
  if (r.pole == PoleType::N && r.consec_new && *r.consec_new > 0) return PoleRun{*r.consec_new, PoleType::N};
  return std::nullopt;
}

inline std::optional<PoleRun> mother_run_of(const CellRecord& r) {
  if (r.label && r.label->generation() >= 3) return consecutive_poles(mother(*r.label));
  if (r.mother_consec_old && *r.mother_consec_old > 0) return PoleRun{*r.mother_consec_old, PoleType::O};
  if (r.mother_consec_new && *r.mother_consec_new > 0) return PoleRun{*r.mother_consec_new, PoleType::N};
  return std::nullopt;
}

}  // namespace pipeline_detail

/// Rate of every typed, observed cell divided by the mean over such cells of the same
/// tree and generation, keyed by record index. Groups with a zero or non-finite mean are
/// left out and counted.
struct NormalizedRates {
  std::map<std::size_t, double> value;
  std::map<std::size_t, std::size_t> group_sizes;
  std::size_t groups_skipped = 0;
  std::size_t cells_skipped = 0;
};

inline NormalizedRates normalize_by_generation(const LineageTree& t) {
  NormalizedRates out;
  std::map<int, std::vector<std::size_t>> groups;
  const auto recs = t.records();
  for (std::size_t i = 0; i < recs.size(); ++i)
    if (pipeline_detail::typed(recs[i]) && recs[i].observed()) groups[recs[i].generation].push_back(i);
  for (const auto& [gen, cells] : groups) {
    double s = 0;
    for (std::size_t i : cells) s += *recs[i].rate();
    const double avg = s / static_cast<double>(cells.size());
    if (!(avg != 0) || !std::isfinite(avg)) {
      ++out.groups_skipped;
      out.cells_skipped += cells.size();
      continue;
    }
    ++out.group_sizes[cells.size()];
    for (std::size_t i : cells) out.value[i] = *recs[i].rate() / avg;
  }
  return out;
}

/// Normalized rates averaged by consecutive-pole count (cumulated series) and, for cells
/// whose type differs from their mother's, by the mother's count (switched series).
inline PoleTrendReport pole_trend_analysis(const Dataset& ds, int max_cumulated = 7, int max_switched = 6) {
  using pipeline_detail::Accumulator;
  Accumulator cn(max_cumulated), co(max_cumulated), sn(max_switched), so(max_switched);
  PoleTrendReport rep;
  for (const auto& [id, t] : ds.trees) {
    const auto norm = normalize_by_generation(t);
    rep.groups_skipped += norm.groups_skipped;
    rep.cells_skipped += norm.cells_skipped;
    for (const auto& [size, count] : norm.group_sizes) rep.group_sizes[size] += count;
    for (const auto& [i, v] : norm.value) {
      const CellRecord& r = t.records()[i];
      ++rep.cells_normalized;
      const auto run = pipeline_detail::run_of(r);
      if (!run) continue;
      (run->type == PoleType::N ? cn : co).add(run->count, v);
      if (run->count != 1) continue;
      if (const auto mrun = pipeline_detail::mother_run_of(r); mrun && mrun->type != run->type)
        (run->type == PoleType::N ? sn : so).add(mrun->count, v);
    }
  }
  rep.cumulated_new = cn.finish("consecutive new poles");
  rep.cumulated_old = co.finish("consecutive old poles");
  rep.switched_new = sn.finish("new pole after consecutive old poles");
  rep.switched_old = so.finish("old pole after consecutive new poles");
  return rep;
}

// ---------------------------------------------------------------------------
// Stationarity of the old-pole spine
// ---------------------------------------------------------------------------

enum class SplitTest { KS, Student };

inline const char* to_string(SplitTest t) { return t == SplitTest::KS ? "ks" : "t"; }

struct StationarityEntry {
  int tree_id = 0;
  std::size_t T = 0;
  double phi = 0, theta = 0, intercept = 0;
  double p_ks = 1;
  double p_t = 1;
};

struct StationarityReport {
  SplitTest test = SplitTest::KS;
  std::vector<StationarityEntry> trees;
  std::vector<SkippedTree> skipped;
  HistogramReport p_values;
  std::optional<TestResult> uniformity;  // KS of the selected p-values against U(0, 1)
};

/// Compacted series of observed old-pole spine rates (generation 1 onwards).
inline std::vector<double> old_pole_spine(const LineageTree& t) {
  std::vector<double> x;
  for (int g = 1; g <= t.max_generation(); ++g)
    if (const CellRecord* r = t.spine(g); r && r->observed()) x.push_back(*r->rate());
  return x;
}

/// Split-half test on the residuals of an ARMA(1,1) fit to one series: the first
/// ceil(T/2) residuals against the rest.
inline StationarityEntry stationarity_of_series(std::span<const double> x, int tree_id = 0) {
  const auto fit = arma11_fit(x);
  const std::size_t T = fit.residuals.size();
  const std::size_t half = (T + 1) / 2;
  const std::span<const double> e(fit.residuals);
  StationarityEntry s;
  s.tree_id = tree_id;
  s.T = T;
  s.phi = fit.phi;
  s.theta = fit.theta;
  s.intercept = fit.intercept;
  s.p_ks = ks_two_sample(e.first(half), e.subspan(half)).p_value;
  s.p_t = student_two_sample(e.first(half), e.subspan(half)).test.p_value;
  return s;
}

inline StationarityReport stationarity_analysis(const Dataset& ds, SplitTest test = SplitTest::KS,
                                                const AnalysisOptions& opt = {}) {
  using Outcome = std::pair<std::optional<StationarityEntry>, std::string>;
  const auto trees = pipeline_detail::tree_list(ds);
  auto results = parallel_map<Outcome>(trees.size(), opt.threads, [&](std::size_t i) -> Outcome {
    const auto x = old_pole_spine(*trees[i]);
    if (x.size() < opt.min_points)
      return {std::nullopt, std::to_string(x.size()) + " usable spine points (need " + std::to_string(opt.min_points) + ")"};
    try {
      return {stationarity_of_series(x, trees[i]->id()), {}};
    } catch (const Error& e) {
      return {std::nullopt, e.what()};
    }
  });
  StationarityReport rep;
  rep.test = test;
  std::vector<double> ps;
  for (std::size_t i = 0; i < results.size(); ++i) {
    auto& [entry, why] = results[i];
    if (!entry) {
      rep.skipped.push_back({trees[i]->id(), why});
      continue;
    }
    ps.push_back(test == SplitTest::KS ? entry->p_ks : entry->p_t);
    rep.trees.push_back(*entry);
  }
  rep.p_values = make_histogram(ps, 0.0, 1.0, opt.bins,
                                std::string("p-value of split-half ") + (test == SplitTest::KS ? "KS" : "Welch") + " test");
  if (!ps.empty()) rep.uniformity = ks_uniform(ps);
  return rep;
}

// ---------------------------------------------------------------------------
// Per-generation summaries
// ---------------------------------------------------------------------------

struct GenerationRow {
  int generation = 0;
  std::size_t count = 0;
  std::size_t excluded = 0;                 // dropped by the display range filter
  std::array<double, 5> five{kMissing, kMissing, kMissing, kMissing, kMissing};  // min, lower hinge, median, upper hinge, max
  HistogramReport histogram;
};

struct GenerationSummaryOptions {
  std::size_t bins = 20;
  /// Drop rates outside [display_min, display_max] (for Wang: negative or above 0.08).
  bool display_filter = false;
  double display_min = 0.0;
  double display_max = 0.08;
};

inline std::vector<GenerationRow> generation_summary(const Dataset& ds, const std::vector<int>& generations,
                                                     const GenerationSummaryOptions& opt = {}) {
  std::map<int, std::vector<double>> by_gen;
  std::map<int, std::size_t> excluded;
  const bool filter = opt.display_filter && ds.source == Source::Wang;
  for (const auto& [id, t] : ds.trees)
    for (const auto& r : t.records()) {
      if (!r.observed()) continue;
      const double x = *r.rate();
      if (filter && (x < opt.display_min || x > opt.display_max)) {
        ++excluded[r.generation];
        continue;
      }
      by_gen[r.generation].push_back(x);
    }
  std::vector<GenerationRow> rows;
  for (int g : generations) {
    GenerationRow row;
    row.generation = g;
    row.excluded = excluded[g];
    const auto& v = by_gen[g];
    row.count = v.size();
    if (!v.empty()) row.five = five_number_summary(v);
    row.histogram = data_histogram(v, opt.bins, "growth rate, generation " + std::to_string(g));
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace pipeline_detail {

inline nlohmann::json num(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

}  // namespace pipeline_detail

inline nlohmann::json to_json(const HistogramReport& h) {
  return {{"label", h.label}, {"bin_edges", h.bin_edges}, {"counts", h.counts}, {"n", h.n}};
}

inline nlohmann::json to_json(const Interval& i) {
  return {{"lower", pipeline_detail::num(i.lower)}, {"upper", pipeline_detail::num(i.upper)}};
}

inline nlohmann::json to_json(const TestResult& t) {
  using pipeline_detail::num;
  nlohmann::json j{{"statistic", num(t.statistic)}, {"p_value", num(t.p_value)}, {"level", t.level},
                   {"n1", t.n1},                    {"n2", t.n2}};
  j["df"] = t.df ? num(*t.df) : nlohmann::json(nullptr);
  j["ci"] = t.ci ? to_json(*t.ci) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json to_json(const std::vector<SkippedTree>& s) {
  auto j = nlohmann::json::array();
  for (const auto& k : s) j.push_back({{"tree_id", k.tree_id}, {"reason", k.reason}});
  return j;
}

inline nlohmann::json to_json(const MotherGrandmotherReport& r) {
  using pipeline_detail::num;
  auto trees = nlohmann::json::array();
  for (const auto& t : r.trees)
    trees.push_back({{"tree_id", t.tree_id}, {"n", t.n}, {"beta0", num(t.beta0)}, {"beta_m", num(t.beta_m)},
                     {"beta_g", num(t.beta_g)}, {"se_m", num(t.se_m)}, {"se_g", num(t.se_g)}, {"p_m", num(t.p_m)},
                     {"p_g", num(t.p_g)}});
  return {{"analysis", "mother_grandmother"},
          {"trees", trees},
          {"skipped", to_json(r.skipped)},
          {"p_mother", to_json(r.p_mother)},
          {"p_grandmother", to_json(r.p_grandmother)},
          {"beta_m",
           {{"n", r.beta_m.n},
            {"mean", num(r.beta_m.mean)},
            {"median", num(r.beta_m.median)},
            {"sd", num(r.beta_m.sd)},
            {"significant_positive", r.beta_m.significant_positive}}}};
}

inline nlohmann::json to_json(const PoleComparisonReport& r) {
  auto slopes = [](const std::vector<std::pair<int, double>>& v) {
    auto j = nlohmann::json::array();
    for (const auto& [id, b] : v) j.push_back({{"tree_id", id}, {"beta_m", pipeline_detail::num(b)}});
    return j;
  };
  return {{"analysis", "poles"},
          {"mean_comparison",
           {{"test", to_json(r.means.test)},
            {"mean_old", r.means.mean_x},
            {"mean_new", r.means.mean_y},
            {"mean_ci_old", to_json(r.means.mean_ci_x)},
            {"mean_ci_new", to_json(r.means.mean_ci_y)}}},
          {"correlation_old", to_json(r.correlation_old)},
          {"correlation_new", to_json(r.correlation_new)},
          {"beta_m_old", slopes(r.beta_m_old)},
          {"beta_m_new", slopes(r.beta_m_new)},
          {"hist_beta_m_old", to_json(r.hist_beta_m_old)},
          {"hist_beta_m_new", to_json(r.hist_beta_m_new)},
          {"skipped", to_json(r.skipped)}};
}

inline nlohmann::json to_json(const PoleTrendSeries& s) {
  auto means = nlohmann::json::array();
  for (double m : s.mean_normalized_rate) means.push_back(pipeline_detail::num(m));
  return {{"label", s.label},
          {"n", s.n_values},
          {"mean_normalized_rate", means},
          {"counts", s.counts},
          {"slope", pipeline_detail::num(s.slope)},
          {"intercept", pipeline_detail::num(s.intercept)}};
}

inline nlohmann::json to_json(const PoleTrendReport& r) {
  auto sizes = nlohmann::json::array();
  for (const auto& [size, count] : r.group_sizes) sizes.push_back({{"size", size}, {"groups", count}});
  return {{"analysis", "trends"},
          {"cumulated_new", to_json(r.cumulated_new)},
          {"cumulated_old", to_json(r.cumulated_old)},
          {"switched_new", to_json(r.switched_new)},
          {"switched_old", to_json(r.switched_old)},
          {"group_sizes", sizes},
          {"groups_skipped", r.groups_skipped},
          {"cells_skipped", r.cells_skipped},
          {"cells_normalized", r.cells_normalized}};
}

inline nlohmann::json to_json(const StationarityReport& r) {
  using pipeline_detail::num;
  auto trees = nlohmann::json::array();
  for (const auto& t : r.trees)
    trees.push_back({{"tree_id", t.tree_id}, {"T", t.T}, {"phi", num(t.phi)}, {"theta", num(t.theta)},
                     {"intercept", num(t.intercept)}, {"p_ks", num(t.p_ks)}, {"p_t", num(t.p_t)}});
  return {{"analysis", "stationarity"},
          {"test", to_string(r.test)},
          {"trees", trees},
          {"skipped", to_json(r.skipped)},
          {"p_values", to_json(r.p_values)},
          {"uniformity", r.uniformity ? to_json(*r.uniformity) : nlohmann::json(nullptr)}};
}

inline nlohmann::json to_json(const std::vector<GenerationRow>& rows) {
  using pipeline_detail::num;
  auto j = nlohmann::json::array();
  for (const auto& r : rows)
    j.push_back({{"generation", r.generation},
                 {"count", r.count},
                 {"excluded", r.excluded},
                 {"min", num(r.five[0])},
                 {"lower_hinge", num(r.five[1])},
                 {"median", num(r.five[2])},
                 {"upper_hinge", num(r.five[3])},
                 {"max", num(r.five[4])},
                 {"histogram", to_json(r.histogram)}});
  return {{"analysis", "generations"}, {"rows", j}};
}

// CSV writers, one table per plot. Missing values are written as NA.

namespace pipeline_detail {

inline std::string csv_num(double x) {
  if (!std::isfinite(x)) return "NA";
  return nlohmann::json(x).dump();
}

}  // namespace pipeline_detail

inline void write_csv(std::ostream& out, const std::vector<HistogramReport>& hs) {
  using pipeline_detail::csv_num;
  out << "label,bin_lower,bin_upper,count\n";
  for (const auto& h : hs)
    for (std::size_t i = 0; i < h.counts.size(); ++i)
      out << '"' << h.label << "\"," << csv_num(h.bin_edges[i]) << ',' << csv_num(h.bin_edges[i + 1]) << ','
          << h.counts[i] << '\n';
}

inline void write_csv(std::ostream& out, const PoleTrendReport& r) {
  using pipeline_detail::csv_num;
  out << "series,n,mean_normalized_rate,count\n";
  for (const auto* s : {&r.cumulated_new, &r.cumulated_old, &r.switched_new, &r.switched_old})
    for (std::size_t i = 0; i < s->n_values.size(); ++i)
      out << '"' << s->label << "\"," << s->n_values[i] << ',' << csv_num(s->mean_normalized_rate[i]) << ','
          << s->counts[i] << '\n';
}

inline void write_csv(std::ostream& out, const MotherGrandmotherReport& r) {
  using pipeline_detail::csv_num;
  out << "tree_id,n,beta0,beta_m,beta_g,p_m,p_g\n";
  for (const auto& t : r.trees)
    out << t.tree_id << ',' << t.n << ',' << csv_num(t.beta0) << ',' << csv_num(t.beta_m) << ',' << csv_num(t.beta_g)
        << ',' << csv_num(t.p_m) << ',' << csv_num(t.p_g) << '\n';
}

inline void write_csv(std::ostream& out, const StationarityReport& r) {
  using pipeline_detail::csv_num;
  out << "tree_id,T,phi,theta,p_ks,p_t\n";
  for (const auto& t : r.trees)
    out << t.tree_id << ',' << t.T << ',' << csv_num(t.phi) << ',' << csv_num(t.theta) << ',' << csv_num(t.p_ks) << ','
        << csv_num(t.p_t) << '\n';
}

inline void write_csv(std::ostream& out, const std::vector<GenerationRow>& rows) {
  using pipeline_detail::csv_num;
  out << "generation,count,excluded,min,lower_hinge,median,upper_hinge,max\n";
  for (const auto& r : rows) {
    out << r.generation << ',' << r.count << ',' << r.excluded;
    for (double v : r.five) out << ',' << csv_num(v);
    out << '\n';
  }
}

}  // namespace bactree
