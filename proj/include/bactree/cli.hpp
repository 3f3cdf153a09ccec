#pragma once

// Command-line front end: a single `bactree` binary with subcommands chaining
// ingest -> preprocess -> BAR estimation / analyses.
//
// Exit codes: 0 success, 1 data or computation error, 2 usage error.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bactree/bar.hpp"
#include "bactree/distributions.hpp"
#include "bactree/error.hpp"
#include "bactree/ingest.hpp"
#include "bactree/pipelines.hpp"
#include "bactree/preprocess.hpp"
#include "bactree/report.hpp"

namespace bactree::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 1;
inline constexpr int kExitUsage = 2;
inline constexpr const char* kVersion = "1.0.0";
inline constexpr const char* kOutDirEnv = "BACTREE_OUT_DIR";

namespace detail {

using ojson = nlohmann::ordered_json;

/// Flags shared by every subcommand that reads a dataset.
struct Common {
  std::string input;
  std::string format = "wang";
  bool preprocess = false;
  bool no_preprocess = false;
  int min_generations = 20;
  double trim = 0.05;
  double k_sigma = 3.0;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

inline void add_input(CLI::App* app, Common& c) {
  app->add_option("-i,--input", c.input, "Input data file")->required();
  app->add_option("-f,--format", c.format, "Input format")->check(CLI::IsMember({"wang", "stewart", "json"}));
}

inline void add_preprocess_flags(CLI::App* app, Common& c) {
  auto* on = app->add_flag("--preprocess", c.preprocess, "Apply tree filtering and outlier marking");
  auto* off = app->add_flag("--no-preprocess", c.no_preprocess, "Use the data as read");
  on->excludes(off);
  app->add_option("--min-generations", c.min_generations, "Trees reaching fewer generations are removed")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--trim", c.trim, "Trim fraction of the global mean")->check(CLI::Range(0.0, 0.49));
  app->add_option("--k-sigma", c.k_sigma, "Outlier band half-width in units of sigma")->check(CLI::PositiveNumber);
}

inline void add_run_flags(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "Run seed");
  app->add_option("--threads", c.threads, "Worker threads (1 = sequential)")->check(CLI::Range(1u, 1024u));
}

/// Directory every output lands in: the environment override, else the given default.
inline std::filesystem::path output_dir(const std::filesystem::path& fallback) {
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return fallback.empty() ? std::filesystem::path(".") : fallback;
}

/// An output file path, relocated into the override directory when one is set.
inline std::filesystem::path output_file(const std::filesystem::path& p) {
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return std::filesystem::path(env) / p.filename();
  return p;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write output file '" + path.string() + "'");
  out << content;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

template <class T>
std::string csv_of(const T& report) {
  std::ostringstream s;
  write_csv(s, report);
  return s.str();
}

inline std::string dump(const ojson& j) { return j.dump(2) + "\n"; }

/// Every option of `app` with its parsed value, or its default when not given.
inline ojson flags_of(const CLI::App* app) {
  ojson j = ojson::object();
  for (const CLI::Option* opt : app->get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "help") continue;
    const auto& res = opt->results();
    if (opt->get_type_size() == 0)
      j[name] = opt->count() > 0;
    else if (res.empty())
      j[name] = opt->get_default_str();
    else if (res.size() == 1)
      j[name] = res.front();
    else
      j[name] = res;
  }
  return j;
}

inline std::string command_path(const CLI::App* app) {
  std::string path;
  for (const CLI::App* a = app; a && a->get_parent(); a = a->get_parent())
    path = a->get_name() + (path.empty() ? "" : " " + path);
  return path;
}

inline RunConfig make_config(const CLI::App* app, const Common& c, const std::filesystem::path& out_dir) {
  RunConfig cfg;
  cfg.subcommand = command_path(app);
  cfg.flags = flags_of(app);
  cfg.seed = c.seed;
  cfg.threads = c.threads;
  cfg.output_dir = out_dir.string();
  return cfg;
}

struct Loaded {
  Dataset data;
  std::optional<PreprocessReport> preprocess;
  ojson input;
};

inline void print_warnings(std::ostream& err, const std::vector<std::string>& ws) {
  for (const auto& w : ws) err << "warning: " << w << '\n';
}

/// Reads the input, fingerprints it and applies preprocessing. Preprocessing defaults to
/// on for comb (Wang) data and off for complete-tree (Stewart) data.
inline Loaded load(const Common& c, std::ostream& err) {
  const std::filesystem::path path(c.input);
  if (!std::filesystem::is_regular_file(path)) throw Error("input file not found: '" + path.string() + "'");
  Loaded l;
  l.input = {{"path", path.string()}, {"format", c.format}, {"fnv1a64", fnv1a_file(path)}};
  l.data = load_dataset(path, parse_input_format(c.format));
  print_warnings(err, l.data.warnings);
  l.input["trees"] = l.data.trees.size();
  l.input["records"] = l.data.record_count();

  const bool apply = c.preprocess || (!c.no_preprocess && l.data.source == Source::Wang);
  if (apply) {
    PreprocessConfig pc;
    pc.min_generations = c.min_generations;
    pc.trim = c.trim;
    pc.k_sigma = c.k_sigma;
    auto [cleaned, report] = bactree::preprocess(l.data, pc);
    print_warnings(err, report.warnings);
    l.data = std::move(cleaned);
    l.preprocess = std::move(report);
  }
  return l;
}

inline ojson envelope(const RunConfig& cfg, const Loaded* l) {
  ojson j;
  j["tool"] = "bactree";
  j["version"] = kVersion;
  j["config"] = to_json(cfg);
  if (l) {
    j["input"] = l->input;
    j["preprocessed"] = l->preprocess.has_value();
    if (l->preprocess) j["preprocess"] = to_json(*l->preprocess);
  }
  return j;
}

// ---------------------------------------------------------------------------
// Self test of the distribution functions against closed forms and series
// ---------------------------------------------------------------------------

inline int selftest(std::ostream& out) {
  struct Check {
    std::string name;
    double got, want, tol;
  };
  std::vector<Check> checks;
  for (double t : {-7.0, -1.5, -0.2, 0.0, 0.7, 3.0, 40.0}) {
    checks.push_back({"t_cdf df=1 t=" + std::to_string(t), dist::student_t_cdf(t, 1),
                      0.5 + std::atan(t) / std::numbers::pi, 1e-12});
    checks.push_back({"t_cdf df=2 t=" + std::to_string(t), dist::student_t_cdf(t, 2),
                      0.5 + t / (2.0 * std::sqrt(2.0 + t * t)), 1e-12});
  }
  checks.push_back({"t_quantile 0.975 df=10", dist::student_t_quantile(0.975, 10), 2.2281388519862747, 1e-10});
  checks.push_back({"t_quantile 0.995 df=4", dist::student_t_quantile(0.995, 4), 4.6040948713499932, 1e-10});
  for (double lambda : {0.3, 0.5, 0.8, 1.0, 1.36, 2.0}) {
    double s = 0;
    for (int k = 1; k <= 50; ++k)
      s += std::exp(-(2.0 * k - 1) * (2.0 * k - 1) * std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda));
    checks.push_back({"kolmogorov_sf lambda=" + std::to_string(lambda), dist::kolmogorov_sf(lambda),
                      1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s, 1e-10});
  }
  for (double x : {-5.0, -1.0, 0.3, 2.5})
    checks.push_back({"normal_quantile(normal_cdf(" + std::to_string(x) + "))",
                      dist::normal_quantile(dist::normal_cdf(x)), x, 1e-8});
  for (double x : {0.1, 0.5, 0.9}) {
    checks.push_back({"beta symmetry x=" + std::to_string(x),
                      dist::regularized_beta(2.5, 4.0, x) + dist::regularized_beta(4.0, 2.5, 1.0 - x), 1.0, 1e-12});
    checks.push_back({"beta(1,1) x=" + std::to_string(x), dist::regularized_beta(1.0, 1.0, x), x, 1e-12});
  }
  int failed = 0;
  for (const auto& c : checks) {
    const bool ok = std::fabs(c.got - c.want) <= c.tol;
    failed += !ok;
    out << (ok ? "ok   " : "FAIL ") << c.name << "  got " << c.got << " want " << c.want << '\n';
  }
  out << checks.size() - static_cast<std::size_t>(failed) << "/" << checks.size() << " checks passed\n";
  return failed == 0 ? kExitOk : kExitData;
}

}  // namespace detail

/// Parses `argv` and runs the selected subcommand. Reports go to files; `out` receives
/// help text and stdout-bound results, `err` diagnostics and warnings.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace detail;
  CLI::App app{"Growth-rate analysis of bacterial lineage trees", "bactree"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.set_version_flag("--version", kVersion);

  // preprocess
  Common pre;
  std::string pre_report, pre_out;
  auto* preprocess_cmd = app.add_subcommand("preprocess", "Remove short and aberrant trees, mark outlier cells");
  add_input(preprocess_cmd, pre);
  preprocess_cmd->add_option("--min-generations", pre.min_generations)->check(CLI::NonNegativeNumber);
  preprocess_cmd->add_option("--trim", pre.trim)->check(CLI::Range(0.0, 0.49));
  preprocess_cmd->add_option("--k-sigma", pre.k_sigma)->check(CLI::PositiveNumber);
  preprocess_cmd->add_option("--report", pre_report, "Report JSON path (stdout when omitted)");
  preprocess_cmd->add_option("-o,--out", pre_out, "Cleaned dataset (JSON handoff format)");
  add_run_flags(preprocess_cmd, pre);

  // bar
  auto* bar_cmd = app.add_subcommand("bar", "Bifurcating autoregressive model");
  bar_cmd->require_subcommand(1);

  Common est;
  double level = 0.95;
  bool full_tree_est = false;
  std::string est_out;
  auto* estimate_cmd = bar_cmd->add_subcommand("estimate", "Least-squares BAR estimate with confidence intervals");
  add_input(estimate_cmd, est);
  add_preprocess_flags(estimate_cmd, est);
  estimate_cmd->add_option("--level", level, "Confidence level")->check(CLI::Range(0.5, 0.999999));
  estimate_cmd->add_flag("--full-tree", full_tree_est, "Use every mother-daughter pair of complete trees");
  estimate_cmd->add_option("-o,--out", est_out, "Estimate JSON path (stdout when omitted)");
  add_run_flags(estimate_cmd, est);

  SimulationConfig sim;
  sim.params = {0.0304, 0.0664, 0.0281, 0.0994, 0.005, 0.0};
  sim.generations = 100;
  sim.trees = 100;
  bool full_tree_sim = false;
  std::string sim_format, sim_out, sim_report;
  unsigned sim_threads = 1;
  auto* simulate_cmd = bar_cmd->add_subcommand("simulate", "Simulate BAR trees");
  simulate_cmd->add_option("--a0", sim.params.a0);
  simulate_cmd->add_option("--b0", sim.params.b0);
  simulate_cmd->add_option("--a1", sim.params.a1);
  simulate_cmd->add_option("--b1", sim.params.b1);
  simulate_cmd->add_option("--noise-sd", sim.params.noise_sd)->check(CLI::NonNegativeNumber);
  simulate_cmd->add_option("--noise-corr", sim.params.noise_correlation)->check(CLI::Range(-1.0, 1.0));
  simulate_cmd->add_option("--generations", sim.generations)->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--trees", sim.trees)->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--missing-prob", sim.missing_prob)->check(CLI::Range(0.0, 0.999));
  simulate_cmd->add_option("--seed", sim.seed);
  simulate_cmd->add_flag("--full-tree", full_tree_sim, "Complete trees (Stewart layout) instead of combs");
  simulate_cmd->add_option("-f,--format", sim_format, "Output format (default: wang for combs, stewart for trees)")
      ->check(CLI::IsMember({"wang", "stewart", "json"}));
  simulate_cmd->add_option("-o,--out", sim_out, "Output data path (stdout when omitted)");
  simulate_cmd->add_option("--report", sim_report, "Run report JSON path");
  simulate_cmd->add_option("--threads", sim_threads)->check(CLI::Range(1u, 1024u));

  // analyze
  auto* analyze_cmd = app.add_subcommand("analyze", "Statistical analyses");
  analyze_cmd->require_subcommand(1);
  struct AnalyzeFlags {
    Common c;
    std::string out;
    AnalysisOptions opt;
  };
  std::vector<std::unique_ptr<AnalyzeFlags>> analyze_flags;
  auto add_analysis = [&](const std::string& name, const std::string& help) {
    analyze_flags.push_back(std::make_unique<AnalyzeFlags>());
    auto& f = *analyze_flags.back();
    auto* cmd = analyze_cmd->add_subcommand(name, help);
    add_input(cmd, f.c);
    add_preprocess_flags(cmd, f.c);
    cmd->add_option("-o,--out", f.out, "Output directory");
    cmd->add_option("--bins", f.opt.bins, "Histogram bins")->check(CLI::PositiveNumber);
    add_run_flags(cmd, f.c);
    return std::pair{cmd, &f};
  };
  auto [mg_cmd, mg_f] = add_analysis("mg", "Per-tree regressions on mother and grandmother rates");
  mg_cmd->add_option("--min-triples", mg_f->opt.min_triples)->check(CLI::PositiveNumber);
  auto [poles_cmd, poles_f] = add_analysis("poles", "Old- versus new-pole comparisons");
  poles_cmd->add_option("--level", poles_f->opt.level)->check(CLI::Range(0.5, 0.999999));
  poles_cmd->add_option("--min-pairs", poles_f->opt.min_pairs)->check(CLI::PositiveNumber);
  auto [trends_cmd, trends_f] = add_analysis("trends", "Normalized rates by accumulated and switched poles");
  int max_cumulated = 7, max_switched = 6;
  trends_cmd->add_option("--max-cumulated", max_cumulated)->check(CLI::PositiveNumber);
  trends_cmd->add_option("--max-switched", max_switched)->check(CLI::PositiveNumber);
  auto [stat_cmd, stat_f] = add_analysis("stationarity", "Split-half tests on ARMA(1,1) residuals");
  std::string split_test = "ks";
  stat_cmd->add_option("--test", split_test, "Split test")->check(CLI::IsMember({"ks", "t"}));
  stat_cmd->add_option("--min-points", stat_f->opt.min_points)->check(CLI::PositiveNumber);
  auto [gen_cmd, gen_f] = add_analysis("generations", "Per-generation five-number summaries and histograms");
  std::vector<int> gen_list{2, 3, 4, 5, 6, 7, 8};
  GenerationSummaryOptions gen_opt;
  gen_cmd->add_option("--list", gen_list, "Generations, comma separated")->delimiter(',');
  gen_cmd->add_flag("--display-filter", gen_opt.display_filter, "Drop rates outside the display range (comb data)");
  gen_cmd->add_option("--display-min", gen_opt.display_min);
  gen_cmd->add_option("--display-max", gen_opt.display_max);

  // convert
  Common conv;
  std::string conv_to = "json", conv_out;
  auto* convert_cmd = app.add_subcommand("convert", "Rewrite a dataset in another format");
  add_input(convert_cmd, conv);
  add_preprocess_flags(convert_cmd, conv);
  convert_cmd->add_option("--to", conv_to)->check(CLI::IsMember({"wang", "stewart", "json"}));
  convert_cmd->add_option("-o,--out", conv_out, "Output path (stdout when omitted)");

  // fit-rates
  std::string rates_in, rates_out;
  auto* rates_cmd = app.add_subcommand("fit-rates", "Exponential growth rates from length time series");
  rates_cmd->add_option("-i,--input", rates_in, "CSV: cell_id,time_minutes,length[,complete_life]")->required();
  rates_cmd->add_option("-o,--out", rates_out, "Output CSV (stdout when omitted)");

  auto* selftest_cmd = app.add_subcommand("selftest", "Check distribution functions against closed forms");
  selftest_cmd->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion& e) {
    out << kVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*selftest_cmd) return selftest(out);

    if (*preprocess_cmd) {
      pre.no_preprocess = false;
      pre.preprocess = true;
      const auto l = load(pre, err);
      const auto dir = output_dir(".");
      auto report = envelope(make_config(preprocess_cmd, pre, dir), &l);
      report["retained_trees"] = l.data.trees.size();
      if (!pre_out.empty()) write_file(output_file(pre_out), to_json(l.data).dump() + "\n");
      if (pre_report.empty())
        out << dump(report);
      else
        write_file(output_file(pre_report), dump(report));
      return kExitOk;
    }

    if (*estimate_cmd) {
      const auto l = load(est, err);
      EstimateOptions eo;
      eo.level = level;
      eo.threads = est.threads;
      const BarEstimate e = full_tree_est ? estimate_full_tree(l.data, eo) : estimate_comb(l.data, eo);
      auto report = envelope(make_config(estimate_cmd, est, output_dir(".")), &l);
      report["estimator"] = full_tree_est ? "full_tree" : "comb";
      report["result"] = to_json(e);
      if (est_out.empty())
        out << dump(report);
      else
        write_file(output_file(est_out), dump(report));
      return kExitOk;
    }

    if (*simulate_cmd) {
      const Dataset ds = full_tree_sim ? simulate_full_tree(sim) : simulate_comb(sim);
      std::string format = sim_format.empty() ? (full_tree_sim ? "stewart" : "wang") : sim_format;
      std::ostringstream data;
      if (format == "json")
        data << to_json(ds).dump() << '\n';
      else if (format == "stewart")
        write_stewart(data, ds);
      else
        write_wang(data, ds);
      if (sim_out.empty())
        out << data.str();
      else
        write_file(output_file(sim_out), data.str());
      if (!sim_report.empty()) {
        Common c;
        c.seed = sim.seed;
        c.threads = sim_threads;
        auto report = envelope(make_config(simulate_cmd, c, output_dir(".")), nullptr);
        report["output"] = {{"path", sim_out.empty() ? "-" : output_file(sim_out).string()},
                            {"format", format},
                            {"trees", ds.trees.size()},
                            {"records", ds.record_count()}};
        if (!sim_out.empty()) report["output"]["fnv1a64"] = fnv1a_file(output_file(sim_out));
        write_file(output_file(sim_report), dump(report));
      }
      return kExitOk;
    }

    for (auto* cmd : {mg_cmd, poles_cmd, trends_cmd, stat_cmd, gen_cmd}) {
      if (!*cmd) continue;
      AnalyzeFlags& f = *(cmd == mg_cmd       ? mg_f
                          : cmd == poles_cmd  ? poles_f
                          : cmd == trends_cmd ? trends_f
                          : cmd == stat_cmd   ? stat_f
                                              : gen_f);
      f.opt.threads = f.c.threads;
      const auto l = load(f.c, err);
      const auto dir = output_dir(f.out);
      auto report = envelope(make_config(cmd, f.c, dir), &l);
      const std::string name = cmd->get_name();
      if (cmd == mg_cmd) {
        const auto r = mother_grandmother_analysis(l.data, f.opt);
        report["result"] = to_json(r);
        write_file(dir / "mg_regressions.csv", csv_of(r));
        write_file(dir / "mg_pvalues.csv", csv_of(std::vector<HistogramReport>{r.p_mother, r.p_grandmother}));
      } else if (cmd == poles_cmd) {
        const auto r = pole_comparison(l.data, f.opt);
        report["result"] = to_json(r);
        write_file(dir / "poles_beta_m.csv",
                   csv_of(std::vector<HistogramReport>{r.hist_beta_m_old, r.hist_beta_m_new}));
      } else if (cmd == trends_cmd) {
        const auto r = pole_trend_analysis(l.data, max_cumulated, max_switched);
        report["result"] = to_json(r);
        write_file(dir / "trends.csv", csv_of(r));
      } else if (cmd == stat_cmd) {
        const SplitTest t = split_test == "t" ? SplitTest::Student : SplitTest::KS;
        const auto r = stationarity_analysis(l.data, t, f.opt);
        report["result"] = to_json(r);
        const std::string stem = std::string("stationarity_") + to_string(t);
        write_file(dir / (stem + ".csv"), csv_of(r));
        write_file(dir / (stem + "_pvalues.csv"), csv_of(std::vector<HistogramReport>{r.p_values}));
        write_file(dir / (stem + ".json"), dump(report));
        return kExitOk;
      } else {
        if (cmd->count("--bins") > 0) gen_opt.bins = f.opt.bins;
        const auto rows = generation_summary(l.data, gen_list, gen_opt);
        report["result"] = to_json(rows);
        write_file(dir / "generations.csv", csv_of(rows));
        std::vector<HistogramReport> hs;
        for (const auto& row : rows) hs.push_back(row.histogram);
        write_file(dir / "generations_histograms.csv", csv_of(hs));
      }
      write_file(dir / (name + ".json"), dump(report));
      return kExitOk;
    }

    if (*convert_cmd) {
      const auto l = load(conv, err);
      std::ostringstream data;
      if (conv_to == "json")
        data << to_json(l.data).dump() << '\n';
      else if (conv_to == "stewart")
        write_stewart(data, l.data);
      else
        write_wang(data, l.data);
      if (conv_out.empty())
        out << data.str();
      else
        write_file(output_file(conv_out), data.str());
      return kExitOk;
    }

    if (*rates_cmd) {
      const std::filesystem::path path(rates_in);
      if (!std::filesystem::is_regular_file(path)) throw Error("input file not found: '" + path.string() + "'");
      std::ifstream in(path);
      const auto cells = read_length_csv(in, path.string());
      std::ostringstream csv;
      csv << "cell_id,growth_rate\n";
      for (const auto& [id, s] : cells) {
        const auto rate = fit_growth_rate(s);
        csv << id << ',' << (rate ? pipeline_detail::csv_num(*rate) : "NA") << '\n';
      }
      if (rates_out.empty())
        out << csv.str();
      else
        write_file(output_file(rates_out), csv.str());
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace bactree::cli
