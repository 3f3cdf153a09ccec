#pragma once

// Report plumbing shared by the command-line front end: run configuration, input
// fingerprints and JSON forms of the preprocessing and BAR results.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "bactree/bar.hpp"
#include "bactree/error.hpp"
#include "bactree/pipelines.hpp"
#include "bactree/preprocess.hpp"

namespace bactree {

/// Everything that determines a run. Echoed verbatim into each report.
struct RunConfig {
  std::string subcommand;
  nlohmann::ordered_json flags = nlohmann::ordered_json::object();
  std::uint64_t seed = 0;
  unsigned threads = 1;
  bool deterministic = true;  // reductions always run in tree-id order
  std::string output_dir;
};

inline nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["subcommand"] = c.subcommand;
  j["flags"] = c.flags;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["deterministic"] = c.deterministic;
  j["output_dir"] = c.output_dir;
  return j;
}

/// 64-bit FNV-1a over the raw bytes of a file, as 16 hex digits.
inline std::string fnv1a_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open input file '" + path.string() + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

inline nlohmann::json to_json(const RobustStats& s) { return {{"trimmed_mean", s.m}, {"sigma", s.sigma}}; }

inline nlohmann::json to_json(const PreprocessReport& r) {
  nlohmann::json marked = nlohmann::json::array();
  for (const auto& [id, c] : r.outliers_marked)
    if (c.total() > 0) marked.push_back({{"tree_id", id}, {"old_pole", c.old_pole}, {"new_pole", c.new_pole}});
  nlohmann::json means = nlohmann::json::array();
  for (const auto& [id, m] : r.tree_means) means.push_back({{"tree_id", id}, {"mean", pipeline_detail::num(m)}});
  return {{"trees_removed_short", r.trees_removed_short},
          {"trees_removed_aberrant", r.trees_removed_aberrant},
          {"stats", to_json(r.stats)},
          {"tree_means", means},
          {"outliers_marked", marked},
          {"total_marked", r.total_marked()},
          {"warnings", r.warnings}};
}

inline nlohmann::json to_json(const BarEstimate& e) {
  static constexpr const char* names[] = {"a0", "b0", "a1", "b1"};
  nlohmann::json theta, ci;
  for (std::size_t i = 0; i < 4; ++i) {
    theta[names[i]] = e.theta_hat[i];
    ci[names[i]] = to_json(e.ci[i]);
  }
  nlohmann::json S = nlohmann::json::array(), cov = nlohmann::json::array();
  for (int i = 0; i < 4; ++i) {
    nlohmann::json srow = nlohmann::json::array(), crow = nlohmann::json::array();
    for (int k = 0; k < 4; ++k) {
      srow.push_back(e.S_n(i, k));
      crow.push_back(e.cov(i, k));
    }
    S.push_back(srow);
    cov.push_back(crow);
  }
  return {{"theta_hat", theta},
          {"ci", ci},
          {"level", e.level},
          {"S_n", S},
          {"covariance", cov},
          {"noise_var_hat", e.noise_var_hat},
          {"signal_to_noise", pipeline_detail::num(e.signal_to_noise())},
          {"counts",
           {{"trees", e.n_trees},
            {"generations", e.n_generations},
            {"pairs_new_pole", e.n_pairs[0]},
            {"pairs_old_pole", e.n_pairs[1]}}}};
}

}  // namespace bactree
