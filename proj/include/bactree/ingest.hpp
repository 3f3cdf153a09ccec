#pragma once

// Readers and writers for the two whitespace-column cell tables, the JSON dataset
// handoff format, and growth-rate fitting from raw length series.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bactree/dataset.hpp"
#include "bactree/error.hpp"
#include "bactree/lineage.hpp"

namespace bactree {

namespace ingest_detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

// Accepts "103.", "0.0348970", "-1.", "1e-3". Locale independent.
inline std::optional<double> parse_number(std::string_view tok) {
  double v = 0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v, std::chars_format::general);
  if (ec != std::errc{} || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline bool is_sentinel(double v) { return v == -1.0; }

struct FieldReader {
  const std::string& source;
  std::size_t line;
  std::vector<std::string_view> fields;

  double number(std::size_t col) const {
    auto v = parse_number(fields[col]);
    if (!v)
      throw ParseError(source, line,
                       "column " + std::to_string(col + 1) + ": '" + std::string(fields[col]) + "' is not a number");
    return *v;
  }

  long long integer(std::size_t col) const {
    const double v = number(col);
    if (v != std::floor(v) || std::fabs(v) > 9.0e15)
      throw ParseError(source, line,
                       "column " + std::to_string(col + 1) + ": '" + std::string(fields[col]) + "' is not an integer");
    return static_cast<long long>(v);
  }

  std::optional<double> rate(std::size_t col) const {
    const double v = number(col);
    if (is_sentinel(v)) return std::nullopt;
    return v;
  }

  std::optional<int> count(std::size_t col) const {
    const long long v = integer(col);
    if (v == -1) return std::nullopt;
    if (v < 0) throw ParseError(source, line, "column " + std::to_string(col + 1) + ": negative count");
    return static_cast<int>(v);
  }
};

template <class RowFn>
void for_each_row(std::istream& in, const std::string& source, std::size_t expected_columns, RowFn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (fields.size() != expected_columns)
      throw ParseError(source, lineno,
                       "expected " + std::to_string(expected_columns) + " columns, found " +
                           std::to_string(fields.size()));
    fn(FieldReader{source, lineno, std::move(fields)});
  }
}

inline void check_counts(Dataset& ds, std::size_t records, std::size_t trees) {
  if (ds.record_count() != records || ds.trees.size() != trees)
    ds.warn(std::string(to_string(ds.source)) + " dataset has " + std::to_string(ds.record_count()) +
            " records in " + std::to_string(ds.trees.size()) + " trees; the published data set has " +
            std::to_string(records) + " in " + std::to_string(trees));
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open input file '" + path.string() + "'");
  return in;
}

}  // namespace ingest_detail

inline constexpr std::size_t kStewartRecords = 22732;
inline constexpr std::size_t kStewartTrees = 101;
inline constexpr std::size_t kWangRecords = 45255;
inline constexpr std::size_t kWangTrees = 224;

/// Full-tree table, 11 columns: tree, cell, mother, generation, mother generation, rate,
/// mother rate, consecutive old/new poles, mother's consecutive old/new poles.
inline Dataset parse_stewart(std::istream& in, const std::string& source = "<stream>") {
  using namespace ingest_detail;
  Dataset ds;
  ds.source = Source::Stewart;
  for_each_row(in, source, 11, [&](const FieldReader& f) {
    CellRecord r;
    r.source_line = f.line;
    const long long tree = f.integer(0);
    const long long label = f.integer(1);
    if (label < 1) throw ParseError(source, f.line, "cell number must be >= 1");
    r.label = CellLabel(static_cast<CellLabel::value_type>(label));
    const long long mother_label = f.integer(2);
    if (mother_label >= 1) r.mother_label = CellLabel(static_cast<CellLabel::value_type>(mother_label));
    r.generation = static_cast<int>(f.integer(3));
    const long long mg = f.integer(4);
    if (mg >= 0) r.mother_generation = static_cast<int>(mg);
    r.growth_rate = f.rate(5);
    r.mother_growth_rate = f.rate(6);
    r.consec_old = f.count(7);
    r.consec_new = f.count(8);
    r.mother_consec_old = f.count(9);
    r.mother_consec_new = f.count(10);
    // Types are observable from generation 2 on.
    r.pole = r.label->generation() >= 2 ? pole_type(*r.label) : PoleType::Unknown;

    const std::string where = source + ":" + std::to_string(f.line) + ": ";
    if (r.label->generation() != r.generation)
      ds.warn(where + "cell " + r.label->to_string() + " lies in generation " +
              std::to_string(r.label->generation()) + ", file says " + std::to_string(r.generation));
    if (!r.label->is_root() && r.mother_label && *r.mother_label != mother(*r.label))
      ds.warn(where + "mother of cell " + r.label->to_string() + " should be " + mother(*r.label).to_string() +
              ", file says " + r.mother_label->to_string());
    if (r.mother_generation && *r.mother_generation != r.generation - 1)
      ds.warn(where + "mother generation is not generation - 1");
    if (r.consec_old.value_or(0) > 0 && r.consec_new.value_or(0) > 0)
      ds.warn(where + "both consecutive old and new pole counts are positive");

    if (!ds.tree(static_cast<int>(tree)).add(std::move(r)))
      ds.warn(where + "duplicate cell within tree " + std::to_string(tree));
  });
  ingest_detail::check_counts(ds, kStewartRecords, kStewartTrees);
  return ds;
}

/// Comb table, 9 columns: tree, generation, mother generation, rate, mother rate,
/// consecutive old/new poles, mother's consecutive old/new poles. Labels are rebuilt
/// from generation and pole type.
inline Dataset parse_wang(std::istream& in, const std::string& source = "<stream>") {
  using namespace ingest_detail;
  Dataset ds;
  ds.source = Source::Wang;
  for_each_row(in, source, 9, [&](const FieldReader& f) {
    CellRecord r;
    r.source_line = f.line;
    const long long tree = f.integer(0);
    r.generation = static_cast<int>(f.integer(1));
    if (r.generation < 0) throw ParseError(source, f.line, "negative generation");
    const long long mg = f.integer(2);
    if (mg >= 0) r.mother_generation = static_cast<int>(mg);
    r.growth_rate = f.rate(3);
    r.mother_growth_rate = f.rate(4);
    r.consec_old = f.count(5);
    r.consec_new = f.count(6);
    r.mother_consec_old = f.count(7);
    r.mother_consec_new = f.count(8);

    const std::string where = source + ":" + std::to_string(f.line) + ": ";
    const int co = r.consec_old.value_or(0);
    const int cn = r.consec_new.value_or(0);
    if (co > 0 && cn > 0)
      throw IntegrityError(where + "both consecutive old and new pole counts are positive");
    if (co > 0)
      r.pole = PoleType::O;
    else if (cn > 0)
      r.pole = PoleType::N;
    else if (r.generation > 0)
      ds.warn(where + "pole type cannot be determined (no consecutive pole count)");

    if (r.pole != PoleType::Unknown || r.generation == 0)
      r.label = materialize(CombPosition{r.generation, r.pole});
    if (r.pole == PoleType::O && co < r.generation)
      ds.warn(where + "old pole cell in generation " + std::to_string(r.generation) + " has only " +
              std::to_string(co) + " consecutive old poles");
    if (r.mother_generation && *r.mother_generation != r.generation - 1)
      ds.warn(where + "mother generation is not generation - 1");

    if (!ds.tree(static_cast<int>(tree)).add(std::move(r)))
      ds.warn(where + "duplicate comb cell within tree " + std::to_string(tree));
  });
  ingest_detail::check_counts(ds, kWangRecords, kWangTrees);
  return ds;
}

inline Dataset parse_stewart(const std::filesystem::path& path) {
  auto in = ingest_detail::open_input(path);
  return parse_stewart(in, path.string());
}

inline Dataset parse_wang(const std::filesystem::path& path) {
  auto in = ingest_detail::open_input(path);
  return parse_wang(in, path.string());
}

namespace ingest_detail {

inline std::string format_integer(long long v) { return std::to_string(v) + "."; }

inline std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, ptr);
  if (s.find_first_of(".eE") == std::string::npos) s += ".";
  return s;
}

inline std::string fmt(const std::optional<double>& v) { return v ? format_real(*v) : "-1."; }
inline std::string fmt(const std::optional<int>& v) { return v ? format_integer(*v) : "-1."; }

}  // namespace ingest_detail

/// Writes the 11-column table. Outlier-marked rates are written as missing.
inline void write_stewart(std::ostream& out, const Dataset& ds) {
  using namespace ingest_detail;
  for (const auto& [id, tree] : ds.trees)
    for (const auto& r : tree.records()) {
      out << format_integer(id) << ' ' << (r.label ? r.label->to_string() + "." : "-1.") << ' '
          << (r.mother_label ? r.mother_label->to_string() + "." : "-1.") << ' ' << format_integer(r.generation)
          << ' ' << fmt(r.mother_generation) << ' ' << fmt(r.rate()) << ' ' << fmt(r.mother_growth_rate) << ' '
          << fmt(r.consec_old) << ' ' << fmt(r.consec_new) << ' ' << fmt(r.mother_consec_old) << ' '
          << fmt(r.mother_consec_new) << '\n';
    }
}

/// Writes the 9-column comb table. Outlier-marked rates are written as missing.
inline void write_wang(std::ostream& out, const Dataset& ds) {
  using namespace ingest_detail;
  for (const auto& [id, tree] : ds.trees)
    for (const auto& r : tree.records()) {
      out << format_integer(id) << ' ' << format_integer(r.generation) << ' ' << fmt(r.mother_generation) << ' '
          << fmt(r.rate()) << ' ' << fmt(r.mother_growth_rate) << ' ' << fmt(r.consec_old) << ' '
          << fmt(r.consec_new) << ' ' << fmt(r.mother_consec_old) << ' ' << fmt(r.mother_consec_new) << '\n';
    }
}

inline void write_table(std::ostream& out, const Dataset& ds) {
  if (ds.source == Source::Stewart)
    write_stewart(out, ds);
  else
    write_wang(out, ds);
}

// ---------------------------------------------------------------------------
// JSON handoff format
//
// { "format": "bactree-dataset", "version": 1, "source": "wang"|"stewart",
//   "warnings": [..],
//   "trees": [ { "tree_id": 1, "cells": [ { "generation": 50, "pole": "N"|"O"|null,
//       "label": "2251799813685246"|null, "mother_label": ..., "mother_generation": 49|null,
//       "growth_rate": 0.0337894|null, "mother_growth_rate": ..., "consec_old": 0|null,
//       "consec_new": 1|null, "mother_consec_old": 49|null, "mother_consec_new": 0|null,
//       "outlier": false } ] } ] }
//
// Labels are decimal strings because they exceed 64 bits. "growth_rate" is the recorded
// value; an outlier keeps its value and sets "outlier": true.
// ---------------------------------------------------------------------------

namespace ingest_detail {

template <class T>
nlohmann::json opt(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

template <class T>
std::optional<T> get_opt(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

inline std::optional<CellLabel> get_label(const nlohmann::json& j, const char* key) {
  auto s = get_opt<std::string>(j, key);
  if (!s) return std::nullopt;
  return CellLabel::parse(*s);
}

}  // namespace ingest_detail

inline nlohmann::json to_json(const Dataset& ds) {
  using ingest_detail::opt;
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& [id, tree] : ds.trees) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& r : tree.records()) {
      cells.push_back({
          {"generation", r.generation},
          {"pole", r.pole == PoleType::Unknown ? nlohmann::json(nullptr) : nlohmann::json(std::string(1, to_char(r.pole)))},
          {"label", r.label ? nlohmann::json(r.label->to_string()) : nlohmann::json(nullptr)},
          {"mother_label", r.mother_label ? nlohmann::json(r.mother_label->to_string()) : nlohmann::json(nullptr)},
          {"mother_generation", opt(r.mother_generation)},
          {"growth_rate", opt(r.growth_rate)},
          {"mother_growth_rate", opt(r.mother_growth_rate)},
          {"consec_old", opt(r.consec_old)},
          {"consec_new", opt(r.consec_new)},
          {"mother_consec_old", opt(r.mother_consec_old)},
          {"mother_consec_new", opt(r.mother_consec_new)},
          {"outlier", r.outlier},
      });
    }
    trees.push_back({{"tree_id", id}, {"cells", std::move(cells)}});
  }
  return {{"format", "bactree-dataset"},
          {"version", 1},
          {"source", to_string(ds.source)},
          {"warnings", ds.warnings},
          {"trees", std::move(trees)}};
}

inline Dataset dataset_from_json(const nlohmann::json& j) {
  using namespace ingest_detail;
  if (j.value("format", "") != "bactree-dataset") throw Error("not a bactree dataset document");
  Dataset ds;
  const std::string src = j.at("source").get<std::string>();
  if (src == "stewart")
    ds.source = Source::Stewart;
  else if (src == "wang")
    ds.source = Source::Wang;
  else
    throw Error("unknown dataset source '" + src + "'");
  if (auto it = j.find("warnings"); it != j.end()) ds.warnings = it->get<std::vector<std::string>>();
  for (const auto& t : j.at("trees")) {
    LineageTree& tree = ds.tree(t.at("tree_id").get<int>());
    for (const auto& c : t.at("cells")) {
      CellRecord r;
      r.generation = c.at("generation").get<int>();
      if (auto p = get_opt<std::string>(c, "pole")) {
        if (*p == "N")
          r.pole = PoleType::N;
        else if (*p == "O")
          r.pole = PoleType::O;
        else
          throw Error("invalid pole type '" + *p + "'");
      }
      r.label = get_label(c, "label");
      r.mother_label = get_label(c, "mother_label");
      r.mother_generation = get_opt<int>(c, "mother_generation");
      r.growth_rate = get_opt<double>(c, "growth_rate");
      r.mother_growth_rate = get_opt<double>(c, "mother_growth_rate");
      r.consec_old = get_opt<int>(c, "consec_old");
      r.consec_new = get_opt<int>(c, "consec_new");
      r.mother_consec_old = get_opt<int>(c, "mother_consec_old");
      r.mother_consec_new = get_opt<int>(c, "mother_consec_new");
      r.outlier = c.value("outlier", false);
      tree.add(std::move(r));
    }
  }
  return ds;
}

enum class InputFormat { Stewart, Wang, Json };

inline InputFormat parse_input_format(std::string_view s) {
  if (s == "stewart") return InputFormat::Stewart;
  if (s == "wang") return InputFormat::Wang;
  if (s == "json") return InputFormat::Json;
  throw Error("unknown input format '" + std::string(s) + "' (expected wang, stewart or json)");
}

inline Dataset load_dataset(const std::filesystem::path& path, InputFormat format) {
  switch (format) {
    case InputFormat::Stewart: return parse_stewart(path);
    case InputFormat::Wang: return parse_wang(path);
    case InputFormat::Json: {
      auto in = ingest_detail::open_input(path);
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string(), 0, e.what());
      }
      return dataset_from_json(j);
    }
  }
  throw Error("unreachable input format");
}

// ---------------------------------------------------------------------------
// Growth rates from raw lengths
// ---------------------------------------------------------------------------

struct LengthSeries {
  std::vector<double> times;    // minutes, strictly increasing
  std::vector<double> lengths;  // micrometres
  bool complete_life = true;
};

/// Exponential growth rate tau in length(t) = x * exp(tau * t): the least-squares slope of
/// log(length) on time. Missing for incomplete lives, nonpositive lengths or < 3 points.
inline std::optional<double> fit_growth_rate(const LengthSeries& s) {
  if (!s.complete_life) return std::nullopt;
  if (s.times.size() != s.lengths.size()) throw Error("length series: times and lengths differ in size");
  const std::size_t n = s.times.size();
  if (n < 3) return std::nullopt;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(s.lengths[i] > 0)) return std::nullopt;
    if (i > 0 && !(s.times[i] > s.times[i - 1])) throw Error("length series: times must be strictly increasing");
  }
  double tbar = 0, ybar = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tbar += s.times[i];
    ybar += std::log(s.lengths[i]);
  }
  tbar /= static_cast<double>(n);
  ybar /= static_cast<double>(n);
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dt = s.times[i] - tbar;
    sxy += dt * (std::log(s.lengths[i]) - ybar);
    sxx += dt * dt;
  }
  return sxy / sxx;
}

/// Reads `cell_id,time_minutes,length[,complete_life]` rows (header optional).
/// Rows are grouped by cell id, keeping file order within a cell.
inline std::map<std::string, LengthSeries> read_length_csv(std::istream& in, const std::string& source = "<stream>") {
  using ingest_detail::parse_number;
  std::map<std::string, LengthSeries> cells;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) {
      const auto b = c.find_first_not_of(" \t");
      const auto e = c.find_last_not_of(" \t");
      cols.push_back(b == std::string::npos ? std::string{} : c.substr(b, e - b + 1));
    }
    if (lineno == 1 && cols.size() >= 1 && cols[0] == "cell_id") continue;
    if (cols.size() != 3 && cols.size() != 4)
      throw ParseError(source, lineno, "expected 3 or 4 comma-separated columns");
    auto t = parse_number(cols[1]);
    auto len = parse_number(cols[2]);
    if (!t || !len) throw ParseError(source, lineno, "time and length must be numbers");
    auto& s = cells[cols[0]];
    s.times.push_back(*t);
    s.lengths.push_back(*len);
    if (cols.size() == 4) {
      auto c = parse_number(cols[3]);
      if (!c || (*c != 0 && *c != 1)) throw ParseError(source, lineno, "complete_life must be 0 or 1");
      if (*c == 0) s.complete_life = false;
    }
  }
  return cells;
}

}  // namespace bactree
