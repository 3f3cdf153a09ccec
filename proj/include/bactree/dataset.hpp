#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bactree/lineage.hpp"

namespace bactree {

enum class Source { Stewart, Wang };

inline const char* to_string(Source s) { return s == Source::Stewart ? "stewart" : "wang"; }

/// One observed cell. Optional fields are missing in the source file (sentinel -1).
struct CellRecord {
  int tree_id = 0;
  int generation = 0;
  PoleType pole = PoleType::Unknown;
  std::optional<CellLabel> label;
  std::optional<CellLabel> mother_label;
  std::optional<int> mother_generation;
  /// Rate as recorded (1/minute). Kept unchanged when the cell is marked as an outlier.
  std::optional<double> growth_rate;
  std::optional<double> mother_growth_rate;
  std::optional<int> consec_old;
  std::optional<int> consec_new;
  std::optional<int> mother_consec_old;
  std::optional<int> mother_consec_new;
  bool outlier = false;
  std::size_t source_line = 0;

  /// Rate as seen by every estimator: missing when absent or outlier-marked.
  std::optional<double> rate() const { return outlier ? std::nullopt : growth_rate; }
  bool observed() const { return rate().has_value(); }
};

/// All records of one genealogical tree, indexed by label and by comb position.
class LineageTree {
 public:
  LineageTree() = default;
  explicit LineageTree(int id) : id_(id) {}

  int id() const noexcept { return id_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  std::span<const CellRecord> records() const noexcept { return records_; }

  /// Appends a record; returns false when its label or comb position duplicates an existing one
  /// (the record is kept, the index keeps the first occurrence).
  bool add(CellRecord record) {
    record.tree_id = id_;
    const std::size_t idx = records_.size();
    bool unique = true;
    if (record.label) unique &= by_label_.emplace(*record.label, idx).second;
    if (auto pos = comb_key(record)) unique &= by_comb_.emplace(*pos, idx).second;
    if (record.generation > max_generation_) max_generation_ = record.generation;
    records_.push_back(std::move(record));
    return unique;
  }

  void set_outlier(std::size_t index, bool flag) { records_.at(index).outlier = flag; }

  const CellRecord* find(const CellLabel& label) const {
    auto it = by_label_.find(label);
    return it == by_label_.end() ? nullptr : &records_[it->second];
  }

  const CellRecord* comb(int generation, PoleType side) const {
    auto it = by_comb_.find(CombPosition{generation, generation == 0 ? PoleType::Unknown : side});
    return it == by_comb_.end() ? nullptr : &records_[it->second];
  }

  /// Cumulated-old-pole cell of a generation; generation 0 is the root.
  const CellRecord* spine(int generation) const { return comb(generation, PoleType::O); }

  int max_generation() const noexcept { return max_generation_; }

  const CellRecord* mother_of(const CellRecord& r) const {
    if (r.label) {
      if (r.label->is_root()) return nullptr;
      return find(mother(*r.label));
    }
    if (auto pos = comb_key(r); pos && pos->generation >= 1) return spine(pos->generation - 1);
    return nullptr;
  }

  /// Mother rate with the observation indicator applied: the mother's own record decides
  /// when it is present, otherwise the record's mother-rate column is used.
  std::optional<double> mother_rate(const CellRecord& r) const {
    if (const CellRecord* m = mother_of(r)) return m->rate();
    return r.mother_growth_rate;
  }

  static std::optional<CombPosition> comb_key(const CellRecord& r) {
    if (r.label) return comb_position(*r.label);
    if (r.generation == 0) return CombPosition{0, PoleType::Unknown};
    if (r.pole == PoleType::Unknown) return std::nullopt;
    return CombPosition{r.generation, r.pole};
  }

 private:
  int id_ = 0;
  std::vector<CellRecord> records_;
  std::map<CellLabel, std::size_t> by_label_;
  std::map<CombPosition, std::size_t> by_comb_;
  int max_generation_ = -1;
};

struct Dataset {
  Source source = Source::Wang;
  std::map<int, LineageTree> trees;
  std::vector<std::string> warnings;

  LineageTree& tree(int id) { return trees.try_emplace(id, id).first->second; }

  std::size_t record_count() const {
    std::size_t n = 0;
    for (const auto& [id, t] : trees) n += t.size();
    return n;
  }

  void warn(std::string message) { warnings.push_back(std::move(message)); }
};

}  // namespace bactree
