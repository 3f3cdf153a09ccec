#pragma once

// Arithmetic on the binary genealogical labelling: the root is 1, the daughters of
// cell k are 2k (new pole, N) and 2k+1 (old pole, O). A label's binary expansion
// after the leading 1 spells the pole types of its ancestry.

#include <algorithm>
#include <bit>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bactree/error.hpp"

namespace bactree {

enum class PoleType : std::uint8_t { N = 0, O = 1, Unknown = 2 };

inline char to_char(PoleType p) {
  switch (p) {
    case PoleType::N: return 'N';
    case PoleType::O: return 'O';
    default: return '?';
  }
}

inline std::string to_string(const std::vector<PoleType>& types) {
  std::string s;
  s.reserve(types.size());
  for (auto t : types) s.push_back(to_char(t));
  return s;
}

/// Positive cell label backed by a 128-bit unsigned integer (generations 0..127).
class CellLabel {
 public:
  using value_type = unsigned __int128;
  static constexpr int max_generation = 127;

  constexpr explicit CellLabel(value_type value) : value_(value) {
    if (value == 0) throw LineageError(LineageError::Kind::InvalidLabel, "cell label must be >= 1");
  }

  static CellLabel root() { return CellLabel(1); }

  constexpr value_type value() const noexcept { return value_; }

  /// floor(log2(label)); the root is generation 0.
  constexpr int generation() const noexcept {
    const auto hi = static_cast<std::uint64_t>(value_ >> 64);
    const auto lo = static_cast<std::uint64_t>(value_);
    return hi != 0 ? 64 + std::bit_width(hi) - 1 : std::bit_width(lo) - 1;
  }

  constexpr bool is_root() const noexcept { return value_ == 1; }

  CellLabel new_pole_daughter() const { return CellLabel(checked_child(0)); }
  CellLabel old_pole_daughter() const { return CellLabel(checked_child(1)); }

  std::string to_string() const {
    if (value_ == 0) return "0";
    std::string digits;
    auto v = value_;
    while (v != 0) {
      digits.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
      v /= 10;
    }
    return {digits.rbegin(), digits.rend()};
  }

  static CellLabel parse(std::string_view text) {
    if (text.empty()) throw LineageError(LineageError::Kind::InvalidLabel, "empty cell label");
    value_type v = 0;
    constexpr value_type limit = ~value_type{0};
    for (char c : text) {
      if (c < '0' || c > '9')
        throw LineageError(LineageError::Kind::InvalidLabel, "invalid cell label '" + std::string(text) + "'");
      const auto d = static_cast<value_type>(c - '0');
      if (v > (limit - d) / 10)
        throw LineageError(LineageError::Kind::Overflow, "cell label '" + std::string(text) + "' exceeds 128 bits");
      v = v * 10 + d;
    }
    return CellLabel(v);
  }

  friend constexpr auto operator<=>(const CellLabel&, const CellLabel&) = default;

 private:
  value_type checked_child(int bit) const {
    if (generation() >= max_generation)
      throw LineageError(LineageError::Kind::Overflow, "daughter label would exceed 128 bits");
    return (value_ << 1) | static_cast<value_type>(bit);
  }

  value_type value_;
};

inline int generation(const CellLabel& label) { return label.generation(); }

inline CellLabel mother(const CellLabel& label) {
  if (label.is_root()) throw LineageError(LineageError::Kind::NoMother, "the root cell has no mother");
  return CellLabel(label.value() >> 1);
}

inline PoleType pole_type(const CellLabel& label) {
  if (label.is_root())
    throw LineageError(LineageError::Kind::UndefinedType, "the pole type of the root cell is not observable");
  return (label.value() & 1) != 0 ? PoleType::O : PoleType::N;
}

/// Ancestral pole types, oldest first and the cell itself last. The generation-1
/// ancestor is dropped (its type is not observable), so the length is generation - 1.
inline std::vector<PoleType> type_sequence(const CellLabel& label) {
  const int g = label.generation();
  if (g < 2)
    throw LineageError(LineageError::Kind::InsufficientDepth,
                       "type sequence needs generation >= 2, label " + label.to_string() + " is in generation " +
                           std::to_string(g));
  std::vector<PoleType> seq;
  seq.reserve(static_cast<std::size_t>(g - 1));
  for (int bit = g - 2; bit >= 0; --bit)
    seq.push_back(((label.value() >> bit) & 1) != 0 ? PoleType::O : PoleType::N);
  return seq;
}

struct PoleRun {
  int count = 0;
  PoleType type = PoleType::Unknown;
  friend bool operator==(const PoleRun&, const PoleRun&) = default;
};

/// Length of the run of the cell's own pole type at the tail of its type sequence.
inline PoleRun consecutive_poles(const CellLabel& label) {
  const int g = label.generation();
  if (g < 2)
    throw LineageError(LineageError::Kind::InsufficientDepth,
                       "consecutive poles need generation >= 2, got " + std::to_string(g));
  const auto v = label.value();
  const auto lo = static_cast<std::uint64_t>(v);
  const auto hi = static_cast<std::uint64_t>(v >> 64);
  const bool old = (v & 1) != 0;
  int run = old ? std::countr_one(lo) : std::countr_zero(lo);
  if (run == 64) run += old ? std::countr_one(hi) : std::countr_zero(hi);
  return {std::min(run, g - 1), old ? PoleType::O : PoleType::N};
}

/// The generation-n pair of the comb subtree: the new-pole sister 2^{n+1}-2 and the
/// cumulated-old-pole cell 2^{n+1}-1.
inline std::pair<CellLabel, CellLabel> comb_labels(int n) {
  if (n < 1) throw LineageError(LineageError::Kind::InvalidLabel, "comb generation must be >= 1");
  if (n > CellLabel::max_generation)
    throw LineageError(LineageError::Kind::Overflow,
                       "comb labels of generation " + std::to_string(n) + " exceed 128 bits");
  // 2^{n+1} - 1 computed without forming 2^{128}.
  const auto ones = n == CellLabel::max_generation ? ~CellLabel::value_type{0}
                                                   : (CellLabel::value_type{1} << (n + 1)) - 1;
  return {CellLabel(ones - 1), CellLabel(ones)};
}

/// Spine label h_l = 2^{l+1} - 1, the old-pole cell in generation l (h_0 is the root).
inline CellLabel spine_label(int generation) {
  if (generation == 0) return CellLabel::root();
  return comb_labels(generation).second;
}

/// Position of a label on the comb subtree, if it lies on it.
struct CombPosition {
  int generation = 0;
  PoleType side = PoleType::Unknown;  // Unknown for the root
  friend auto operator<=>(const CombPosition&, const CombPosition&) = default;
};

inline std::optional<CombPosition> comb_position(const CellLabel& label) {
  if (label.is_root()) return CombPosition{0, PoleType::Unknown};
  const int g = label.generation();
  const auto [n, o] = comb_labels(g);
  if (label == o) return CombPosition{g, PoleType::O};
  if (label == n) return CombPosition{g, PoleType::N};
  return std::nullopt;
}

/// Label of a comb position, or nullopt when it does not fit in 128 bits.
inline std::optional<CellLabel> materialize(const CombPosition& pos) {
  if (pos.generation == 0) return CellLabel::root();
  if (pos.side == PoleType::Unknown || pos.generation > CellLabel::max_generation) return std::nullopt;
  const auto [n, o] = comb_labels(pos.generation);
  return pos.side == PoleType::O ? o : n;
}

}  // namespace bactree
