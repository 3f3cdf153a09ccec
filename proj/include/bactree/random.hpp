#pragma once

#include <cstdint>
#include <random>

namespace bactree {

using Rng = std::mt19937_64;

/// Independent generator for one named sub-stream (a tree, a replication) of a run seed.
inline Rng substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t salt = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(salt >> 32)};
  return Rng(seq);
}

}  // namespace bactree
