#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace badam {

/// The single random engine type used everywhere. Every stochastic routine
/// takes one explicitly; there is no global generator.
using Rng = std::mt19937_64;

/// One component of a seed derivation path.
using SeedLabel = std::variant<std::string, std::int64_t>;

/// Derives a child seed from a master seed and a label path, e.g.
/// seed_derive(42, {"prune", 3, "init"}). The mixing uses only fixed-width
/// integer arithmetic (FNV-1a over a type-tagged byte encoding, then a
/// SplitMix64 finaliser per label), so results do not depend on platform or
/// standard library. Label order matters.
std::uint64_t seed_derive(std::uint64_t master, const std::vector<SeedLabel>& labels);

/// Convenience: an engine seeded from seed_derive(master, labels).
Rng derive_rng(std::uint64_t master, const std::vector<SeedLabel>& labels);

}  // namespace badam
