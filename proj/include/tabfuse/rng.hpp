#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace tabfuse {

/// SplitMix64 scrambler; the basis for deriving independent substreams.
std::uint64_t splitmix64(std::uint64_t x);

/// FNV-1a over bytes, used to fold substream names into seeds.
std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL);

/// Deterministic generator for a named substream of a master seed.
/// Streams with different names (or indices) are statistically independent,
/// and drawing from one never disturbs another.
std::mt19937_64 substream(std::uint64_t seed, std::string_view name);
std::mt19937_64 substream(std::uint64_t seed, std::string_view name, std::uint64_t index);

}  // namespace tabfuse
