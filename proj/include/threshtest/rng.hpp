#pragma once

// Seeding contract: one master 64-bit seed; every replicate draws from its
// own engine keyed by (seed, stream, index). Results therefore do not
// depend on how replicates are scheduled across worker threads.

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace threshtest {

using Engine = std::mt19937_64;

/// Independent engine for replicate `index` of stream `stream`.
Engine substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

/// Mixes a seed with a label into a new 64-bit seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t label);

/// First 8 bytes of SHA-256, little endian; stable across platforms.
std::uint64_t stable_hash(std::string_view text);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view text);

/// Standard normal / Bernoulli / Poisson variates with platform-independent
/// algorithms (Boost.Random).
double draw_normal(Engine& eng);
double draw_bernoulli(Engine& eng, double p);
double draw_poisson(Engine& eng, double mean);

/// Worker count for parallel loops: `requested` if positive, else the
/// hardware concurrency (at least 1).
unsigned resolve_threads(int requested);

}  // namespace threshtest
