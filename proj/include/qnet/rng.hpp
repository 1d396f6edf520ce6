#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string_view>

namespace qnet {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to turn structured seed material into
/// well-mixed 64-bit stream seeds.
std::uint64_t mix64(std::uint64_t x);

/// Stable 64-bit hash of an experiment identifier (FNV-1a).
std::uint64_t hash_id(std::string_view id);

/// Seed of the private stream owned by one trial. The result depends only on
/// (master, experiment, index, salt), never on scheduling.
std::uint64_t derive_seed(std::uint64_t master, std::string_view experiment, std::uint64_t index,
                          std::uint64_t salt = 0);

/// Uniform double in [0, 1) built from the top 53 bits of one draw. Unlike
/// std::uniform_real_distribution this is identical across standard libraries.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Number of worker threads: explicit request, else QNETLAB_THREADS, else 1.
unsigned resolve_threads(unsigned requested);

/// Runs body(i) for i in [0, count) on up to `threads` workers. Each index is
/// processed exactly once; callers write results into per-index slots.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace qnet
