#pragma once

#include <cstdint>
#include <random>

namespace bayesagg {

// Immutable descriptor of a deterministic random stream. Identical
// (seed, stream) pairs always yield identical draw sequences; distinct
// stream ids give statistically independent generators.
struct RngStream {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    // Derive a sub-stream for a named purpose. Mixing is splitmix64-based,
    // so nested derivations stay well separated.
    [[nodiscard]] RngStream derive(std::uint64_t salt) const;
    [[nodiscard]] RngStream derive(std::uint64_t a, std::uint64_t b) const;
};

std::uint64_t splitmix64(std::uint64_t x);

// Engine seeded from the mixed (seed, stream) pair.
std::mt19937_64 make_engine(const RngStream& rng);

}  // namespace bayesagg
