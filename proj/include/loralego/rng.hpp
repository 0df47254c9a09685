// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace loralego {

/// Deterministic 64-bit generator: xoshiro256++ seeded through splitmix64.
/// The same seed always yields the same stream on a given build. One
/// generator must not be drawn from by several threads at once; derive a
/// child seed per worker instead.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform();

    /// Uniform integer in [0, n), unbiased. n must be > 0.
    std::size_t uniform_below(std::size_t n);

    /// One draw from N(0, 1) (Box-Muller; the spare draw is cached).
    double gaussian();

    std::vector<double> gaussian_vector(std::size_t n);

private:
    std::array<std::uint64_t, 4> state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Stream splitting: mixes a base seed with a stream index so that workers
/// (restarts, trials) own independent deterministic generators.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// Same, keyed by a string (e.g. a layer path) via FNV-1a.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);

/// n draws from N(0, 1); deterministic given the generator state.
std::vector<double> sample_gaussian(Rng& rng, std::size_t n);

}  // namespace loralego
