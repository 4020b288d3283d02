#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace dmlab {

/// SplitMix64 finalizer. Bijective on 64-bit words.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Seed for a named sub-stream: identical (seed, salt) pairs give identical seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view salt) noexcept;

/// Counter-based generator: draw i is mix64(seed + (i+1) * golden).
///
/// All distributions are computed here from raw 64-bit words, never through
/// <random> distributions, so a seed yields the same stream on every platform.
/// One generator per task; do not share across threads.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) noexcept : seed_(seed) {}

    std::uint64_t next_u64() noexcept;

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept;
    /// Uniform integer in [lo, hi] inclusive.
    int uniform_int(int lo, int hi);
    double normal() noexcept;
    double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

    /// Independent child stream; consumes one draw from this generator.
    Rng fork(std::string_view salt) noexcept;

    template <class T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<int>(i - 1)));
            std::swap(items[i - 1], items[j]);
        }
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace dmlab
