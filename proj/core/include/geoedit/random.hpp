#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace geoedit {

/// Seeded random source. Only the raw 64-bit engine output is used; the
/// real-valued and integer transforms are implemented here so that streams
/// are identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller.
    double normal();

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            using std::swap;
            swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

/// SplitMix64 finaliser.
std::uint64_t mix64(std::uint64_t x);

/// FNV-1a 64-bit hash of a string.
std::uint64_t fnv1a64(std::string_view text);

/// Named sub-seed: mix64(root ^ fnv1a64(name)). Every pipeline stage draws
/// its randomness from derive_seed(run_seed, "<stage>").
std::uint64_t derive_seed(std::uint64_t root, std::string_view name);

}  // namespace geoedit
