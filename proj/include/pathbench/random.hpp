#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace pathbench {

/**
 * @brief Seeded generator used everywhere randomness is needed.
 *
 * `std::mt19937_64` has a fully specified output sequence, but the standard
 * distributions do not, so bounded draws go through `uniform_below()` which
 * is defined here and therefore identical on every platform.
 */
using Rng = std::mt19937_64;

/// Unbiased integer in [0, bound) by rejection sampling. `bound` must be > 0.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
    const std::uint64_t limit = Rng::max() - (Rng::max() % bound);
    std::uint64_t draw = rng();
    while (draw >= limit) {
        draw = rng();
    }
    return draw % bound;
}

/// Fisher-Yates shuffle driven by `uniform_below()`.
template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_below(rng, i));
        using std::swap;
        swap(items[i - 1], items[j]);
    }
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

} // namespace pathbench
