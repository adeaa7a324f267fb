#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace mvcan {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; decorrelates derived stream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic seed for a named sub-stream of a master seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt,
                                 std::uint64_t index = 0) {
    return mix64(mix64(base ^ mix64(salt)) + index);
}

/// Uniform double in [0, 1). Hand-rolled so results do not depend on the
/// standard library's distribution implementations.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

/// Standard normal via Box-Muller (single value per call).
inline double gaussian(Rng& rng) {
    const double u1 = 1.0 - uniform01(rng);  // (0, 1]
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

/// Uniform index in [0, n). Modulo bias is irrelevant for n << 2^64.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(n));
}

/// Fisher-Yates; self-contained so shuffles are reproducible across
/// standard library versions.
template <typename T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = uniform_index(rng, i);
        std::swap(v[i - 1], v[j]);
    }
}

inline std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    shuffle_in_place(idx, rng);
    return idx;
}

}  // namespace mvcan
