#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace sppa {

// Every stochastic operation takes a caller-owned stream; nothing in the
// library touches global random state.
using Stream = std::mt19937_64;

// SplitMix64 finalizer. A bijection on 64-bit words.
constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Seed of replica `index` derived from `master`.
//
// Replica 0 runs on the master seed itself, so a one-replica ensemble is the
// plain run. Replica r >= 1 uses splitmix64(master + r * 0x9E3779B97F4A7C15);
// the golden-ratio increment is odd and splitmix64 is bijective, so derived
// seeds are pairwise distinct.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    if (index == 0) return master;
    return splitmix64(master + index * 0x9E3779B97F4A7C15ULL);
}

// Uniform double in [0, 1) built from the top 53 bits, independent of the
// standard library's distribution implementation.
inline double uniform01(Stream& stream) {
    return static_cast<double>(stream() >> 11) * 0x1.0p-53;
}

inline double uniform(Stream& stream, double lo, double hi) {
    return lo + (hi - lo) * uniform01(stream);
}

// Standard normal via Box-Muller, again avoiding implementation-defined
// distributions so traces are portable across standard libraries.
inline double standard_normal(Stream& stream) {
    constexpr double two_pi = 6.283185307179586476925286766559;
    double u1 = uniform01(stream);
    while (u1 <= 0.0) u1 = uniform01(stream);
    const double u2 = uniform01(stream);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

} // namespace sppa
