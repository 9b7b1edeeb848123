#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace qaa {

using Rng = std::mt19937_64;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

} // namespace detail

/// Derives an independent stream from a master seed and a tuple of labels, so
/// that the stream for a given cell does not depend on scheduling order.
inline Rng derive_stream(std::uint64_t master, std::initializer_list<std::uint64_t> labels)
{
    std::uint64_t h = detail::splitmix64(master);
    for (auto label : labels)
        h = detail::splitmix64(h ^ detail::splitmix64(label + 0x632be59bd9b4e019ull));
    std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                      static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32)};
    return Rng(seq);
}

inline Rng make_rng(std::uint64_t seed) { return derive_stream(seed, {}); }

/// Uniform double in [0,1).
inline double uniform01(Rng& rng)
{
    // top 53 bits; never returns 1.0
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Exponential variate with the given rate, strictly positive.
inline double exponential(Rng& rng, double rate)
{
    double u;
    do {
        u = uniform01(rng);
    } while (u == 0.0);
    return -std::log(u) / rate;
}

} // namespace qaa
