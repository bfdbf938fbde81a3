#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace dcnar {

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// FNV-1a; stable across platforms, unlike std::hash.
inline std::uint64_t stable_hash(std::string_view text)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Seed for an independent stream identified by a tuple of keys.
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> keys)
{
    std::uint64_t state = 0x2545f4914f6cdd1dULL;
    for (std::uint64_t k : keys)
        state = splitmix64(state ^ splitmix64(k));
    return state;
}

using Rng = std::mt19937_64;

} // namespace dcnar
