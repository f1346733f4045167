#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace qfl {

// Every stochastic operation takes one of these by reference so that a run is
// fully determined by its seed.
using Rng = std::mt19937_64;

// Derives an independent stream seed from a master seed and a label
// (protocol tag, client id, parameter index, ...). FNV-1a over the label,
// then splitmix64 to decorrelate nearby seeds.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                                 std::uint64_t index = 0) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xffull;
            h *= 1099511628211ull;
        }
    };
    mix(master);
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    mix(index);
    // splitmix64 finalizer
    h += 0x9e3779b97f4a7c15ull;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
    return h ^ (h >> 31);
}

inline Rng make_rng(std::uint64_t master, std::string_view label, std::uint64_t index = 0) {
    return Rng(derive_seed(master, label, index));
}

}  // namespace qfl
