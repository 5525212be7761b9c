#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace trifeat {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent stream for (master, index). Used for per-trial seeds and for
// splitting one seed into model / algorithm / labeling streams.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline bool bernoulli(Rng& rng, double p) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

// k distinct values from [0, n), unordered. Floyd's algorithm; k is tiny here.
inline std::vector<std::size_t> sample_distinct(Rng& rng, std::size_t n, std::size_t k) {
    std::vector<std::size_t> out;
    out.reserve(k);
    for (std::size_t j = n - k; j < n; ++j) {
        std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
        bool seen = false;
        for (auto v : out) {
            if (v == t) {
                seen = true;
                break;
            }
        }
        out.push_back(seen ? j : t);
    }
    return out;
}

} // namespace trifeat
