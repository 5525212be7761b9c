#pragma once

// Brute-force reference computations used only by tests. Each one avoids the
// library's shortcuts (signature classes, combo weights, closed forms) and
// enumerates directly.

#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "trifeat/model.hpp"
#include "trifeat/resolution.hpp"

namespace oracle_ref {

using trifeat::Column;
using trifeat::ExampleId;
using trifeat::PairId;
using trifeat::TripleId;

inline bool distinguishes(const Column& c, const std::vector<ExampleId>& xs) {
    int s = 0;
    for (auto x : xs) s += c[static_cast<std::size_t>(x)];
    return s == static_cast<int>(xs.size()) - 1;
}

// Triples no discovered column distinguishes and not excluded by NONE or a
// recorded answer.
inline std::set<TripleId> unresolved_triples(std::size_t n, const std::vector<Column>& labels,
                                             const std::set<TripleId>& excluded) {
    std::set<TripleId> out;
    for (ExampleId a = 0; a < static_cast<ExampleId>(n); ++a)
        for (ExampleId b = a + 1; b < static_cast<ExampleId>(n); ++b)
            for (ExampleId c = b + 1; c < static_cast<ExampleId>(n); ++c) {
                bool resolved = excluded.count(TripleId(a, b, c)) > 0;
                for (auto& col : labels) resolved = resolved || distinguishes(col, {a, b, c});
                if (!resolved) out.insert(TripleId(a, b, c));
            }
    return out;
}

// Pairs with equal labels that are not known identical through a chain of
// NONE pairs and not excluded by a recorded answer.
inline std::set<PairId> unresolved_pairs(std::size_t n, const std::vector<Column>& labels,
                                         const std::vector<PairId>& none_pairs, const std::set<PairId>& answered) {
    // Transitive closure by repeated relaxation.
    std::vector<std::vector<char>> same(n, std::vector<char>(n, 0));
    for (std::size_t i = 0; i < n; ++i) same[i][i] = 1;
    for (auto& p : none_pairs) same[static_cast<std::size_t>(p[0])][static_cast<std::size_t>(p[1])] =
        same[static_cast<std::size_t>(p[1])][static_cast<std::size_t>(p[0])] = 1;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (same[i][k] && same[k][j]) same[i][j] = 1;
    std::set<PairId> out;
    for (ExampleId a = 0; a < static_cast<ExampleId>(n); ++a)
        for (ExampleId b = a + 1; b < static_cast<ExampleId>(n); ++b) {
            bool resolved = same[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] || answered.count(PairId(a, b));
            for (auto& col : labels) resolved = resolved || distinguishes(col, {a, b});
            if (!resolved) out.insert(PairId(a, b));
        }
    return out;
}

// g as the fraction of ordered example pairs that agree on every column.
inline double scatter_g(const std::vector<Column>& cols, std::size_t n) {
    std::size_t agree = 0;
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t y = 0; y < n; ++y) {
            bool same = true;
            for (auto& c : cols) same = same && c[x] == c[y];
            agree += same;
        }
    return static_cast<double>(agree) / static_cast<double>(n * n);
}

// Exact probabilities over all 2^(3M) bit patterns of a fresh triple under
// independent features with frequencies p.
struct TriplePatternProbabilities {
    std::vector<double> only_distinguishing; // f is the sole distinguishing feature
    std::vector<double> unique_split;        // f distinguishes and no other feature has the same split
    double last_answered_by_homogeneous = 0.0;
};

inline TriplePatternProbabilities enumerate_triples(const std::vector<double>& p) {
    const std::size_t m = p.size();
    TriplePatternProbabilities out;
    out.only_distinguishing.assign(m, 0.0);
    out.unique_split.assign(m, 0.0);
    const std::uint64_t total = std::uint64_t{1} << (3 * m);
    for (std::uint64_t code = 0; code < total; ++code) {
        double prob = 1.0;
        std::vector<int> pattern(m);
        for (std::size_t f = 0; f < m; ++f) {
            int bits = static_cast<int>((code >> (3 * f)) & 7);
            int ones = __builtin_popcount(static_cast<unsigned>(bits));
            prob *= std::pow(p[f], ones) * std::pow(1.0 - p[f], 3 - ones);
            pattern[f] = bits;
        }
        std::vector<std::size_t> dist;
        for (std::size_t f = 0; f < m; ++f) {
            if (__builtin_popcount(static_cast<unsigned>(pattern[f])) == 2) dist.push_back(f);
        }
        if (dist.size() == 1) out.only_distinguishing[dist[0]] += prob;
        for (auto f : dist) {
            bool alone = true;
            for (auto g : dist) alone = alone && (g == f || pattern[g] != pattern[f]);
            if (alone) out.unique_split[f] += prob;
        }
        if (!dist.empty() && dist.front() == m - 1) out.last_answered_by_homogeneous += prob;
    }
    return out;
}

} // namespace oracle_ref
