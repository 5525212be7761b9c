#pragma once

// Evaluation measures over recovered label columns: Hamming-fraction feature
// distance, interesting/distinct counts and the scattering metric g.

#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "model.hpp"

namespace trifeat {

inline constexpr double default_distinct_threshold = 0.1;

inline double feature_distance(std::span<const std::uint8_t> u, std::span<const std::uint8_t> v) {
    if (u.size() != v.size()) throw InvalidParameter("feature_distance: columns differ in length");
    if (u.empty()) return 0.0;
    std::size_t d = 0;
    for (std::size_t i = 0; i < u.size(); ++i) d += (u[i] != 0) != (v[i] != 0);
    return static_cast<double>(d) / static_cast<double>(u.size());
}

// Far enough from both constant columns.
inline bool interesting(std::span<const std::uint8_t> col, double threshold = default_distinct_threshold) {
    if (col.empty()) throw InvalidParameter("interesting: empty column");
    std::size_t ones = 0;
    for (auto b : col) ones += b != 0;
    const double n = static_cast<double>(col.size());
    const double to_zero = static_cast<double>(ones) / n;
    const double to_one = static_cast<double>(col.size() - ones) / n;
    return to_zero >= threshold && to_one >= threshold;
}

struct FeatureFlags {
    bool interesting = false;
    bool distinct = false;
    // Index of the representative this column maps to; its own index when it
    // is a representative, -1 when it is not interesting.
    int representative_of = -1;
};

struct DistinctResult {
    std::size_t count = 0;
    std::vector<std::size_t> representatives;
    std::vector<FeatureFlags> flags;
};

// Greedy scan in discovery order. Only representatives are compared against.
inline DistinctResult distinct_interesting_count(std::span<const Column> columns,
                                                 double threshold = default_distinct_threshold) {
    DistinctResult r;
    for (std::size_t k = 0; k < columns.size(); ++k) {
        FeatureFlags fl;
        fl.interesting = !columns[k].empty() && interesting(columns[k], threshold);
        if (fl.interesting) {
            fl.distinct = true;
            for (auto rep : r.representatives) {
                if (feature_distance(columns[k], columns[rep]) < threshold) {
                    fl.distinct = false;
                    fl.representative_of = static_cast<int>(rep);
                    break;
                }
            }
            if (fl.distinct) {
                fl.representative_of = static_cast<int>(k);
                r.representatives.push_back(k);
            }
        }
        r.flags.push_back(fl);
    }
    r.count = r.representatives.size();
    return r;
}

// Sum over agreement classes of |P_r|^2 / N^2. Empty prefix gives 1.
inline double scatter_g(std::span<const Column> columns, std::size_t n) {
    if (n == 0) throw InvalidParameter("scatter_g: N must be >= 1");
    for (auto& c : columns) {
        if (c.size() != n) throw InvalidParameter("scatter_g: column length differs from N");
    }
    std::map<std::string, std::size_t> sizes;
    std::string key(columns.size(), '0');
    for (std::size_t x = 0; x < n; ++x) {
        for (std::size_t k = 0; k < columns.size(); ++k) key[k] = columns[k][x] ? '1' : '0';
        ++sizes[key];
    }
    double s = 0.0;
    for (auto& [_, sz] : sizes) s += static_cast<double>(sz) * static_cast<double>(sz);
    return s / (static_cast<double>(n) * static_cast<double>(n));
}

// g after each prefix, k = 0..columns.size().
inline std::vector<std::pair<std::size_t, double>> g_curve(std::span<const Column> columns, std::size_t n) {
    std::vector<std::pair<std::size_t, double>> out;
    for (std::size_t k = 0; k <= columns.size(); ++k) out.emplace_back(k, scatter_g(columns.first(k), n));
    return out;
}

struct MetricReport {
    std::size_t distinct_interesting = 0;
    std::vector<std::pair<std::size_t, double>> g_curve;
    std::vector<FeatureFlags> flags;
    std::vector<std::string> names;

    double final_g() const { return g_curve.empty() ? 1.0 : g_curve.back().second; }
};

inline MetricReport metric_report(const FeatureMatrix& m, double threshold = default_distinct_threshold) {
    MetricReport r;
    auto d = distinct_interesting_count(m.columns(), threshold);
    r.distinct_interesting = d.count;
    r.flags = std::move(d.flags);
    r.names = m.feature_names();
    if (m.n_examples() > 0) {
        r.g_curve = g_curve(m.columns(), m.n_examples());
    } else {
        r.g_curve = {{0, 1.0}};
    }
    return r;
}

inline nlohmann::json metric_report_to_json(const MetricReport& r) {
    nlohmann::json j{{"distinct_interesting", r.distinct_interesting}, {"g", r.final_g()}};
    j["g_curve"] = nlohmann::json::array();
    for (auto& [k, g] : r.g_curve) j["g_curve"].push_back({{"k", k}, {"g", g}});
    j["features"] = nlohmann::json::array();
    for (std::size_t k = 0; k < r.flags.size(); ++k) {
        nlohmann::json f{{"interesting", r.flags[k].interesting},
                         {"distinct", r.flags[k].distinct},
                         {"representative_of", r.flags[k].representative_of}};
        if (k < r.names.size()) f["name"] = r.names[k];
        j["features"].push_back(std::move(f));
    }
    return j;
}

inline std::string g_curve_csv(const MetricReport& r) {
    std::ostringstream out;
    out.precision(17);
    out << "k,g\n";
    for (auto& [k, g] : r.g_curve) out << k << ',' << g << '\n';
    return out.str();
}

} // namespace trifeat
