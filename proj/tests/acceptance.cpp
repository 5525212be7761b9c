// Acceptance checks. One PASS/FAIL line per criterion; INFO lines carry
// extra evidence. `acceptance <name>` runs a single criterion.

#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "trifeat/lab.hpp"

using namespace trifeat;

namespace {

const unsigned workers = default_workers();
constexpr std::uint64_t master = 0x5eed2026;

struct Verdict {
    bool pass = true;
    std::ostringstream detail;
};

void info(const std::string& name, const std::string& text) { std::cout << "INFO " << name << ": " << text << '\n'; }

std::string num(double v, int prec = 4) {
    std::ostringstream o;
    o.setf(std::ios::fixed);
    o.precision(prec);
    o << v;
    return o.str();
}

const std::vector<PolicyKind> tree_policies{PolicyKind::Generalist, PolicyKind::Specifist, PolicyKind::UniformRandom,
                                            PolicyKind::Homogeneous};

void prop41(Verdict& v) {
    for (int m : {1, 2, 4, 8, 16, 32}) {
        for (auto p : tree_policies) {
            auto s = measure_binary_exactness(m, p, 200, derive_seed(master, static_cast<std::uint64_t>(m)), workers);
            if (s.exact != 200) {
                v.pass = false;
                v.detail << " M=" << m << "/" << policy_name(p) << " exact " << s.exact << "/200 (queries "
                         << s.min_queries << ".." << s.max_queries << ", max NONE " << s.max_none << ")";
            }
        }
    }
    if (v.pass) v.detail << "24 configurations x 200 seeds: queries == M, NONE == 0";
}

void prop42(Verdict& v) {
    // Budgets M^2/12 and M^3/24 at M = 12.
    const std::size_t small = 12, large = 72;
    auto spec = measure_random_triple_success("caterpillar", 12, small, PolicyKind::Specifist, 2000, derive_seed(master, 1), workers);
    auto gen = measure_random_triple_success("caterpillar", 12, large, PolicyKind::Generalist, 2000, derive_seed(master, 2), workers);
    v.pass = spec.wilson().second < 0.55 && gen.wilson().second < 0.55;
    v.detail << "caterpillar M=12: specifist@12 success " << num(spec.rate()) << " (Wilson hi " << num(spec.wilson().second)
             << "), generalist@72 success " << num(gen.rate()) << " (Wilson hi " << num(gen.wilson().second) << ")";
    auto rs = measure_random_triple_success("proper-binary", 12, small, PolicyKind::Specifist, 2000, derive_seed(master, 3), workers);
    auto rg = measure_random_triple_success("proper-binary", 12, large, PolicyKind::Generalist, 2000, derive_seed(master, 4), workers);
    info("prop4.2", "random proper binary M=12: specifist@12 " + num(rs.rate()) + ", generalist@72 " + num(rg.rate()));
}

void prop43(Verdict& v) {
    const double delta = 0.1;
    for (int d : {2, 3}) {
        for (int m : {6, 12}) {
            std::ostringstream row;
            row << "D=" << d << " M=" << m << " theta=" << HybridConfig::theta_for(d, m, delta) << " hybrid:";
            for (auto p : tree_policies) {
                auto e = measure_hybrid_success(d, m, delta, p, 500, derive_seed(master, static_cast<std::uint64_t>(10 * d + m)), workers);
                row << ' ' << policy_name(p) << '=' << num(e.rate(), 3);
                if (e.rate() < 0.9) {
                    v.pass = false;
                    v.detail << " hybrid D=" << d << " M=" << m << " " << policy_name(p) << " " << num(e.rate(), 3);
                }
            }
            auto s = measure_single_feature(d, m, delta, PolicyKind::UniformRandom, 500,
                                            derive_seed(master, static_cast<std::uint64_t>(100 + 10 * d + m)), workers);
            row << " | single-feature@" << std::ceil(3.0 * d * d * std::log(1.0 / delta)) << "=" << num(s.rate(), 3);
            if (s.rate() < 0.9) {
                v.pass = false;
                v.detail << " single D=" << d << " M=" << m << " " << num(s.rate(), 3);
            }
            info("prop4.3", row.str());
        }
    }
    if (v.pass) v.detail << "all hybrid and single-feature rates >= 0.90 over 500 runs";
}

void lemma53(Verdict& v) {
    // M / (3/8) and 3M for triples; M / (1/2) for pairs.
    const std::map<int, double> triple_bound{{4, 32.0 / 3.0}, {8, 64.0 / 3.0}};
    for (int m : {4, 8}) {
        auto spec = IndependentSpec::uniform(m, 0.5);
        auto t = measure_fresh_queries("adaptive-triple", spec, OraclePolicy::uniform(), 1000, derive_seed(master, static_cast<std::uint64_t>(m)), workers);
        auto p = measure_fresh_queries("adaptive-pair", spec, OraclePolicy::uniform(), 1000, derive_seed(master, static_cast<std::uint64_t>(m + 100)), workers);
        const double tb = std::min(triple_bound.at(m), 3.0 * m);
        const double pb = 2.0 * m;
        const bool ok = t.mean + 2 * *t.se <= tb && p.mean + 2 * *p.se <= pb;
        v.pass = v.pass && ok;
        v.detail << " M=" << m << ": triple " << num(t.mean, 2) << "+-" << num(*t.se, 2) << " <= " << num(tb, 2)
                 << ", pair " << num(p.mean, 2) << "+-" << num(*p.se, 2) << " <= " << num(pb, 2) << ";";
    }
}

void lemma54(Verdict& v) {
    const double bound = 1.0 / std::pow(0.625, 7); // (1-q)/(1-q)^M, q = 3/8, M = 8
    auto r = measure_fresh_queries("random-triple", IndependentSpec::uniform(8, 0.5), OraclePolicy::homogeneous(), 1000,
                                   derive_seed(master, 54), workers);
    v.pass = r.mean - 2 * *r.se >= bound;
    v.detail << "mean " << num(r.mean, 2) << " SE " << num(*r.se, 2) << " vs bound " << num(bound, 2);
}

void lemma51(Verdict& v) {
    auto exact = oracle_ref::enumerate_triples(std::vector<double>(5, 0.5)).last_answered_by_homogeneous;
    const double pinned = 0.375 * std::pow(0.625, 4);
    auto frac = measure_last_feature_fraction(IndependentSpec::uniform(5, 0.5), 100000, derive_seed(master, 51));
    v.pass = std::abs(frac - pinned) <= 0.005;
    v.detail << "measured " << num(frac) << " vs (3/8)(5/8)^4 = " << num(pinned) << " (enumeration " << num(exact) << ")";
}

void lemma52(Verdict& v) {
    const std::vector<std::pair<std::string, IndependentSpec>> specs{
        {"(1,0.5)x2", IndependentSpec({{2, 0.5}})}, {"(1,0.5)+(1,0.9)", IndependentSpec({{1, 0.5}, {1, 0.9}})}};
    for (auto& [label, spec] : specs) {
        auto tau = identifiability_tau(spec);
        auto est = measure_uniqueness(spec, 100000, derive_seed(master, label.size()));
        auto exact = oracle_ref::enumerate_triples(spec.frequencies());
        std::ostringstream split;
        for (std::size_t f = 0; f < tau.tau.size(); ++f) {
            const double rel = std::abs(est.unique[f] - tau.tau[f]) / tau.tau[f];
            v.pass = v.pass && rel <= 0.10;
            v.detail << ' ' << label << " f" << f + 1 << ": tau " << num(tau.tau[f]) << " vs unique " << num(est.unique[f])
                     << " (rel " << num(rel, 3) << ", exact " << num(exact.only_distinguishing[f]) << ");";
            split << " f" << f + 1 << " tau " << num(tau.tau[f]) << " split-unique " << num(est.unique_split[f])
                  << " exact " << num(exact.unique_split[f]);
        }
        info("lemma5.2", label + " unique-split frequency vs tau:" + split.str());
    }
}

void prop61(Verdict& v) {
    for (auto [l, r] : {std::pair{2, 2}, std::pair{3, 2}}) {
        auto c = check_lr_separation(l, r);
        const bool ok = c.triples_never_yield_target && c.lr_yields_target && c.singletons_recover_roles;
        v.pass = v.pass && ok;
        v.detail << " (" << l << "," << r << "): " << c.triples_checked << " triples never yield f=" << c.triples_never_yield_target
                 << ", L-R yields f=" << c.lr_yields_target << ", singletons recover g/h=" << c.singletons_recover_roles << ";";
    }
}

void resolution(Verdict& v) {
    Rng rng(derive_seed(master, 77));
    std::size_t instances = 0, mismatches = 0;
    for (int inst = 0; inst < 200; ++inst) {
        const std::size_t n = 3 + uniform_index(rng, 10);
        const std::size_t m = 1 + uniform_index(rng, 6);
        std::vector<Column> cols(m, Column(n));
        for (auto& c : cols)
            for (auto& b : c) b = bernoulli(rng, 0.4 + 0.2 * static_cast<double>(uniform_index(rng, 2)));
        const std::size_t k = uniform_index(rng, m + 1);
        SignaturePartition part(n);
        std::vector<Column> labels(cols.begin(), cols.begin() + static_cast<std::ptrdiff_t>(k));
        for (std::size_t j = 0; j < k; ++j) part.apply_discovery(cols[j], "c" + std::to_string(j));
        NoneSet none;
        std::set<TripleId> excluded;
        std::vector<PairId> none_pairs;
        std::set<PairId> answered_pairs;
        // Exclude a few random triples and pairs, resolved or not.
        for (int e = 0; e < 4; ++e) {
            auto s = sample_distinct(rng, n, 3);
            TripleId t(static_cast<ExampleId>(s[0]), static_cast<ExampleId>(s[1]), static_cast<ExampleId>(s[2]));
            if (e % 2) none.add(t);
            else none.add_answered(t);
            excluded.insert(t);
            auto q = sample_distinct(rng, n, 2);
            PairId p(static_cast<ExampleId>(q[0]), static_cast<ExampleId>(q[1]));
            if (e % 2) {
                none.add(p);
                none_pairs.push_back(p);
            } else {
                none.add_answered(p);
                answered_pairs.insert(p);
            }
        }
        auto want_t = oracle_ref::unresolved_triples(n, labels, excluded);
        auto want_p = oracle_ref::unresolved_pairs(n, labels, none_pairs, answered_pairs);
        bool ok = count_unresolved_triples(part, none) == want_t.size() && count_unresolved_pairs(part, none) == want_p.size();
        std::set<TripleId> seen_t;
        std::set<PairId> seen_p;
        for (std::size_t d = 0; d < 30 * std::max<std::size_t>(want_t.size(), 1); ++d) {
            auto t = sample_unresolved_triple(part, none, rng);
            if (!t) break;
            seen_t.insert(*t);
        }
        for (std::size_t d = 0; d < 30 * std::max<std::size_t>(want_p.size(), 1); ++d) {
            auto p = sample_unresolved_pair(part, none, rng);
            if (!p) break;
            seen_p.insert(*p);
        }
        ok = ok && seen_t == want_t && seen_p == want_p;
        ++instances;
        mismatches += !ok;
    }
    v.pass = mismatches == 0;
    v.detail << instances << " instances, " << mismatches << " mismatches (triple/pair counts and sample support)";
}

void metrics(Verdict& v) {
    bool ok = scatter_g(std::vector<Column>{}, 9) == 1.0;
    // Fully scattered: 8 examples, 3 columns giving all patterns.
    std::vector<Column> full(3, Column(8));
    for (std::size_t x = 0; x < 8; ++x)
        for (std::size_t k = 0; k < 3; ++k) full[k][x] = (x >> k) & 1;
    ok = ok && scatter_g(full, 8) == 1.0 / 8.0;
    // Duplicate and near-duplicate.
    Column a(20, 0);
    for (std::size_t i = 0; i < 10; ++i) a[i] = 1;
    Column near = a;
    near[3] = 0;
    Column far(20, 0);
    for (std::size_t i = 5; i < 15; ++i) far[i] = 1;
    auto d = distinct_interesting_count(std::vector<Column>{a, a, near, far});
    ok = ok && d.count == 2 && d.flags[1].representative_of == 0 && d.flags[2].representative_of == 0 && d.flags[3].distinct;
    // Monotone curves on simulated runs, checked against the pairwise-count g.
    std::size_t curves = 0;
    bool monotone = true, agree = true;
    for (const std::string alg : {"adaptive-triple", "adaptive-pair", "random-triple", "tagging", "adaptive-hybrid"}) {
        for (std::uint64_t t = 0; t < 10; ++t) {
            auto seed = derive_seed(master, 500 + t);
            auto truth = GroundTruth::from_matrix(gen_tree_plus_independent(5, 3, 24, IndependentSpec::uniform(5, 0.4), seed));
            Oracle oracle(OraclePolicy::uniform(), derive_seed(seed, 1));
            AlgorithmSpec spec{alg, std::nullopt, {}};
            if (alg == "random-triple" || alg == "tagging") spec.budget = 40;
            auto r = run_algorithm(spec, truth, oracle, {}, derive_seed(seed, 2));
            auto curve = g_curve(r.features.columns(), r.features.n_examples());
            for (std::size_t k = 1; k < curve.size(); ++k) monotone = monotone && curve[k].second <= curve[k - 1].second;
            std::vector<Column> cols(r.features.columns().begin(), r.features.columns().end());
            agree = agree && std::abs(curve.back().second - oracle_ref::scatter_g(cols, r.features.n_examples())) < 1e-12;
            ++curves;
        }
    }
    v.pass = ok && monotone && agree;
    v.detail << "g(empty)=1, scattered g=1/N, duplicate cases " << (ok ? "ok" : "FAILED") << "; " << curves
             << " simulated g-curves monotone=" << monotone << ", match pairwise g=" << agree;
}

void ordering(Verdict& v) {
    auto a = measure_distinct_at_budget("adaptive-triple", 35, 100, derive_seed(master, 35), workers);
    auto r = measure_distinct_at_budget("random-triple", 35, 100, derive_seed(master, 35), workers);
    v.pass = a.mean > r.mean;
    v.detail << "budget 35, 100 trials: adaptive " << num(a.mean, 2) << " (SE " << num(a.se.value_or(0), 2) << ") vs random "
             << num(r.mean, 2) << " (SE " << num(r.se.value_or(0), 2) << ")";
}

const std::vector<std::pair<std::string, std::function<void(Verdict&)>>> criteria{
    {"prop4.1", prop41},   {"prop4.2", prop42},       {"prop4.3", prop43},   {"lemma5.3", lemma53},
    {"lemma5.4", lemma54}, {"lemma5.1", lemma51},     {"lemma5.2", lemma52}, {"prop6.1", prop61},
    {"resolution", resolution}, {"metrics", metrics}, {"ordering", ordering}};

} // namespace

int main(int argc, char** argv) {
    std::string only = argc > 1 ? argv[1] : "";
    bool any = false, all_pass = true;
    for (auto& [name, fn] : criteria) {
        if (!only.empty() && only != name) continue;
        any = true;
        Verdict v;
        try {
            fn(v);
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail << "exception: " << e.what();
        }
        std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << v.detail.str() << std::endl;
        all_pass = all_pass && v.pass;
    }
    if (!any) {
        std::cerr << "unknown criterion '" << only << "'\n";
        return 2;
    }
    return all_pass ? 0 : 1;
}
