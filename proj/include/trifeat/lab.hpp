#pragma once

// Experiment plumbing: closed-form bound tables, a seeded parallel trial
// runner with CSV/JSON output, and the named reproduction suites.

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "algorithms.hpp"
#include "error.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "oracle.hpp"
#include "rng.hpp"

namespace trifeat {

// ---------------------------------------------------------------------------
// Bounds

struct BoundInputs {
    // Feature count for tree bounds; defaults to the spec's count.
    std::optional<int> m;
    int d = 2;
    double delta = 0.1;
    std::optional<IndependentSpec> spec;
};

struct BoundTable {
    int m = 0;
    int d = 2;
    double delta = 0.1;
    double nonadaptive_specifist = 0.0;  // M^2 / 12
    double nonadaptive_generalist = 0.0; // M^3 / 24
    double dary_single = 0.0;            // 3 D^2 ln(1/delta)
    double dary_theta = 0.0;             // 3 D^2 ln(M/delta)
    // Independent-model values; absent without a spec.
    std::optional<double> adaptive_triple;  // sum M_j / q_j
    std::optional<double> adaptive_pair;    // sum M_j / (2 p_j (1 - p_j))
    std::optional<double> nonadaptive_triple; // (1 - q_max) / prod (1 - q_i)^{M_i}
    std::optional<double> last_feature;     // q_last prod_{g != last} (1 - q_g)
    std::vector<double> tau;
    std::optional<double> tau_min;
    std::optional<double> sample_size;      // ln(1/tau_min) / tau_min
};

inline double triple_q(double p) { return 3.0 * p * p * (1.0 - p); }
inline double pair_q(double p) { return 2.0 * p * (1.0 - p); }

inline BoundTable compute_bounds(const BoundInputs& in) {
    if (in.d < 1) throw InvalidParameter("bounds: D must be >= 1");
    if (!(in.delta > 0.0 && in.delta < 1.0)) throw InvalidParameter("bounds: delta must lie in (0,1)");
    BoundTable b;
    b.m = in.m ? *in.m : (in.spec ? static_cast<int>(in.spec->n_features()) : 0);
    if (b.m < 1) throw InvalidParameter("bounds: M must be >= 1");
    b.d = in.d;
    b.delta = in.delta;
    const double m = b.m, d = in.d;
    b.nonadaptive_specifist = m * m / 12.0;
    b.nonadaptive_generalist = m * m * m / 24.0;
    b.dary_single = 3.0 * d * d * std::log(1.0 / in.delta);
    b.dary_theta = 3.0 * d * d * std::log(m / in.delta);
    if (in.spec) {
        const auto& spec = *in.spec;
        spec.validate();
        double at = 0.0, ap = 0.0, qmax = 0.0, prod = 1.0;
        for (auto& blk : spec.blocks) {
            at += blk.count / triple_q(blk.p);
            ap += blk.count / pair_q(blk.p);
            qmax = std::max(qmax, triple_q(blk.p));
            prod *= std::pow(1.0 - triple_q(blk.p), blk.count);
        }
        b.adaptive_triple = at;
        b.adaptive_pair = ap;
        b.nonadaptive_triple = (1.0 - qmax) / prod;
        auto freqs = spec.frequencies();
        double last = triple_q(freqs.back());
        for (std::size_t g = 0; g + 1 < freqs.size(); ++g) last *= 1.0 - triple_q(freqs[g]);
        b.last_feature = last;
        auto tau = identifiability_tau(spec);
        b.tau = tau.tau;
        b.tau_min = tau.tau_min;
        b.sample_size = std::log(1.0 / tau.tau_min) / tau.tau_min;
    }
    return b;
}

inline nlohmann::json bound_table_to_json(const BoundTable& b) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); };
    return {{"M", b.m},
            {"D", b.d},
            {"delta", b.delta},
            {"nonadaptive_specifist_M2_over_12", b.nonadaptive_specifist},
            {"nonadaptive_generalist_M3_over_24", b.nonadaptive_generalist},
            {"dary_single_3D2_ln_1_over_delta", b.dary_single},
            {"dary_theta_3D2_ln_M_over_delta", b.dary_theta},
            {"adaptive_triple_sum_Mj_over_qj", opt(b.adaptive_triple)},
            {"adaptive_pair_sum_Mj_over_qj", opt(b.adaptive_pair)},
            {"nonadaptive_triple_lower", opt(b.nonadaptive_triple)},
            {"last_feature_probability", opt(b.last_feature)},
            {"tau", b.tau},
            {"tau_min", opt(b.tau_min)},
            {"sample_size_log_over_tau", opt(b.sample_size)}};
}

// ---------------------------------------------------------------------------
// Statistics

struct MeanSe {
    double mean = 0.0;
    std::optional<double> se;
};

inline MeanSe mean_se(const std::vector<double>& xs) {
    MeanSe r;
    if (xs.empty()) return r;
    double s = 0.0;
    for (double x : xs) s += x;
    r.mean = s / static_cast<double>(xs.size());
    if (xs.size() < 2) return r;
    double v = 0.0;
    for (double x : xs) v += (x - r.mean) * (x - r.mean);
    v /= static_cast<double>(xs.size() - 1);
    r.se = std::sqrt(v / static_cast<double>(xs.size()));
    return r;
}

// Wilson score interval for k successes of n, z = 1.96.
inline std::pair<double, double> wilson_interval(std::size_t k, std::size_t n, double z = 1.96) {
    if (n == 0) return {0.0, 1.0};
    const double p = static_cast<double>(k) / static_cast<double>(n);
    const double nn = static_cast<double>(n);
    const double denom = 1.0 + z * z / nn;
    const double centre = (p + z * z / (2.0 * nn)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / nn + z * z / (4.0 * nn * nn)) / denom;
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

// Evaluates fn(i) for i in [0, n) on up to `workers` threads; results land
// in index order regardless of scheduling.
template <typename T>
std::vector<T> parallel_map(std::size_t n, unsigned workers, const std::function<T(std::size_t)>& fn) {
    std::vector<T> out(n);
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < std::min<std::size_t>(workers, n); ++w) {
        pool.emplace_back([&] {
            while (true) {
                auto i = next.fetch_add(1);
                if (i >= n || failed) return;
                try {
                    out[i] = fn(i);
                } catch (...) {
                    if (!failed.exchange(true)) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return out;
}

inline unsigned default_workers() {
    auto hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

// ---------------------------------------------------------------------------
// Experiment configuration

struct ModelSpec {
    std::string kind = "proper-binary";
    int m = 8;
    int d = 2;
    std::optional<int> leaf_budget;
    std::size_t n = 0;
    std::vector<FeatureBlock> blocks;
    int l = 2, r = 2;

    bool tree_backed() const { return kind == "proper-binary" || kind == "caterpillar" || kind == "d-ary-leafy"; }
    bool fresh() const { return kind == "fresh"; }
};

inline const std::vector<std::string>& model_kinds() {
    static const std::vector<std::string> k{"proper-binary", "caterpillar", "d-ary-leafy", "independent",
                                            "fresh", "lr-counterexample", "tree-plus-independent"};
    return k;
}

inline const std::vector<std::string>& algorithm_names() {
    static const std::vector<std::string> a{"adaptive-triple", "adaptive-pair", "random-triple", "tagging",
                                            "adaptive-hybrid"};
    return a;
}

struct AlgorithmSpec {
    std::string name = "adaptive-triple";
    std::optional<std::size_t> budget;
    HybridConfig hybrid;
};

struct ExperimentConfig {
    ModelSpec model;
    OracleConfig oracle;
    AlgorithmSpec algorithm;
    std::size_t trials = 1;
    std::uint64_t seed = 0;
    unsigned workers = 1;
    std::optional<std::string> out;

    void validate() const {
        auto in = [](const std::vector<std::string>& v, const std::string& s) {
            return std::find(v.begin(), v.end(), s) != v.end();
        };
        if (trials < 1) throw ConfigError("trials must be >= 1");
        if (workers < 1) throw ConfigError("workers must be >= 1");
        if (!in(model_kinds(), model.kind)) throw ConfigError("unknown model kind '" + model.kind + "'");
        if (!in(algorithm_names(), algorithm.name)) throw ConfigError("unknown algorithm '" + algorithm.name + "'");
        if (oracle.policy.requires_tree() && !model.tree_backed())
            throw ConfigError(policy_name(oracle.policy.kind) + " oracle requires a tree model");
        if (model.tree_backed() || model.kind == "tree-plus-independent") {
            if (model.m < 1) throw ConfigError("model m must be >= 1");
        }
        if (model.kind == "d-ary-leafy" || model.kind == "tree-plus-independent") {
            if (model.d < 2) throw ConfigError("model d must be >= 2");
        }
        if (model.kind == "d-ary-leafy" && model.leaf_budget && *model.leaf_budget < model.m + 2)
            throw ConfigError("leaf_budget must be >= m + 2");
        if (model.kind == "independent" || model.kind == "fresh" || model.kind == "tree-plus-independent") {
            try {
                IndependentSpec(model.blocks).validate();
            } catch (const InvalidParameter& e) {
                throw ConfigError(e.what());
            }
        }
        if ((model.kind == "independent" || model.kind == "tree-plus-independent") && model.n < 3)
            throw ConfigError("model n must be >= 3");
        if (model.kind == "tree-plus-independent" && static_cast<int>(model.n) < model.m + 2)
            throw ConfigError("tree-plus-independent needs n >= m + 2");
        if (model.kind == "lr-counterexample" && (model.l < 1 || model.r < 1))
            throw ConfigError("lr-counterexample needs l, r >= 1");
        if (model.fresh()) {
            if (algorithm.name != "adaptive-triple" && algorithm.name != "adaptive-pair" && algorithm.name != "random-triple")
                throw ConfigError("fresh model supports adaptive-triple, adaptive-pair and random-triple");
        } else if ((algorithm.name == "random-triple" || algorithm.name == "tagging") && !algorithm.budget) {
            throw ConfigError(algorithm.name + " needs a budget");
        }
        if (algorithm.name == "adaptive-hybrid") {
            try {
                algorithm.hybrid.validate();
            } catch (const InvalidParameter& e) {
                throw ConfigError(e.what());
            }
        }
        try {
            oracle.labeling.validate();
        } catch (const InvalidParameter& e) {
            throw ConfigError(e.what());
        }
    }
};

inline ModelSpec model_spec_from_json(const nlohmann::json& j) {
    ModelSpec m;
    m.kind = j.value("kind", m.kind);
    m.m = j.value("m", m.m);
    m.d = j.value("d", m.d);
    if (j.contains("leaf_budget")) m.leaf_budget = j.at("leaf_budget").get<int>();
    m.n = j.value("n", std::size_t{0});
    if (j.contains("blocks")) {
        for (auto& b : j.at("blocks")) m.blocks.push_back({b.at("count").get<int>(), b.at("p").get<double>()});
    }
    m.l = j.value("l", m.l);
    m.r = j.value("r", m.r);
    return m;
}

inline nlohmann::json model_spec_to_json(const ModelSpec& m) {
    nlohmann::json j{{"kind", m.kind}};
    if (m.tree_backed() || m.kind == "tree-plus-independent") j["m"] = m.m;
    if (m.kind == "d-ary-leafy" || m.kind == "tree-plus-independent") j["d"] = m.d;
    if (m.leaf_budget) j["leaf_budget"] = *m.leaf_budget;
    if (m.kind == "independent" || m.kind == "tree-plus-independent") j["n"] = m.n;
    if (!m.blocks.empty()) {
        j["blocks"] = nlohmann::json::array();
        for (auto& b : m.blocks) j["blocks"].push_back({{"count", b.count}, {"p", b.p}});
    }
    if (m.kind == "lr-counterexample") {
        j["l"] = m.l;
        j["r"] = m.r;
    }
    return j;
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    try {
        if (j.contains("model")) c.model = model_spec_from_json(j.at("model"));
        if (j.contains("oracle")) c.oracle = oracle_config_from_json(j.at("oracle"));
        if (j.contains("algorithm")) {
            const auto& a = j.at("algorithm");
            c.algorithm.name = a.value("name", c.algorithm.name);
            if (a.contains("budget")) c.algorithm.budget = a.at("budget").get<std::size_t>();
            c.algorithm.hybrid.d = a.value("d", c.algorithm.hybrid.d);
            c.algorithm.hybrid.delta = a.value("delta", c.algorithm.hybrid.delta);
            if (a.contains("theta")) c.algorithm.hybrid.theta = a.at("theta").get<std::size_t>();
            if (a.contains("m_guess")) c.algorithm.hybrid.m_guess = a.at("m_guess").get<double>();
            c.algorithm.hybrid.budget = c.algorithm.budget;
        }
        if (j.contains("trials")) {
            auto t = j.at("trials").get<long long>();
            if (t < 1) throw ConfigError("trials must be >= 1");
            c.trials = static_cast<std::size_t>(t);
        }
        c.seed = j.value("seed", std::uint64_t{0});
        c.workers = j.value("workers", 1u);
        if (j.contains("out") && !j.at("out").is_null()) c.out = j.at("out").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed experiment config: ") + e.what());
    } catch (const InvalidParameter& e) {
        throw ConfigError(e.what());
    }
    c.validate();
    return c;
}

inline nlohmann::json experiment_config_to_json(const ExperimentConfig& c) {
    nlohmann::json a{{"name", c.algorithm.name}};
    if (c.algorithm.budget) a["budget"] = *c.algorithm.budget;
    if (c.algorithm.name == "adaptive-hybrid") {
        a["d"] = c.algorithm.hybrid.d;
        a["delta"] = c.algorithm.hybrid.delta;
        if (c.algorithm.hybrid.theta) a["theta"] = *c.algorithm.hybrid.theta;
        if (c.algorithm.hybrid.m_guess) a["m_guess"] = *c.algorithm.hybrid.m_guess;
    }
    nlohmann::json j{{"model", model_spec_to_json(c.model)},
                     {"oracle", oracle_config_to_json(c.oracle)},
                     {"algorithm", a},
                     {"trials", c.trials},
                     {"seed", c.seed},
                     {"workers", c.workers}};
    if (c.out) j["out"] = *c.out;
    return j;
}

// Builds the ground truth a model spec describes. Fresh models have none.
inline GroundTruth build_truth(const ModelSpec& m, std::uint64_t seed) {
    if (m.kind == "proper-binary") return GroundTruth::from_tree(gen_proper_binary_tree(m.m, seed));
    if (m.kind == "caterpillar") return GroundTruth::from_tree(gen_caterpillar_tree(m.m, seed));
    if (m.kind == "d-ary-leafy")
        return GroundTruth::from_tree(gen_d_ary_leafy_tree(m.m, m.d, m.leaf_budget.value_or(2 * m.m + 2), seed));
    if (m.kind == "independent") return GroundTruth::from_matrix(sample_independent(IndependentSpec(m.blocks), m.n, seed));
    if (m.kind == "lr-counterexample") return GroundTruth::from_matrix(build_lr_counterexample(m.l, m.r).matrix);
    if (m.kind == "tree-plus-independent")
        return GroundTruth::from_matrix(gen_tree_plus_independent(m.m, m.d, m.n, IndependentSpec(m.blocks), seed));
    throw ConfigError("model kind '" + m.kind + "' has no finite ground truth");
}

// `generate` output: the tree or matrix (or the spec itself for fresh models).
inline nlohmann::json generate_model_json(const ModelSpec& m, std::uint64_t seed) {
    if (m.fresh()) return {{"kind", "fresh"}, {"spec", model_spec_to_json(m)}};
    auto truth = build_truth(m, seed);
    nlohmann::json j{{"kind", m.kind}, {"seed", seed}, {"matrix", matrix_to_json(truth.matrix)}};
    if (truth.tree) j["tree"] = tree_to_json(*truth.tree);
    return j;
}

// ---------------------------------------------------------------------------
// Experiment runner

struct TrialRow {
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    std::size_t elicitation_queries = 0;
    std::size_t none_answers = 0;
    std::size_t label_queries = 0;
    std::size_t found = 0;
    std::size_t n_features = 0;
    bool complete = false;
    std::optional<double> distinct_interesting;
    std::optional<double> final_g;
    std::string terminated_by;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<TrialRow> rows;
    std::map<std::string, MeanSe> aggregate;
};

inline RunResult run_algorithm(const AlgorithmSpec& a, const GroundTruth& truth, Oracle& oracle,
                               const LabelingConfig& labeling, std::uint64_t seed) {
    if (a.name == "adaptive-triple") return run_adaptive_triple(truth, oracle, labeling, {a.budget}, seed);
    if (a.name == "adaptive-pair") return run_adaptive_pair(truth, oracle, labeling, {a.budget}, seed);
    if (a.name == "random-triple") return run_random_triple(truth, oracle, labeling, a.budget.value_or(0), seed);
    if (a.name == "tagging") return run_tagging(truth, oracle, labeling, a.budget.value_or(0), seed);
    if (a.name == "adaptive-hybrid") {
        auto h = a.hybrid;
        h.budget = a.budget;
        return run_adaptive_hybrid(truth, oracle, labeling, h, seed);
    }
    throw ConfigError("unknown algorithm '" + a.name + "'");
}

inline TrialRow run_trial(const ExperimentConfig& c, std::size_t index) {
    TrialRow row;
    row.trial = index;
    row.seed = derive_seed(c.seed, index);
    Oracle oracle(c.oracle.policy, derive_seed(row.seed, 1));
    RunResult r;
    if (c.model.fresh()) {
        IndependentSpec spec(c.model.blocks);
        StopRule stop{c.algorithm.budget};
        if (c.algorithm.name == "adaptive-triple") r = run_adaptive_triple_fresh(spec, oracle, stop, derive_seed(row.seed, 2));
        else if (c.algorithm.name == "adaptive-pair") r = run_adaptive_pair_fresh(spec, oracle, stop, derive_seed(row.seed, 2));
        else r = run_random_triple_fresh(spec, oracle, stop, derive_seed(row.seed, 2));
        row.n_features = spec.n_features();
    } else {
        auto truth = build_truth(c.model, derive_seed(row.seed, 0));
        r = run_algorithm(c.algorithm, truth, oracle, c.oracle.labeling, derive_seed(row.seed, 2));
        row.n_features = truth.n_features();
        auto rep = metric_report(r.features);
        row.distinct_interesting = static_cast<double>(rep.distinct_interesting);
        row.final_g = rep.final_g();
    }
    row.elicitation_queries = r.elicitation_queries;
    row.none_answers = r.none_answers;
    row.label_queries = r.label_queries;
    row.found = r.n_found();
    row.complete = row.found == row.n_features;
    row.terminated_by = r.terminated_by;
    return row;
}

inline ExperimentResult run_experiment(const ExperimentConfig& c) {
    c.validate();
    ExperimentResult res;
    res.config = c;
    res.rows = parallel_map<TrialRow>(c.trials, c.workers, [&](std::size_t i) { return run_trial(c, i); });
    auto column = [&](auto get) {
        std::vector<double> xs;
        for (auto& r : res.rows) {
            if (auto v = get(r)) xs.push_back(*v);
        }
        return xs;
    };
    auto put = [&](const std::string& name, auto get) {
        auto xs = column(get);
        if (!xs.empty()) res.aggregate[name] = mean_se(xs);
    };
    using O = std::optional<double>;
    put("elicitation_queries", [](const TrialRow& r) { return O(static_cast<double>(r.elicitation_queries)); });
    put("none_answers", [](const TrialRow& r) { return O(static_cast<double>(r.none_answers)); });
    put("label_queries", [](const TrialRow& r) { return O(static_cast<double>(r.label_queries)); });
    put("found", [](const TrialRow& r) { return O(static_cast<double>(r.found)); });
    put("complete", [](const TrialRow& r) { return O(r.complete ? 1.0 : 0.0); });
    put("distinct_interesting", [](const TrialRow& r) { return r.distinct_interesting; });
    put("final_g", [](const TrialRow& r) { return r.final_g; });
    return res;
}

namespace detail {
inline std::string fmt(double v) {
    std::ostringstream o;
    o << std::setprecision(12) << v;
    return o.str();
}
inline std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }
inline nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }
} // namespace detail

inline std::string experiment_csv(const ExperimentResult& r) {
    std::ostringstream o;
    o << "trial,seed,elicitation_queries,none_answers,label_queries,found,n_features,complete,distinct_interesting,final_g,terminated_by\n";
    for (auto& row : r.rows) {
        o << row.trial << ',' << row.seed << ',' << row.elicitation_queries << ',' << row.none_answers << ','
          << row.label_queries << ',' << row.found << ',' << row.n_features << ',' << (row.complete ? 1 : 0) << ','
          << detail::fmt(row.distinct_interesting) << ',' << detail::fmt(row.final_g) << ',' << row.terminated_by << '\n';
    }
    for (const char* stat : {"mean", "se"}) {
        o << stat << ",,";
        for (const char* col : {"elicitation_queries", "none_answers", "label_queries", "found"}) {
            auto it = r.aggregate.find(col);
            if (it != r.aggregate.end()) o << (stat[0] == 'm' ? detail::fmt(it->second.mean) : detail::fmt(it->second.se));
            o << ',';
        }
        o << ',';
        for (const char* col : {"complete", "distinct_interesting", "final_g"}) {
            auto it = r.aggregate.find(col);
            if (it != r.aggregate.end()) o << (stat[0] == 'm' ? detail::fmt(it->second.mean) : detail::fmt(it->second.se));
            o << ',';
        }
        o << '\n';
    }
    return o.str();
}

inline nlohmann::json experiment_json(const ExperimentResult& r) {
    nlohmann::json j{{"config", experiment_config_to_json(r.config)}};
    j["trials"] = nlohmann::json::array();
    for (auto& row : r.rows) {
        j["trials"].push_back({{"trial", row.trial},
                               {"seed", row.seed},
                               {"elicitation_queries", row.elicitation_queries},
                               {"none_answers", row.none_answers},
                               {"label_queries", row.label_queries},
                               {"found", row.found},
                               {"n_features", row.n_features},
                               {"complete", row.complete},
                               {"distinct_interesting", detail::opt_json(row.distinct_interesting)},
                               {"final_g", detail::opt_json(row.final_g)},
                               {"terminated_by", row.terminated_by}});
    }
    nlohmann::json agg = nlohmann::json::object();
    for (auto& [k, v] : r.aggregate) agg[k] = {{"mean", v.mean}, {"se", detail::opt_json(v.se)}};
    j["aggregate"] = agg;
    return j;
}

// ---------------------------------------------------------------------------
// Measurements shared by the suites and the acceptance checks

struct ExactnessSummary {
    std::size_t runs = 0;
    std::size_t exact = 0;       // queries == M, no NONE, all found
    std::size_t min_queries = 0;
    std::size_t max_queries = 0;
    std::size_t max_none = 0;
};

inline ExactnessSummary measure_binary_exactness(int m, PolicyKind policy, std::size_t seeds, std::uint64_t master,
                                                 unsigned workers = 1) {
    auto rows = parallel_map<RunResult>(seeds, workers, [&](std::size_t s) {
        auto seed = derive_seed(master, s);
        auto truth = GroundTruth::from_tree(gen_proper_binary_tree(m, derive_seed(seed, 0)));
        OraclePolicy pol;
        pol.kind = policy;
        Oracle oracle(pol, derive_seed(seed, 1));
        return run_adaptive_triple(truth, oracle, {}, StopRule::exhaustion(), derive_seed(seed, 2));
    });
    ExactnessSummary s;
    s.runs = seeds;
    s.min_queries = SIZE_MAX;
    for (auto& r : rows) {
        s.min_queries = std::min(s.min_queries, r.elicitation_queries);
        s.max_queries = std::max(s.max_queries, r.elicitation_queries);
        s.max_none = std::max(s.max_none, r.none_answers);
        s.exact += r.elicitation_queries == static_cast<std::size_t>(m) && r.none_answers == 0 &&
                   r.n_found() == static_cast<std::size_t>(m);
    }
    return s;
}

struct SuccessEstimate {
    std::size_t successes = 0;
    std::size_t trials = 0;
    double rate() const { return trials ? static_cast<double>(successes) / static_cast<double>(trials) : 0.0; }
    std::pair<double, double> wilson() const { return wilson_interval(successes, trials); }
};

// Random Triple with a fixed budget on trees of the given family: how often
// every feature is recovered.
inline SuccessEstimate measure_random_triple_success(const std::string& family, int m, std::size_t budget,
                                                     PolicyKind policy, std::size_t trials, std::uint64_t master,
                                                     unsigned workers = 1) {
    auto ok = parallel_map<char>(trials, workers, [&](std::size_t t) -> char {
        auto seed = derive_seed(master, t);
        auto tree = family == "caterpillar" ? gen_caterpillar_tree(m, derive_seed(seed, 0))
                                            : gen_proper_binary_tree(m, derive_seed(seed, 0));
        auto truth = GroundTruth::from_tree(std::move(tree));
        OraclePolicy pol;
        pol.kind = policy;
        Oracle oracle(pol, derive_seed(seed, 1));
        auto r = run_random_triple(truth, oracle, {}, budget, derive_seed(seed, 2));
        return r.n_found() == truth.n_features();
    });
    SuccessEstimate e;
    e.trials = trials;
    for (char c : ok) e.successes += c;
    return e;
}

inline int dary_leaf_budget(int m) { return 2 * m + 2; }

inline SuccessEstimate measure_hybrid_success(int d, int m, double delta, PolicyKind policy, std::size_t runs,
                                              std::uint64_t master, unsigned workers = 1) {
    auto ok = parallel_map<char>(runs, workers, [&](std::size_t t) -> char {
        auto seed = derive_seed(master, t);
        auto truth = GroundTruth::from_tree(gen_d_ary_leafy_tree(m, d, dary_leaf_budget(m), derive_seed(seed, 0)));
        OraclePolicy pol;
        pol.kind = policy;
        Oracle oracle(pol, derive_seed(seed, 1));
        HybridConfig h;
        h.d = d;
        h.delta = delta;
        h.theta = HybridConfig::theta_for(d, m, delta);
        auto r = run_adaptive_hybrid(truth, oracle, {}, h, derive_seed(seed, 2));
        return r.n_found() == truth.n_features();
    });
    SuccessEstimate e;
    e.trials = runs;
    for (char c : ok) e.successes += c;
    return e;
}

// One example per group of identical rows.
inline GroundTruth dedupe_rows(const GroundTruth& truth) {
    std::map<Column, ExampleId> first;
    std::vector<ExampleId> keep;
    for (std::size_t x = 0; x < truth.n_examples(); ++x) {
        if (first.emplace(truth.matrix.row(static_cast<ExampleId>(x)), static_cast<ExampleId>(x)).second)
            keep.push_back(static_cast<ExampleId>(x));
    }
    FeatureMatrix m(keep.size(), truth.matrix.feature_names());
    for (std::size_t i = 0; i < keep.size(); ++i) {
        for (std::size_t j = 0; j < truth.n_features(); ++j)
            m.set(static_cast<ExampleId>(i), static_cast<FeatureId>(j), truth.matrix.at(keep[i], static_cast<FeatureId>(j)));
    }
    GroundTruth g = GroundTruth::from_matrix(std::move(m));
    g.depth = truth.depth;
    if (truth.tree) g.tree = truth.tree; // depth lookups only
    return g;
}

// A tree is a star when it has a single feature or every feature sits
// directly under the root with only leaves below it.
inline bool is_star(const FeatureTree& tree) {
    for (int f : tree.feature_nodes()) {
        if (tree.internal_child_count(f) > 0) return false;
    }
    return tree.internal_child_count(FeatureTree::root) <= 1;
}

// Random Triple with budget ceil(3 D^2 ln(1/delta)) on de-duplicated leafy
// trees: how often at least one feature is returned. Star trees are skipped
// and redrawn.
inline SuccessEstimate measure_single_feature(int d, int m, double delta, PolicyKind policy, std::size_t runs,
                                              std::uint64_t master, unsigned workers = 1) {
    const auto budget = static_cast<std::size_t>(std::ceil(3.0 * d * d * std::log(1.0 / delta)));
    auto ok = parallel_map<char>(runs, workers, [&](std::size_t t) -> char {
        auto seed = derive_seed(master, t);
        FeatureTree tree;
        for (std::uint64_t k = 0;; ++k) {
            tree = gen_d_ary_leafy_tree(m, d, dary_leaf_budget(m), derive_seed(seed, 100 + k));
            if (!is_star(tree)) break;
        }
        auto truth = dedupe_rows(GroundTruth::from_tree(std::move(tree)));
        OraclePolicy pol;
        pol.kind = policy;
        Oracle oracle(pol, derive_seed(seed, 1));
        auto r = run_random_triple(truth, oracle, {}, budget, derive_seed(seed, 2));
        return r.n_found() > 0;
    });
    SuccessEstimate e;
    e.trials = runs;
    for (char c : ok) e.successes += c;
    return e;
}

// Mean elicitation queries of a fresh-example run until all features are found.
inline MeanSe measure_fresh_queries(const std::string& algorithm, const IndependentSpec& spec, OraclePolicy policy,
                                    std::size_t trials, std::uint64_t master, unsigned workers = 1) {
    auto qs = parallel_map<double>(trials, workers, [&](std::size_t t) {
        auto seed = derive_seed(master, t);
        Oracle oracle(policy, derive_seed(seed, 1));
        RunResult r;
        if (algorithm == "adaptive-triple") r = run_adaptive_triple_fresh(spec, oracle, {}, derive_seed(seed, 2));
        else if (algorithm == "adaptive-pair") r = run_adaptive_pair_fresh(spec, oracle, {}, derive_seed(seed, 2));
        else if (algorithm == "random-triple") r = run_random_triple_fresh(spec, oracle, {}, derive_seed(seed, 2));
        else throw ConfigError("fresh mode has no algorithm '" + algorithm + "'");
        return static_cast<double>(r.elicitation_queries);
    });
    return mean_se(qs);
}

// Fraction of fresh random triples that a homogeneous crowd answers with the
// least salient feature.
inline double measure_last_feature_fraction(const IndependentSpec& spec, std::size_t samples, std::uint64_t seed) {
    auto freqs = spec.frequencies();
    Rng rng(seed);
    const auto last = static_cast<FeatureId>(freqs.size() - 1);
    std::size_t hits = 0;
    std::vector<Column> rows(3);
    for (std::size_t s = 0; s < samples; ++s) {
        for (auto& r : rows) r = draw_independent_row(freqs, rng);
        auto cand = detail::fresh_distinguishing(rows);
        // Lowest id wins under identity salience.
        if (!cand.empty() && cand.front() == last) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(samples);
}

struct UniquenessEstimate {
    // Fraction of triples where f is the only distinguishing feature.
    std::vector<double> unique;
    // Fraction of triples where f splits them 2-vs-1 and no other feature
    // has the same split.
    std::vector<double> unique_split;
};

inline UniquenessEstimate measure_uniqueness(const IndependentSpec& spec, std::size_t samples, std::uint64_t seed) {
    auto freqs = spec.frequencies();
    const std::size_t m = freqs.size();
    Rng rng(seed);
    std::vector<std::size_t> u(m, 0), us(m, 0);
    std::vector<Column> rows(3);
    for (std::size_t s = 0; s < samples; ++s) {
        for (auto& r : rows) r = draw_independent_row(freqs, rng);
        auto cand = detail::fresh_distinguishing(rows);
        if (cand.size() == 1) ++u[static_cast<std::size_t>(cand[0])];
        for (auto f : cand) {
            bool alone = true;
            for (auto g : cand) {
                if (g == f) continue;
                bool same = true;
                for (auto& r : rows) same &= r[static_cast<std::size_t>(g)] == r[static_cast<std::size_t>(f)];
                alone &= !same;
            }
            us[static_cast<std::size_t>(f)] += alone;
        }
    }
    UniquenessEstimate e;
    for (std::size_t f = 0; f < m; ++f) {
        e.unique.push_back(static_cast<double>(u[f]) / static_cast<double>(samples));
        e.unique_split.push_back(static_cast<double>(us[f]) / static_cast<double>(samples));
    }
    return e;
}

// Every feature is the unique distinguishing feature of some triple.
inline bool all_identifiable(const FeatureMatrix& m) {
    const std::size_t n = m.n_examples();
    std::vector<char> hit(m.n_features(), 0);
    std::size_t left = m.n_features();
    for (std::size_t a = 0; a < n && left; ++a) {
        for (std::size_t b = a + 1; b < n && left; ++b) {
            for (std::size_t c = b + 1; c < n && left; ++c) {
                auto cand = distinguishing_features(
                    m, TripleId(static_cast<ExampleId>(a), static_cast<ExampleId>(b), static_cast<ExampleId>(c)));
                if (cand.size() == 1 && !hit[static_cast<std::size_t>(cand[0])]) {
                    hit[static_cast<std::size_t>(cand[0])] = 1;
                    --left;
                }
            }
        }
    }
    return left == 0;
}

inline double measure_identifiable_rate(const IndependentSpec& spec, std::size_t n, std::size_t trials,
                                        std::uint64_t master, unsigned workers = 1) {
    auto ok = parallel_map<char>(trials, workers, [&](std::size_t t) -> char {
        return all_identifiable(sample_independent(spec, n, derive_seed(master, t)));
    });
    std::size_t k = 0;
    for (char c : ok) k += c;
    return static_cast<double>(k) / static_cast<double>(trials);
}

struct LrCheck {
    bool triples_never_yield_target = true;
    bool lr_yields_target = false;
    bool singletons_recover_roles = true;
    std::size_t triples_checked = 0;
};

inline LrCheck check_lr_separation(int l, int r) {
    auto ce = build_lr_counterexample(l, r);
    auto truth = GroundTruth::from_matrix(ce.matrix);
    Oracle oracle(OraclePolicy::homogeneous(ce.salience), 0);
    LrCheck out;
    const auto n = truth.n_examples();
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            for (std::size_t c = b + 1; c < n; ++c) {
                auto ans = oracle.answer_triple(
                    truth, TripleId(static_cast<ExampleId>(a), static_cast<ExampleId>(b), static_cast<ExampleId>(c)));
                ++out.triples_checked;
                if (ans == ce.target) out.triples_never_yield_target = false;
            }
        }
    }
    out.lr_yields_target = oracle.answer_lr(truth, ce.left, ce.right) == ce.target;
    for (std::size_t i = 0; i < ce.left.size(); ++i) {
        std::array<ExampleId, 1> one{ce.left[i]};
        out.singletons_recover_roles &= oracle.answer_lr(truth, {}, one) == ce.g[i];
    }
    for (std::size_t j = 0; j < ce.right.size(); ++j) {
        std::array<ExampleId, 1> one{ce.right[j]};
        out.singletons_recover_roles &= oracle.answer_lr(truth, one, {}) == ce.h[j];
    }
    return out;
}

inline ModelSpec ordering_model() {
    ModelSpec m;
    m.kind = "tree-plus-independent";
    m.m = 10;
    m.d = 3;
    m.n = 100;
    m.blocks = {{20, 0.3}};
    return m;
}

// Mean distinct-interesting count at a fixed budget on tree-plus-independent
// truth under a homogeneous crowd.
inline MeanSe measure_distinct_at_budget(const std::string& algorithm, std::size_t budget, std::size_t trials,
                                         std::uint64_t master, unsigned workers = 1) {
    ExperimentConfig c;
    c.model = ordering_model();
    c.oracle.policy = OraclePolicy::homogeneous();
    c.algorithm.name = algorithm;
    c.algorithm.budget = budget;
    c.trials = trials;
    c.seed = master;
    c.workers = workers;
    auto r = run_experiment(c);
    return r.aggregate.at("distinct_interesting");
}

// ---------------------------------------------------------------------------
// Suites

struct SuiteCheck {
    std::string description;
    bool pass = false;
    std::string evidence;
};

struct SuiteReport {
    std::string name;
    std::vector<SuiteCheck> checks;
    std::map<std::string, std::string> csv;

    bool pass() const {
        return std::all_of(checks.begin(), checks.end(), [](const SuiteCheck& c) { return c.pass; });
    }
};

struct SuiteOptions {
    std::uint64_t seed = 20260101;
    unsigned workers = default_workers();
    // Scales trial counts; 1 runs the declared sizes.
    double scale = 1.0;
};

namespace detail {
inline std::size_t scaled(std::size_t n, const SuiteOptions& o) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(n) * o.scale)));
}
inline const std::vector<PolicyKind>& tree_policies() {
    static const std::vector<PolicyKind> p{PolicyKind::Generalist, PolicyKind::Specifist, PolicyKind::UniformRandom,
                                           PolicyKind::Homogeneous};
    return p;
}
} // namespace detail

inline SuiteReport suite_prop41(const SuiteOptions& o) {
    SuiteReport rep{"prop4.1", {}, {}};
    std::ostringstream csv;
    csv << "M,policy,runs,exact,min_queries,max_queries,max_none\n";
    bool all = true;
    for (int m : {1, 2, 4, 8, 16, 32}) {
        for (auto p : detail::tree_policies()) {
            auto s = measure_binary_exactness(m, p, detail::scaled(200, o), derive_seed(o.seed, static_cast<std::uint64_t>(m)),
                                              o.workers);
            csv << m << ',' << policy_name(p) << ',' << s.runs << ',' << s.exact << ',' << s.min_queries << ','
                << s.max_queries << ',' << s.max_none << '\n';
            all &= s.exact == s.runs;
        }
    }
    rep.csv["prop4.1.csv"] = csv.str();
    rep.checks.push_back({"adaptive triple uses exactly M queries and no NONE on proper binary trees", all, ""});
    return rep;
}

inline SuiteReport suite_prop42(const SuiteOptions& o) {
    SuiteReport rep{"prop4.2", {}, {}};
    const int m = 12;
    auto b = compute_bounds({m, 2, 0.1, std::nullopt});
    const auto small = static_cast<std::size_t>(b.nonadaptive_specifist);
    const auto large = static_cast<std::size_t>(b.nonadaptive_generalist);
    std::ostringstream csv;
    csv << "family,policy,budget,trials,successes,rate,wilson_lo,wilson_hi\n";
    const std::size_t trials = detail::scaled(2000, o);
    for (std::string fam : {"caterpillar", "proper-binary"}) {
        for (auto [p, budget] : {std::pair{PolicyKind::Specifist, small}, std::pair{PolicyKind::Generalist, large}}) {
            auto e = measure_random_triple_success(fam, m, budget, p, trials, derive_seed(o.seed, budget), o.workers);
            auto [lo, hi] = e.wilson();
            csv << fam << ',' << policy_name(p) << ',' << budget << ',' << e.trials << ',' << e.successes << ','
                << detail::fmt(e.rate()) << ',' << detail::fmt(lo) << ',' << detail::fmt(hi) << '\n';
            if (fam == "caterpillar") {
                rep.checks.push_back({"caterpillar M=12, " + policy_name(p) + ", budget " + std::to_string(budget) +
                                          ": success Wilson upper < 0.55",
                                      hi < 0.55, "rate=" + detail::fmt(e.rate()) + " hi=" + detail::fmt(hi)});
            }
        }
    }
    rep.csv["prop4.2.csv"] = csv.str();
    return rep;
}

inline SuiteReport suite_lemma_dary(const SuiteOptions& o) {
    SuiteReport rep{"lemma-dary", {}, {}};
    std::ostringstream csv;
    csv << "check,D,M,policy,runs,successes,rate\n";
    const double delta = 0.1;
    for (int d : {2, 3}) {
        for (int m : {6, 12}) {
            for (auto p : detail::tree_policies()) {
                auto e = measure_hybrid_success(d, m, delta, p, detail::scaled(500, o),
                                                derive_seed(o.seed, static_cast<std::uint64_t>(10 * d + m)), o.workers);
                csv << "hybrid," << d << ',' << m << ',' << policy_name(p) << ',' << e.trials << ',' << e.successes << ','
                    << detail::fmt(e.rate()) << '\n';
                rep.checks.push_back({"hybrid D=" + std::to_string(d) + " M=" + std::to_string(m) + " " + policy_name(p) +
                                          " recovers all features in >= 90% of runs",
                                      e.rate() >= 0.9, detail::fmt(e.rate())});
            }
            auto e = measure_single_feature(d, m, delta, PolicyKind::UniformRandom, detail::scaled(500, o),
                                            derive_seed(o.seed, static_cast<std::uint64_t>(1000 + 10 * d + m)), o.workers);
            csv << "single," << d << ',' << m << ",uniform," << e.trials << ',' << e.successes << ','
                << detail::fmt(e.rate()) << '\n';
            rep.checks.push_back({"random triple D=" + std::to_string(d) + " M=" + std::to_string(m) +
                                      " finds a feature within 3D^2 ln(1/delta) queries in >= 90% of runs",
                                  e.rate() >= 0.9, detail::fmt(e.rate())});
        }
    }
    rep.csv["lemma-dary.csv"] = csv.str();
    return rep;
}

inline SuiteReport suite_prop43(const SuiteOptions& o) {
    auto rep = suite_lemma_dary(o);
    rep.name = "prop4.3";
    return rep;
}

inline SuiteReport suite_lemma51(const SuiteOptions& o) {
    SuiteReport rep{"lemma5.1", {}, {}};
    auto spec = IndependentSpec::uniform(5, 0.5);
    auto b = compute_bounds({std::nullopt, 2, 0.1, spec});
    auto frac = measure_last_feature_fraction(spec, detail::scaled(100000, o), o.seed);
    rep.checks.push_back({"fraction of triples answered with the least salient feature matches q(1-q)^(M-1) within 0.005",
                          std::abs(frac - *b.last_feature) <= 0.005,
                          "measured=" + detail::fmt(frac) + " bound=" + detail::fmt(*b.last_feature)});
    rep.csv["lemma5.1.csv"] = "measured,predicted\n" + detail::fmt(frac) + "," + detail::fmt(*b.last_feature) + "\n";
    return rep;
}

inline SuiteReport suite_lemma52(const SuiteOptions& o) {
    SuiteReport rep{"lemma5.2", {}, {}};
    std::ostringstream csv;
    csv << "spec,feature,tau,unique_freq,split_freq\n";
    const std::vector<std::pair<std::string, IndependentSpec>> specs{
        {"0.5x2", IndependentSpec({{2, 0.5}})}, {"0.5+0.9", IndependentSpec({{1, 0.5}, {1, 0.9}})}};
    for (auto& [label, spec] : specs) {
        auto tau = identifiability_tau(spec);
        auto est = measure_uniqueness(spec, detail::scaled(100000, o), derive_seed(o.seed, label.size()));
        bool ok = true;
        for (std::size_t f = 0; f < tau.tau.size(); ++f) {
            csv << label << ',' << f << ',' << detail::fmt(tau.tau[f]) << ',' << detail::fmt(est.unique[f]) << ','
                << detail::fmt(est.unique_split[f]) << '\n';
            ok &= std::abs(est.unique[f] - tau.tau[f]) <= 0.1 * tau.tau[f];
        }
        rep.checks.push_back({"tau calculator matches unique-distinguishing frequency within 10% on " + label, ok, ""});
    }
    // Qualitative sample-size behaviour.
    auto spec = IndependentSpec({{1, 0.5}, {1, 0.9}});
    auto b = compute_bounds({std::nullopt, 2, 0.1, spec});
    std::ostringstream curve;
    curve << "c,N,identifiable_rate\n";
    std::vector<double> rates;
    for (double c : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        auto n = static_cast<std::size_t>(std::max(3.0, std::ceil(c * *b.sample_size)));
        auto rate = measure_identifiable_rate(spec, n, detail::scaled(200, o), derive_seed(o.seed, n), o.workers);
        curve << c << ',' << n << ',' << detail::fmt(rate) << '\n';
        rates.push_back(rate);
    }
    rep.csv["lemma5.2-curve.csv"] = curve.str();
    rep.checks.push_back({"identifiability probability rises to >= 0.9 as N grows past c log(1/tau_min)/tau_min",
                          rates.back() >= 0.9 && rates.back() >= rates.front(), ""});
    rep.csv["lemma5.2.csv"] = csv.str();
    return rep;
}

inline SuiteReport suite_lemma53(const SuiteOptions& o) {
    SuiteReport rep{"lemma5.3", {}, {}};
    std::ostringstream csv;
    csv << "algorithm,M,trials,mean,se,bound\n";
    for (int m : {4, 8}) {
        auto spec = IndependentSpec::uniform(m, 0.5);
        auto b = compute_bounds({std::nullopt, 2, 0.1, spec});
        for (auto [alg, bound] : {std::pair<std::string, double>{"adaptive-triple", std::min(*b.adaptive_triple, 3.0 * m)},
                                  std::pair<std::string, double>{"adaptive-pair", *b.adaptive_pair}}) {
            auto ms = measure_fresh_queries(alg, spec, OraclePolicy::uniform(), detail::scaled(1000, o),
                                            derive_seed(o.seed, static_cast<std::uint64_t>(m)), o.workers);
            const double se = ms.se.value_or(0.0);
            csv << alg << ',' << m << ',' << detail::scaled(1000, o) << ',' << detail::fmt(ms.mean) << ','
                << detail::fmt(se) << ',' << detail::fmt(bound) << '\n';
            rep.checks.push_back({alg + " M=" + std::to_string(m) + ": mean + 2SE <= bound", ms.mean + 2 * se <= bound,
                                  "mean=" + detail::fmt(ms.mean) + " bound=" + detail::fmt(bound)});
        }
    }
    rep.csv["lemma5.3.csv"] = csv.str();
    return rep;
}

inline SuiteReport suite_lemma54(const SuiteOptions& o) {
    SuiteReport rep{"lemma5.4", {}, {}};
    auto spec = IndependentSpec::uniform(8, 0.5);
    auto b = compute_bounds({std::nullopt, 2, 0.1, spec});
    auto ms = measure_fresh_queries("random-triple", spec, OraclePolicy::homogeneous(), detail::scaled(1000, o), o.seed,
                                    o.workers);
    const double se = ms.se.value_or(0.0);
    rep.checks.push_back({"random triple M=8: mean - 2SE >= (1-q)/(1-q)^M", ms.mean - 2 * se >= *b.nonadaptive_triple,
                          "mean=" + detail::fmt(ms.mean) + " bound=" + detail::fmt(*b.nonadaptive_triple)});
    rep.csv["lemma5.4.csv"] = "mean,se,bound\n" + detail::fmt(ms.mean) + "," + detail::fmt(se) + "," +
                              detail::fmt(*b.nonadaptive_triple) + "\n";
    return rep;
}

inline SuiteReport suite_prop61(const SuiteOptions&) {
    SuiteReport rep{"prop6.1", {}, {}};
    std::ostringstream csv;
    csv << "l,r,triples,never_target,lr_target,singletons\n";
    for (auto [l, r] : {std::pair{2, 2}, std::pair{3, 2}}) {
        auto c = check_lr_separation(l, r);
        csv << l << ',' << r << ',' << c.triples_checked << ',' << c.triples_never_yield_target << ','
            << c.lr_yields_target << ',' << c.singletons_recover_roles << '\n';
        auto tag = "(" + std::to_string(l) + "," + std::to_string(r) + ")";
        rep.checks.push_back({tag + " no 2/3 query yields f", c.triples_never_yield_target, ""});
        rep.checks.push_back({tag + " L-R query yields f", c.lr_yields_target, ""});
        rep.checks.push_back({tag + " singleton queries recover each g_i and h_j", c.singletons_recover_roles, ""});
    }
    rep.csv["prop6.1.csv"] = csv.str();
    return rep;
}

inline SuiteReport suite_metrics_sanity(const SuiteOptions& o) {
    SuiteReport rep{"metrics-sanity", {}, {}};
    rep.checks.push_back({"g of no features is 1", scatter_g(std::vector<Column>{}, 7) == 1.0, ""});
    {
        std::vector<Column> cols{{0, 1, 0, 1}, {0, 0, 1, 1}};
        rep.checks.push_back({"fully scattered g is 1/N", scatter_g(cols, 4) == 0.25, ""});
    }
    {
        Column a(20, 0), b;
        for (int i = 0; i < 10; ++i) a[static_cast<std::size_t>(i)] = 1;
        b = a;
        b[0] = 0; // 95% agreement
        std::vector<Column> cols{a, a, b};
        auto d = distinct_interesting_count(cols);
        rep.checks.push_back({"duplicate and near-duplicate collapse to one representative",
                              d.count == 1 && d.flags[1].representative_of == 0 && d.flags[2].representative_of == 0, ""});
    }
    bool monotone = true;
    for (const std::string alg : {"adaptive-triple", "random-triple", "adaptive-pair", "tagging"}) {
        for (std::size_t t = 0; t < detail::scaled(20, o); ++t) {
            auto seed = derive_seed(o.seed, t);
            auto truth = GroundTruth::from_matrix(gen_tree_plus_independent(6, 3, 30, IndependentSpec::uniform(6, 0.4), seed));
            Oracle oracle(OraclePolicy::uniform(), derive_seed(seed, 1));
            AlgorithmSpec a{alg, 40, {}};
            if (alg == "adaptive-triple" || alg == "adaptive-pair") a.budget.reset();
            auto r = run_algorithm(a, truth, oracle, {}, derive_seed(seed, 2));
            auto curve = g_curve(r.features.columns(), r.features.n_examples());
            for (std::size_t k = 1; k < curve.size(); ++k) monotone &= curve[k].second <= curve[k - 1].second + 1e-15;
        }
    }
    rep.checks.push_back({"g curves of simulated runs are non-increasing", monotone, ""});
    return rep;
}

inline const std::map<std::string, std::function<SuiteReport(const SuiteOptions&)>>& suites() {
    static const std::map<std::string, std::function<SuiteReport(const SuiteOptions&)>> s{
        {"prop4.1", suite_prop41},   {"prop4.2", suite_prop42},   {"prop4.3", suite_prop43},
        {"lemma-dary", suite_lemma_dary}, {"lemma5.1", suite_lemma51}, {"lemma5.2", suite_lemma52},
        {"lemma5.3", suite_lemma53}, {"lemma5.4", suite_lemma54}, {"prop6.1", suite_prop61},
        {"metrics-sanity", suite_metrics_sanity}};
    return s;
}

inline std::vector<std::string> suite_names() {
    std::vector<std::string> out;
    for (auto& [k, _] : suites()) out.push_back(k);
    return out;
}

inline SuiteReport reproduce(const std::string& suite, const SuiteOptions& o = {}) {
    auto it = suites().find(suite);
    if (it == suites().end()) {
        std::string list;
        for (auto& n : suite_names()) list += (list.empty() ? "" : ", ") + n;
        throw ConfigError("unknown suite '" + suite + "'; available: " + list);
    }
    return it->second(o);
}

inline void write_evidence(const SuiteReport& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (auto& [name, body] : r.csv) {
        std::ofstream f(dir / name, std::ios::binary);
        f << body;
    }
}

} // namespace trifeat
