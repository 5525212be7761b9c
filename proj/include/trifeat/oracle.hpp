#pragma once

// Simulated crowd: answers elicitation queries (2/3, 1/2, left/right, tag)
// and labeling queries from ground truth under a configurable policy.

#include <algorithm>
#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "model.hpp"
#include "rng.hpp"

namespace trifeat {

enum class PolicyKind { Generalist, Specifist, UniformRandom, Homogeneous, Scripted };

struct OraclePolicy {
    PolicyKind kind = PolicyKind::UniformRandom;
    // Homogeneous: most salient first. Empty means identity order.
    std::vector<FeatureId> salience;
    // Scripted: answers by feature name, consumed in order; nullopt is NONE.
    std::vector<std::optional<std::string>> script;
    // Chance that a worker answers NONE although a valid feature exists.
    double elicitation_noise = 0.0;

    static OraclePolicy generalist() { return {PolicyKind::Generalist, {}, {}, 0.0}; }
    static OraclePolicy specifist() { return {PolicyKind::Specifist, {}, {}, 0.0}; }
    static OraclePolicy uniform() { return {PolicyKind::UniformRandom, {}, {}, 0.0}; }
    static OraclePolicy homogeneous(std::vector<FeatureId> order = {}) {
        return {PolicyKind::Homogeneous, std::move(order), {}, 0.0};
    }
    static OraclePolicy scripted(std::vector<std::optional<std::string>> answers) {
        return {PolicyKind::Scripted, {}, std::move(answers), 0.0};
    }

    bool requires_tree() const noexcept {
        return kind == PolicyKind::Generalist || kind == PolicyKind::Specifist;
    }
};

inline std::string policy_name(PolicyKind k) {
    switch (k) {
    case PolicyKind::Generalist: return "generalist";
    case PolicyKind::Specifist: return "specifist";
    case PolicyKind::UniformRandom: return "uniform";
    case PolicyKind::Homogeneous: return "homogeneous";
    case PolicyKind::Scripted: return "scripted";
    }
    return "unknown";
}

inline PolicyKind parse_policy_kind(const std::string& s) {
    if (s == "generalist") return PolicyKind::Generalist;
    if (s == "specifist") return PolicyKind::Specifist;
    if (s == "uniform") return PolicyKind::UniformRandom;
    if (s == "homogeneous") return PolicyKind::Homogeneous;
    throw ConfigError("unknown oracle policy '" + s + "'");
}

struct LabelingConfig {
    double flip_noise = 0.0;
    int votes = 1;

    void validate() const {
        if (!(flip_noise >= 0.0 && flip_noise < 1.0)) throw InvalidParameter("flip_noise must lie in [0,1)");
        if (votes < 1 || votes % 2 == 0) throw InvalidParameter("votes must be an odd count >= 1");
    }
};

// Experiment-config form: {"policy":..., "salience":[...], "flip_noise":..., "votes":...}.
struct OracleConfig {
    OraclePolicy policy;
    LabelingConfig labeling;
};

inline OracleConfig oracle_config_from_json(const nlohmann::json& j) {
    OracleConfig c;
    c.policy.kind = parse_policy_kind(j.value("policy", std::string("uniform")));
    if (j.contains("salience")) c.policy.salience = j.at("salience").get<std::vector<FeatureId>>();
    c.policy.elicitation_noise = j.value("elicitation_noise", 0.0);
    c.labeling.flip_noise = j.value("flip_noise", 0.0);
    c.labeling.votes = j.value("votes", 1);
    c.labeling.validate();
    return c;
}

inline nlohmann::json oracle_config_to_json(const OracleConfig& c) {
    nlohmann::json j{{"policy", policy_name(c.policy.kind)},
                     {"flip_noise", c.labeling.flip_noise},
                     {"votes", c.labeling.votes}};
    if (!c.policy.salience.empty()) j["salience"] = c.policy.salience;
    if (c.policy.elicitation_noise > 0.0) j["elicitation_noise"] = c.policy.elicitation_noise;
    return j;
}

// Matrix plus the tree it came from, when there is one.
struct GroundTruth {
    FeatureMatrix matrix;
    std::optional<FeatureTree> tree;
    std::vector<int> depth;

    static GroundTruth from_matrix(FeatureMatrix m) { return {std::move(m), std::nullopt, {}}; }

    static GroundTruth from_tree(FeatureTree t) {
        GroundTruth g;
        g.matrix = tree_to_matrix(t);
        g.depth = t.feature_depths();
        g.tree = std::move(t);
        return g;
    }

    std::size_t n_examples() const noexcept { return matrix.n_examples(); }
    std::size_t n_features() const noexcept { return matrix.n_features(); }
};

class Oracle {
public:
    Oracle(OraclePolicy policy, std::uint64_t seed) : policy_(std::move(policy)), rng_(seed) {}

    const OraclePolicy& policy() const noexcept { return policy_; }

    // Picks one of the valid answers per policy; nullopt iff none are valid.
    std::optional<FeatureId> choose(const GroundTruth& truth, std::span<const FeatureId> candidates) {
        if (policy_.kind == PolicyKind::Scripted) return next_scripted(truth);
        if (candidates.empty()) return std::nullopt;
        if (policy_.elicitation_noise > 0.0 && bernoulli(rng_, policy_.elicitation_noise)) return std::nullopt;
        switch (policy_.kind) {
        case PolicyKind::Generalist:
        case PolicyKind::Specifist: {
            require_tree(truth);
            bool deep = policy_.kind == PolicyKind::Specifist;
            FeatureId best = candidates[0];
            for (FeatureId f : candidates) {
                int df = truth.depth[static_cast<std::size_t>(f)];
                int db = truth.depth[static_cast<std::size_t>(best)];
                if (deep ? df > db : df < db) best = f;
            }
            return best;
        }
        case PolicyKind::UniformRandom:
            return candidates[uniform_index(rng_, candidates.size())];
        case PolicyKind::Homogeneous: {
            const auto& rank = ranks(truth.n_features());
            return *std::min_element(candidates.begin(), candidates.end(), [&](FeatureId a, FeatureId b) {
                return rank[static_cast<std::size_t>(a)] < rank[static_cast<std::size_t>(b)];
            });
        }
        case PolicyKind::Scripted: break;
        }
        return std::nullopt;
    }

    std::optional<FeatureId> answer_triple(const GroundTruth& truth, const TripleId& t) {
        check_range(truth, t.ids());
        auto cand = distinguishing_features(truth.matrix, t);
        return choose(truth, cand);
    }

    std::optional<FeatureId> answer_pair(const GroundTruth& truth, const PairId& p) {
        check_range(truth, p.ids());
        auto cand = distinguishing_features(truth.matrix, p);
        return choose(truth, cand);
    }

    // Feature present on every example of left and absent on every example of right.
    std::optional<FeatureId> answer_lr(const GroundTruth& truth, std::span<const ExampleId> left,
                                       std::span<const ExampleId> right) {
        check_range(truth, left);
        check_range(truth, right);
        for (ExampleId x : left) {
            if (std::find(right.begin(), right.end(), x) != right.end())
                throw InvalidParameter("left and right query sets overlap");
        }
        return choose(truth, lr_candidates(truth.matrix, left, right));
    }

    std::optional<FeatureId> answer_tag(const GroundTruth& truth, ExampleId x) {
        std::array<ExampleId, 1> one{x};
        check_range(truth, one);
        std::vector<FeatureId> cand;
        for (std::size_t j = 0; j < truth.n_features(); ++j) {
            if (truth.matrix.at(x, static_cast<FeatureId>(j))) cand.push_back(static_cast<FeatureId>(j));
        }
        return choose(truth, cand);
    }

    static std::vector<FeatureId> lr_candidates(const FeatureMatrix& m, std::span<const ExampleId> left,
                                                std::span<const ExampleId> right) {
        std::vector<FeatureId> out;
        for (std::size_t j = 0; j < m.n_features(); ++j) {
            const auto& col = m.columns()[j];
            bool ok = std::all_of(left.begin(), left.end(), [&](ExampleId x) { return col[static_cast<std::size_t>(x)] == 1; }) &&
                      std::all_of(right.begin(), right.end(), [&](ExampleId x) { return col[static_cast<std::size_t>(x)] == 0; });
            if (ok) out.push_back(static_cast<FeatureId>(j));
        }
        return out;
    }

private:
    void require_tree(const GroundTruth& truth) const {
        if (!truth.tree || truth.depth.size() != truth.n_features())
            throw ConfigError(policy_name(policy_.kind) + " oracle requires tree-backed ground truth");
    }

    static void check_range(const GroundTruth& truth, std::span<const ExampleId> xs) {
        for (ExampleId x : xs) {
            if (x < 0 || static_cast<std::size_t>(x) >= truth.n_examples())
                throw InvalidParameter("query example index out of range");
        }
    }

    const std::vector<std::size_t>& ranks(std::size_t m) {
        if (rank_.size() == m) return rank_;
        rank_.assign(m, m);
        if (policy_.salience.empty()) {
            for (std::size_t f = 0; f < m; ++f) rank_[f] = f;
            return rank_;
        }
        if (policy_.salience.size() != m) throw ConfigError("salience order must list every feature exactly once");
        for (std::size_t r = 0; r < m; ++r) {
            auto f = policy_.salience[r];
            if (f < 0 || static_cast<std::size_t>(f) >= m || rank_[static_cast<std::size_t>(f)] != m)
                throw ConfigError("salience order must be a permutation of the feature ids");
            rank_[static_cast<std::size_t>(f)] = r;
        }
        return rank_;
    }

    std::optional<FeatureId> next_scripted(const GroundTruth& truth) {
        if (script_pos_ >= policy_.script.size()) throw ConfigError("scripted oracle ran out of answers");
        const auto& a = policy_.script[script_pos_++];
        if (!a) return std::nullopt;
        auto f = truth.matrix.find_feature(*a);
        if (!f) throw ConfigError("scripted answer '" + *a + "' is not a feature of the truth");
        return f;
    }

    OraclePolicy policy_;
    Rng rng_;
    std::vector<std::size_t> rank_;
    std::size_t script_pos_ = 0;
};

// Majority of config.votes noisy votes on the true bit.
inline bool label(const GroundTruth& truth, FeatureId f, ExampleId x, const LabelingConfig& config, Rng& rng) {
    if (f < 0 || static_cast<std::size_t>(f) >= truth.n_features()) throw InvalidParameter("label: unknown feature");
    bool bit = truth.matrix.at(x, f) == 1;
    if (config.flip_noise <= 0.0) return bit;
    int ones = 0;
    for (int k = 0; k < config.votes; ++k) ones += (bernoulli(rng, config.flip_noise) ? !bit : bit);
    return 2 * ones > config.votes;
}

} // namespace trifeat
