#pragma once

// Discovery procedures. Each run owns its partition, transcript and RNG
// streams and talks to ground truth only through an Oracle and label().
//
//   run_adaptive_triple   query uniformly random unresolved triples
//   run_adaptive_pair     same over unresolved pairs
//   run_random_triple     non-adaptive baseline: a fixed budget of random triples
//   run_tagging           baseline: tag one random example at a time
//   run_adaptive_hybrid   pair phase, then breadth-first triple exploration
//                         below each discovered feature
//
// *_fresh variants draw brand-new examples from a product distribution for
// every query, modelling an unbounded supply of data.

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "model.hpp"
#include "oracle.hpp"
#include "resolution.hpp"
#include "rng.hpp"
#include "transcript.hpp"

namespace trifeat {

namespace termination {
inline const std::string budget = "budget";
inline const std::string exhaustion = "exhaustion";
inline const std::string theta = "theta";
inline const std::string incomplete = "incomplete";
} // namespace termination

struct RunResult {
    std::size_t elicitation_queries = 0;
    std::size_t none_answers = 0;
    std::size_t label_queries = 0;
    // Recovered columns, in discovery order, over the run's examples.
    FeatureMatrix features;
    // Ground-truth id of each recovered column, when known.
    std::vector<FeatureId> truth_ids;
    std::string terminated_by = termination::incomplete;
    Transcript transcript;

    std::size_t n_found() const { return truth_ids.size(); }
};

inline nlohmann::json run_result_to_json(const RunResult& r) {
    return {{"elicitation_queries", r.elicitation_queries},
            {"none_answers", r.none_answers},
            {"label_queries", r.label_queries},
            {"terminated_by", r.terminated_by},
            {"truth_ids", r.truth_ids},
            {"features", matrix_to_json(r.features)}};
}

struct StopRule {
    std::optional<std::size_t> budget;

    static StopRule exhaustion() { return {}; }
    static StopRule after(std::size_t n) { return {n}; }
    bool hit(std::size_t queries) const { return budget && queries >= *budget; }
};

struct HybridConfig {
    int d = 2;
    double delta = 0.1;
    // Fixed consecutive-NONE threshold; when unset it is 3 d^2 ln(m_guess / delta).
    std::optional<std::size_t> theta;
    // Fixed feature-count guess; when unset it is (features found so far) + d,
    // re-evaluated each time a feature is popped.
    std::optional<double> m_guess;
    std::optional<std::size_t> budget;

    static std::size_t theta_for(int d, double m, double delta) {
        return static_cast<std::size_t>(std::ceil(3.0 * d * d * std::log(std::max(m, 1.0) / delta)));
    }

    std::size_t theta_now(std::size_t found) const {
        if (theta) return *theta;
        return theta_for(d, m_guess ? *m_guess : static_cast<double>(found + static_cast<std::size_t>(d)), delta);
    }

    void validate() const {
        if (d < 1) throw InvalidParameter("hybrid: D must be >= 1");
        if (!(delta > 0.0 && delta < 1.0)) throw InvalidParameter("hybrid: delta must lie in (0,1)");
        if (theta && *theta < 1) throw InvalidParameter("hybrid: theta must be >= 1");
    }
};

namespace detail {

// Shared bookkeeping: transcript, counters and the recovered matrix.
class RunRecorder {
public:
    RunRecorder(const GroundTruth& truth, const LabelingConfig& labeling, std::uint64_t label_seed)
        : truth_(truth), labeling_(labeling), rng_(label_seed), seen_(truth.n_features(), -1) {
        labeling_.validate();
        result_.features = FeatureMatrix(truth.n_examples());
    }

    std::optional<std::string> name_of(std::optional<FeatureId> f) const {
        if (!f) return std::nullopt;
        return truth_.matrix.feature_name(*f);
    }

    void elicited(Event e, bool none) {
        last_elicit_ = result_.transcript.append(std::move(e));
        ++result_.elicitation_queries;
        result_.none_answers += none;
    }

    bool known(FeatureId f) const { return seen_[static_cast<std::size_t>(f)] >= 0; }
    std::size_t recovered_index(FeatureId f) const { return static_cast<std::size_t>(seen_[static_cast<std::size_t>(f)]); }

    // Records the discovery of the answer to the last elicitation and
    // batch-labels it on every example. Returns the labeled column.
    const Column& discover(FeatureId f) {
        const auto& name = truth_.matrix.feature_name(f);
        result_.transcript.append(event::Discovery{name, last_elicit_});
        Column col(truth_.n_examples());
        for (std::size_t x = 0; x < col.size(); ++x)
            col[x] = label(truth_, f, static_cast<ExampleId>(x), labeling_, rng_);
        result_.label_queries += col.size();
        result_.transcript.append(event::LabelBatch{name, bits_to_string(col)});
        seen_[static_cast<std::size_t>(f)] = static_cast<int>(result_.truth_ids.size());
        result_.truth_ids.push_back(f);
        result_.features.append_column(col, name);
        return result_.features.column(static_cast<FeatureId>(result_.features.n_features() - 1));
    }

    RunResult finish(const std::string& reason) {
        result_.terminated_by = reason;
        result_.transcript.append(event::Termination{reason});
        return std::move(result_);
    }

    const RunResult& result() const noexcept { return result_; }

private:
    const GroundTruth& truth_;
    LabelingConfig labeling_;
    Rng rng_;
    std::vector<int> seen_;
    std::size_t last_elicit_ = 0;
    RunResult result_;
};

} // namespace detail

inline RunResult run_adaptive_triple(const GroundTruth& truth, Oracle& oracle, const LabelingConfig& labeling,
                                     StopRule stop, std::uint64_t seed) {
    if (truth.n_examples() < 3) throw InvalidParameter("adaptive triple needs N >= 3");
    Rng rng(derive_seed(seed, 1));
    detail::RunRecorder rec(truth, labeling, derive_seed(seed, 2));
    SignaturePartition partition(truth.n_examples());
    NoneSet none;
    while (true) {
        if (stop.hit(rec.result().elicitation_queries)) return rec.finish(termination::budget);
        auto t = sample_unresolved_triple(partition, none, rng);
        if (!t) return rec.finish(termination::exhaustion);
        auto ans = oracle.answer_triple(truth, *t);
        rec.elicited(event::ElicitTriple{*t, rec.name_of(ans), std::nullopt}, !ans);
        if (!ans) {
            none.add(*t);
        } else if (rec.known(*ans)) {
            // Only reachable when noisy labels hid the answer's split.
            none.add_answered(*t);
        } else {
            const auto& col = rec.discover(*ans);
            partition.apply_discovery(col, truth.matrix.feature_name(*ans));
            if (detail::class_unresolved(partition, *t)) none.add_answered(*t);
        }
    }
}

inline RunResult run_adaptive_pair(const GroundTruth& truth, Oracle& oracle, const LabelingConfig& labeling,
                                   StopRule stop, std::uint64_t seed) {
    if (truth.n_examples() < 2) throw InvalidParameter("adaptive pair needs N >= 2");
    Rng rng(derive_seed(seed, 1));
    detail::RunRecorder rec(truth, labeling, derive_seed(seed, 2));
    SignaturePartition partition(truth.n_examples());
    NoneSet none;
    while (true) {
        if (stop.hit(rec.result().elicitation_queries)) return rec.finish(termination::budget);
        auto q = sample_unresolved_pair(partition, none, rng);
        if (!q) return rec.finish(termination::exhaustion);
        auto ans = oracle.answer_pair(truth, *q);
        rec.elicited(event::ElicitPair{*q, rec.name_of(ans), std::nullopt}, !ans);
        if (!ans) {
            none.add(*q);
        } else if (rec.known(*ans)) {
            none.add_answered(*q);
        } else {
            const auto& col = rec.discover(*ans);
            partition.apply_discovery(col, truth.matrix.feature_name(*ans));
            if (partition.class_of((*q)[0]) == partition.class_of((*q)[1])) none.add_answered(*q);
        }
    }
}

// Uniform triples with replacement over all C(N,3), queried regardless of
// what is already known. Repeated answers are counted but not relabeled.
inline RunResult run_random_triple(const GroundTruth& truth, Oracle& oracle, const LabelingConfig& labeling,
                                   std::size_t budget, std::uint64_t seed) {
    if (truth.n_examples() < 3) throw InvalidParameter("random triple needs N >= 3");
    Rng rng(derive_seed(seed, 1));
    detail::RunRecorder rec(truth, labeling, derive_seed(seed, 2));
    for (std::size_t k = 0; k < budget; ++k) {
        auto s = sample_distinct(rng, truth.n_examples(), 3);
        TripleId t(static_cast<ExampleId>(s[0]), static_cast<ExampleId>(s[1]), static_cast<ExampleId>(s[2]));
        auto ans = oracle.answer_triple(truth, t);
        rec.elicited(event::ElicitTriple{t, rec.name_of(ans), std::nullopt}, !ans);
        if (ans && !rec.known(*ans)) rec.discover(*ans);
    }
    return rec.finish(termination::budget);
}

inline RunResult run_tagging(const GroundTruth& truth, Oracle& oracle, const LabelingConfig& labeling,
                             std::size_t budget, std::uint64_t seed) {
    if (truth.n_examples() < 1) throw InvalidParameter("tagging needs N >= 1");
    Rng rng(derive_seed(seed, 1));
    detail::RunRecorder rec(truth, labeling, derive_seed(seed, 2));
    for (std::size_t k = 0; k < budget; ++k) {
        auto x = static_cast<ExampleId>(uniform_index(rng, truth.n_examples()));
        auto ans = oracle.answer_tag(truth, x);
        rec.elicited(event::ElicitTag{x, rec.name_of(ans)}, !ans);
        if (ans && !rec.known(*ans)) rec.discover(*ans);
    }
    return rec.finish(termination::budget);
}

namespace detail {

// a <= b entrywise and a != b.
inline bool strictly_below(const Column& a, const Column& b) {
    bool differ = false;
    for (std::size_t x = 0; x < a.size(); ++x) {
        if (a[x] > b[x]) return false;
        differ |= a[x] != b[x];
    }
    return differ;
}

// One member of off(f): either a discovered feature directly below f or a
// group of examples below f that no such feature covers and that share a
// signature (identical rows once the pair phase is over).
struct OffMember {
    std::optional<std::size_t> feature;
    std::vector<ExampleId> examples;
};

inline std::vector<OffMember> off_members(const FeatureMatrix& found, const SignaturePartition& partition,
                                          std::optional<std::size_t> f) {
    const std::size_t n = found.n_examples();
    const Column all_ones(n, 1);
    const Column& top = f ? found.column(static_cast<FeatureId>(*f)) : all_ones;
    std::vector<std::size_t> below;
    for (std::size_t g = 0; g < found.n_features(); ++g) {
        const auto& col = found.column(static_cast<FeatureId>(g));
        if (f && g == *f) continue;
        if (std::none_of(col.begin(), col.end(), [](auto b) { return b != 0; })) continue;
        if (!strictly_below(col, top)) continue;
        // Columns equal to an earlier one are represented by the earlier one.
        bool dup = false;
        for (auto h : below) dup |= found.column(static_cast<FeatureId>(h)) == col;
        if (!dup) below.push_back(g);
    }
    std::vector<OffMember> out;
    Column covered(n, 0);
    for (auto g : below) {
        const auto& col = found.column(static_cast<FeatureId>(g));
        bool maximal = true;
        for (auto h : below) {
            if (h != g && strictly_below(col, found.column(static_cast<FeatureId>(h)))) {
                maximal = false;
                break;
            }
        }
        if (!maximal) continue;
        OffMember m{g, {}};
        for (std::size_t x = 0; x < n; ++x) {
            if (col[x]) {
                m.examples.push_back(static_cast<ExampleId>(x));
                covered[x] = 1;
            }
        }
        out.push_back(std::move(m));
    }
    std::map<std::size_t, std::size_t> group_of_class;
    for (std::size_t x = 0; x < n; ++x) {
        if (!top[x] || covered[x]) continue;
        auto cls = partition.class_of(static_cast<ExampleId>(x));
        auto [it, fresh] = group_of_class.try_emplace(cls, out.size());
        if (fresh) out.push_back(OffMember{std::nullopt, {}});
        out[it->second].examples.push_back(static_cast<ExampleId>(x));
    }
    return out;
}

} // namespace detail

// Phase 1 resolves every pair (each discovered feature labeled on all
// examples). Phase 2 explores breadth-first from a virtual all-ones root: for
// the popped feature f, each member of off(f) is represented by a random
// example, random triples of distinct representatives are queried, a new
// answer is pushed and off(f) recomputed, and f retires after theta
// consecutive queries without a new feature.
inline RunResult run_adaptive_hybrid(const GroundTruth& truth, Oracle& oracle, const LabelingConfig& labeling,
                                     const HybridConfig& config, std::uint64_t seed) {
    config.validate();
    if (truth.n_examples() < 2) throw InvalidParameter("adaptive hybrid needs N >= 2");
    Rng rng(derive_seed(seed, 1));
    detail::RunRecorder rec(truth, labeling, derive_seed(seed, 2));
    SignaturePartition partition(truth.n_examples());
    NoneSet none;
    StopRule stop{config.budget};

    while (true) {
        if (stop.hit(rec.result().elicitation_queries)) return rec.finish(termination::budget);
        auto q = sample_unresolved_pair(partition, none, rng);
        if (!q) break;
        auto ans = oracle.answer_pair(truth, *q);
        rec.elicited(event::ElicitPair{*q, rec.name_of(ans), std::nullopt}, !ans);
        if (!ans) {
            none.add(*q);
        } else if (rec.known(*ans)) {
            none.add_answered(*q);
        } else {
            const auto& col = rec.discover(*ans);
            partition.apply_discovery(col, truth.matrix.feature_name(*ans));
            if (partition.class_of((*q)[0]) == partition.class_of((*q)[1])) none.add_answered(*q);
        }
    }

    // Queue entries index recovered columns; nullopt is the virtual root.
    std::deque<std::optional<std::size_t>> queue{std::nullopt};
    std::set<std::size_t> queued;
    while (!queue.empty()) {
        auto f = queue.front();
        queue.pop_front();
        const std::size_t theta = config.theta_now(rec.result().n_found());
        std::size_t misses = 0;
        std::vector<detail::OffMember> members;
        while (true) {
            members = detail::off_members(rec.result().features, partition, f);
            std::vector<ExampleId> reps;
            for (auto& m : members) {
                // A group of identical uncovered examples gets two
                // representatives, so a feature made only of such examples
                // can still be split off by a triple.
                const std::size_t k = m.feature ? 1 : std::min<std::size_t>(2, m.examples.size());
                for (auto i : sample_distinct(rng, m.examples.size(), k)) reps.push_back(m.examples[i]);
            }
            // Overlapping features (non-laminar truth) can pick one example twice.
            std::sort(reps.begin(), reps.end());
            reps.erase(std::unique(reps.begin(), reps.end()), reps.end());
            if (reps.size() < 3) break;
            bool found_new = false;
            while (misses < theta) {
                if (stop.hit(rec.result().elicitation_queries)) return rec.finish(termination::budget);
                auto s = sample_distinct(rng, reps.size(), 3);
                TripleId t(reps[s[0]], reps[s[1]], reps[s[2]]);
                auto ans = oracle.answer_triple(truth, t);
                rec.elicited(event::ElicitTriple{t, rec.name_of(ans), std::nullopt}, !ans);
                if (ans && !rec.known(*ans)) {
                    const auto& col = rec.discover(*ans);
                    partition.apply_discovery(col, truth.matrix.feature_name(*ans));
                    auto idx = rec.recovered_index(*ans);
                    queued.insert(idx);
                    queue.push_back(idx);
                    misses = 0;
                    found_new = true;
                    break;
                }
                ++misses;
            }
            if (!found_new) break;
        }
        // Features found during the pair phase are explored once they surface
        // as a retired feature's children.
        for (auto& m : members) {
            if (m.feature && queued.insert(*m.feature).second) queue.push_back(*m.feature);
        }
    }
    return rec.finish(termination::theta);
}

// ---------------------------------------------------------------------------
// Fresh-example mode

namespace detail {

inline GroundTruth schema_truth(const IndependentSpec& spec) {
    std::vector<std::string> names;
    for (std::size_t j = 0; j < spec.n_features(); ++j) names.push_back(synthetic_feature_name(static_cast<FeatureId>(j)));
    return GroundTruth::from_matrix(FeatureMatrix(0, std::move(names)));
}

inline RunResult fresh_result(const GroundTruth& schema) {
    RunResult r;
    r.features = FeatureMatrix(0);
    (void)schema;
    return r;
}

// Features whose bits over the k drawn rows sum to k - 1.
inline std::vector<FeatureId> fresh_distinguishing(const std::vector<Column>& rows) {
    std::vector<FeatureId> out;
    const int target = static_cast<int>(rows.size()) - 1;
    for (std::size_t j = 0; j < rows[0].size(); ++j) {
        int sum = 0;
        for (auto& r : rows) sum += r[j];
        if (sum == target) out.push_back(static_cast<FeatureId>(j));
    }
    return out;
}

// Adaptive over fresh draws of `arity` examples: a draw resolved by an
// already-found feature is rejected without counting as a query.
inline RunResult run_adaptive_fresh(const IndependentSpec& spec, Oracle& oracle, StopRule stop, std::uint64_t seed,
                                    std::size_t arity) {
    spec.validate();
    const auto freqs = spec.frequencies();
    const auto schema = schema_truth(spec);
    Rng rng(derive_seed(seed, 1));
    RunResult r = fresh_result(schema);
    std::vector<char> found(freqs.size(), 0);
    std::vector<Column> rows(arity);
    while (true) {
        if (r.truth_ids.size() == freqs.size()) {
            r.terminated_by = termination::exhaustion;
            return r;
        }
        if (stop.hit(r.elicitation_queries)) {
            r.terminated_by = termination::budget;
            return r;
        }
        std::vector<FeatureId> cand;
        while (true) {
            for (auto& row : rows) row = draw_independent_row(freqs, rng);
            cand = fresh_distinguishing(rows);
            if (std::none_of(cand.begin(), cand.end(), [&](FeatureId f) { return found[static_cast<std::size_t>(f)]; })) break;
        }
        ++r.elicitation_queries;
        auto ans = oracle.choose(schema, cand);
        if (!ans) {
            ++r.none_answers;
            continue;
        }
        found[static_cast<std::size_t>(*ans)] = 1;
        r.truth_ids.push_back(*ans);
    }
}

} // namespace detail

inline RunResult run_adaptive_triple_fresh(const IndependentSpec& spec, Oracle& oracle, StopRule stop, std::uint64_t seed) {
    return detail::run_adaptive_fresh(spec, oracle, stop, seed, 3);
}

inline RunResult run_adaptive_pair_fresh(const IndependentSpec& spec, Oracle& oracle, StopRule stop, std::uint64_t seed) {
    return detail::run_adaptive_fresh(spec, oracle, stop, seed, 2);
}

// Non-adaptive over fresh triples until every feature has been returned.
inline RunResult run_random_triple_fresh(const IndependentSpec& spec, Oracle& oracle, StopRule stop, std::uint64_t seed) {
    spec.validate();
    const auto freqs = spec.frequencies();
    const auto schema = detail::schema_truth(spec);
    Rng rng(derive_seed(seed, 1));
    RunResult r = detail::fresh_result(schema);
    std::vector<char> found(freqs.size(), 0);
    std::vector<Column> rows(3);
    while (r.truth_ids.size() < freqs.size()) {
        if (stop.hit(r.elicitation_queries)) {
            r.terminated_by = termination::budget;
            return r;
        }
        for (auto& row : rows) row = draw_independent_row(freqs, rng);
        ++r.elicitation_queries;
        auto ans = oracle.choose(schema, detail::fresh_distinguishing(rows));
        if (!ans) {
            ++r.none_answers;
        } else if (!found[static_cast<std::size_t>(*ans)]) {
            found[static_cast<std::size_t>(*ans)] = 1;
            r.truth_ids.push_back(*ans);
        }
    }
    r.terminated_by = termination::exhaustion;
    return r;
}

// ---------------------------------------------------------------------------
// Replay

// Rebuilds a run's result from its transcript. With truth attached, every
// answer is checked for soundness and recovered columns are mapped back to
// truth ids. A transcript cut short yields the partial state.
inline RunResult replay(const Transcript& transcript, const GroundTruth* truth = nullptr) {
    RunResult r;
    std::optional<std::size_t> n;
    if (truth) n = truth->n_examples();
    for (auto& e : transcript.events()) {
        if (auto b = std::get_if<event::LabelBatch>(&e); b && !n) n = b->bits.size();
    }
    r.features = FeatureMatrix(n.value_or(0));

    auto check = [&](std::size_t k, const std::optional<std::string>& answer, std::span<const ExampleId> items) {
        if (!truth || !answer) return;
        auto f = truth->matrix.find_feature(*answer);
        if (!f) throw ReplayError(k, "answer '" + *answer + "' is not a ground-truth feature");
        int sum = 0;
        for (auto x : items) {
            if (x < 0 || static_cast<std::size_t>(x) >= truth->n_examples()) throw ReplayError(k, "example out of range");
            sum += truth->matrix.at(x, *f);
        }
        if (sum != static_cast<int>(items.size()) - 1)
            throw ReplayError(k, "answer '" + *answer + "' does not distinguish the queried examples");
    };

    const auto& ev = transcript.events();
    for (std::size_t k = 0; k < ev.size(); ++k) {
        std::visit(
            [&](const auto& e) {
                using T = std::decay_t<decltype(e)>;
                if constexpr (std::is_same_v<T, event::ElicitTriple> || std::is_same_v<T, event::ElicitPair>) {
                    ++r.elicitation_queries;
                    r.none_answers += !e.answer;
                    check(k, e.answer, std::span<const ExampleId>(e.items.ids()));
                } else if constexpr (std::is_same_v<T, event::ElicitTag>) {
                    ++r.elicitation_queries;
                    r.none_answers += !e.answer;
                    if (truth && e.answer) {
                        auto f = truth->matrix.find_feature(*e.answer);
                        if (!f || !truth->matrix.at(e.item, *f)) throw ReplayError(k, "tag answer absent on the example");
                    }
                } else if constexpr (std::is_same_v<T, event::LabelBatch>) {
                    auto bits = bits_from_string(e.bits);
                    if (bits.size() != r.features.n_examples()) throw ReplayError(k, "label batch width mismatch");
                    r.label_queries += bits.size();
                    r.features.append_column(bits, e.feature);
                    if (truth) {
                        if (auto f = truth->matrix.find_feature(e.feature)) r.truth_ids.push_back(*f);
                    }
                } else if constexpr (std::is_same_v<T, event::Termination>) {
                    r.terminated_by = e.reason;
                }
            },
            ev[k]);
    }
    r.transcript = transcript;
    return r;
}

} // namespace trifeat
