#pragma once

// Unresolved-query index. Examples are grouped by their signature over the
// discovered features; a triple's resolution status depends only on which
// signature classes its members fall in, so unresolved triples and pairs can
// be counted and sampled uniformly without enumerating all C(N,3) triples.

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "model.hpp"
#include "rng.hpp"

namespace trifeat {

// Packed signature bits; bit k is the label of the k-th discovered feature.
using Signature = std::vector<std::uint64_t>;

inline std::string signature(ExampleId x, std::span<const Column> discovered_labels) {
    std::string s(discovered_labels.size(), '0');
    for (std::size_t k = 0; k < discovered_labels.size(); ++k) s[k] = discovered_labels[k][static_cast<std::size_t>(x)] ? '1' : '0';
    return s;
}

// True iff some position has bit-sum exactly 2 across the three signatures.
inline bool is_triple_resolved(const std::string& a, const std::string& b, const std::string& c) {
    if (a.size() != b.size() || a.size() != c.size()) throw InvalidParameter("signature lengths differ");
    for (std::size_t k = 0; k < a.size(); ++k) {
        if ((a[k] == '1') + (b[k] == '1') + (c[k] == '1') == 2) return true;
    }
    return false;
}

namespace detail {

inline bool packed_resolved(const Signature& a, const Signature& b, const Signature& c) {
    for (std::size_t w = 0; w < a.size(); ++w) {
        if ((a[w] & b[w] & ~c[w]) | (a[w] & c[w] & ~b[w]) | (b[w] & c[w] & ~a[w])) return true;
    }
    return false;
}

// s is a bitwise subset of t.
inline bool packed_subset(const Signature& s, const Signature& t) {
    for (std::size_t w = 0; w < s.size(); ++w) {
        if (s[w] & ~t[w]) return false;
    }
    return true;
}

inline std::uint64_t choose2(std::uint64_t n) { return n < 2 ? 0 : n * (n - 1) / 2; }
inline std::uint64_t choose3(std::uint64_t n) { return n < 3 ? 0 : n * (n - 1) * (n - 2) / 6; }

} // namespace detail

// Triples and pairs already settled without a feature that resolves them.
// none_* hold NONE answers. answered_* hold queries whose answer was a
// feature whose committed labels nonetheless leave them unresolved (only
// possible with noisy labels). NONE pairs are closed transitively:
// examples linked by NONE pairs have identical feature rows.
class NoneSet {
public:
    void add(const TripleId& t) { none_triples_.insert(t); }
    void add(const PairId& p) {
        none_pairs_.insert(p);
        unite(p[0], p[1]);
    }
    void add_answered(const TripleId& t) { answered_triples_.insert(t); }
    void add_answered(const PairId& p) { answered_pairs_.insert(p); }

    bool contains(const TripleId& t) const { return none_triples_.count(t) || answered_triples_.count(t); }
    bool known_identical(ExampleId a, ExampleId b) const { return a == b || find(a) == find(b); }
    bool contains(const PairId& p) const { return known_identical(p[0], p[1]) || answered_pairs_.count(p); }

    const std::set<TripleId>& none_triples() const noexcept { return none_triples_; }
    const std::set<TripleId>& answered_triples() const noexcept { return answered_triples_; }
    const std::set<PairId>& none_pairs() const noexcept { return none_pairs_; }
    const std::set<PairId>& answered_pairs() const noexcept { return answered_pairs_; }

    ExampleId identity_root(ExampleId x) const { return find(x); }

private:
    ExampleId find(ExampleId x) const {
        auto ux = static_cast<std::size_t>(x);
        if (ux >= uf_.size()) return x;
        while (uf_[ux] != static_cast<ExampleId>(ux)) {
            uf_[ux] = uf_[static_cast<std::size_t>(uf_[ux])];
            ux = static_cast<std::size_t>(uf_[ux]);
        }
        return static_cast<ExampleId>(ux);
    }
    void unite(ExampleId a, ExampleId b) {
        auto need = static_cast<std::size_t>(std::max(a, b)) + 1;
        if (uf_.size() < need) {
            auto old = uf_.size();
            uf_.resize(need);
            std::iota(uf_.begin() + static_cast<std::ptrdiff_t>(old), uf_.end(), static_cast<ExampleId>(old));
        }
        auto ra = find(a), rb = find(b);
        if (ra != rb) uf_[static_cast<std::size_t>(std::max(ra, rb))] = std::min(ra, rb);
    }

    std::set<TripleId> none_triples_;
    std::set<TripleId> answered_triples_;
    std::set<PairId> none_pairs_;
    std::set<PairId> answered_pairs_;
    mutable std::vector<ExampleId> uf_;
};

class SignaturePartition {
public:
    struct Class {
        Signature sig;
        std::vector<ExampleId> members;
    };

    explicit SignaturePartition(std::size_t n) : n_(n), class_of_(n, 0) {
        Class all;
        all.members.resize(n);
        std::iota(all.members.begin(), all.members.end(), 0);
        if (n) classes_.push_back(std::move(all));
    }

    // Independent rebuild: groups examples by their full signature string.
    static SignaturePartition from_labels(std::size_t n, std::span<const Column> labels, std::vector<std::string> names) {
        SignaturePartition p(n);
        p.names_ = std::move(names);
        p.labels_.assign(labels.begin(), labels.end());
        std::map<std::string, std::vector<ExampleId>> groups;
        for (std::size_t x = 0; x < n; ++x) groups[signature(static_cast<ExampleId>(x), labels)].push_back(static_cast<ExampleId>(x));
        p.classes_.clear();
        for (auto& [key, members] : groups) {
            Class c;
            c.sig = pack(key);
            c.members = members;
            for (ExampleId x : members) p.class_of_[static_cast<std::size_t>(x)] = p.classes_.size();
            p.classes_.push_back(std::move(c));
        }
        return p;
    }

    std::size_t n_examples() const noexcept { return n_; }
    std::size_t n_discovered() const noexcept { return labels_.size(); }
    const std::vector<std::string>& discovered() const noexcept { return names_; }
    const std::vector<Column>& labels() const noexcept { return labels_; }
    const std::vector<Class>& classes() const noexcept { return classes_; }
    std::size_t class_of(ExampleId x) const { return class_of_.at(static_cast<std::size_t>(x)); }
    const Signature& signature_of(ExampleId x) const { return classes_[class_of(x)].sig; }

    std::string signature_string(ExampleId x) const { return signature(x, labels_); }

    // Splits every class by the new feature's bit.
    void apply_discovery(std::span<const std::uint8_t> column, std::string name) {
        if (column.size() != n_) throw InvalidParameter("discovery labels must cover every example");
        const std::size_t bit = labels_.size();
        const std::size_t words = bit / 64 + 1;
        std::vector<Class> next;
        next.reserve(classes_.size() * 2);
        for (auto& c : classes_) {
            Class zero{c.sig, {}}, one{c.sig, {}};
            zero.sig.resize(words, 0);
            one.sig.resize(words, 0);
            one.sig[bit / 64] |= std::uint64_t{1} << (bit % 64);
            for (ExampleId x : c.members) {
                auto b = column[static_cast<std::size_t>(x)];
                if (b > 1) throw InvalidParameter("labels must be 0 or 1");
                (b ? one : zero).members.push_back(x);
            }
            for (Class* part : {&zero, &one}) {
                if (part->members.empty()) continue;
                for (ExampleId x : part->members) class_of_[static_cast<std::size_t>(x)] = next.size();
                next.push_back(std::move(*part));
            }
        }
        classes_ = std::move(next);
        labels_.emplace_back(column.begin(), column.end());
        names_.push_back(std::move(name));
    }

    // signature string -> members; canonical form for comparisons and JSON.
    std::map<std::string, std::vector<ExampleId>> class_map() const {
        std::map<std::string, std::vector<ExampleId>> out;
        for (auto& c : classes_) out[unpack(c.sig, labels_.size())] = c.members;
        return out;
    }

    // Classes partition the examples and each member's labels match its key.
    bool consistent() const {
        std::vector<int> hit(n_, 0);
        for (std::size_t k = 0; k < classes_.size(); ++k) {
            for (ExampleId x : classes_[k].members) {
                if (hit[static_cast<std::size_t>(x)]++ || class_of(x) != k) return false;
                if (pack(signature(x, labels_)) != normalized(classes_[k].sig)) return false;
            }
        }
        return std::all_of(hit.begin(), hit.end(), [](int h) { return h == 1; });
    }

private:
    Signature normalized(Signature s) const {
        s.resize(labels_.size() / 64 + 1, 0);
        return s;
    }

    static Signature pack(const std::string& key) {
        Signature s(key.size() / 64 + 1, 0);
        for (std::size_t k = 0; k < key.size(); ++k) {
            if (key[k] == '1') s[k / 64] |= std::uint64_t{1} << (k % 64);
        }
        return s;
    }

    static std::string unpack(const Signature& s, std::size_t len) {
        std::string key(len, '0');
        for (std::size_t k = 0; k < len; ++k) {
            if (k / 64 < s.size() && (s[k / 64] >> (k % 64)) & 1) key[k] = '1';
        }
        return key;
    }

    std::size_t n_;
    std::vector<std::string> names_;
    std::vector<Column> labels_;
    std::vector<Class> classes_;
    std::vector<std::size_t> class_of_;
};

// ---------------------------------------------------------------------------
// Triples

// A group of unresolved triples defined by the classes its members come from:
// Within: three from class a; TwoOne: two from a and one from b (a's
// signature a bitwise subset of b's); Three: one each from a, b, c with no
// position summing to two.
struct TripleCombo {
    enum class Kind { Within, TwoOne, Three };
    Kind kind;
    std::size_t a = 0, b = 0, c = 0;
    std::uint64_t weight = 0;
};

inline std::vector<TripleCombo> unresolved_triple_combos(const SignaturePartition& p) {
    using detail::choose2;
    using detail::choose3;
    const auto& cls = p.classes();
    const std::size_t k = cls.size();
    std::vector<TripleCombo> out;
    for (std::size_t a = 0; a < k; ++a) {
        if (auto w = choose3(cls[a].members.size())) out.push_back({TripleCombo::Kind::Within, a, a, a, w});
    }
    for (std::size_t a = 0; a < k; ++a) {
        auto pairs = choose2(cls[a].members.size());
        if (!pairs) continue;
        for (std::size_t b = 0; b < k; ++b) {
            if (a != b && detail::packed_subset(cls[a].sig, cls[b].sig))
                out.push_back({TripleCombo::Kind::TwoOne, a, b, b, pairs * cls[b].members.size()});
        }
    }
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a + 1; b < k; ++b) {
            for (std::size_t c = b + 1; c < k; ++c) {
                if (!detail::packed_resolved(cls[a].sig, cls[b].sig, cls[c].sig))
                    out.push_back({TripleCombo::Kind::Three, a, b, c,
                                   cls[a].members.size() * cls[b].members.size() * cls[c].members.size()});
            }
        }
    }
    return out;
}

namespace detail {

inline bool class_unresolved(const SignaturePartition& p, const TripleId& t) {
    return !packed_resolved(p.signature_of(t[0]), p.signature_of(t[1]), p.signature_of(t[2]));
}

inline std::uint64_t excluded_unresolved(const SignaturePartition& p, const NoneSet& none) {
    std::uint64_t k = 0;
    for (auto& t : none.none_triples()) k += class_unresolved(p, t);
    for (auto& t : none.answered_triples()) k += !none.none_triples().count(t) && class_unresolved(p, t);
    return k;
}

inline std::uint64_t combo_total(const std::vector<TripleCombo>& combos) {
    std::uint64_t total = 0;
    for (auto& c : combos) total += c.weight;
    return total;
}

template <typename F>
void for_each_combo_triple(const SignaturePartition& p, const TripleCombo& c, F&& f) {
    const auto& A = p.classes()[c.a].members;
    const auto& B = p.classes()[c.b].members;
    const auto& C = p.classes()[c.c].members;
    switch (c.kind) {
    case TripleCombo::Kind::Within:
        for (std::size_t i = 0; i < A.size(); ++i)
            for (std::size_t j = i + 1; j < A.size(); ++j)
                for (std::size_t l = j + 1; l < A.size(); ++l) f(TripleId(A[i], A[j], A[l]));
        break;
    case TripleCombo::Kind::TwoOne:
        for (std::size_t i = 0; i < A.size(); ++i)
            for (std::size_t j = i + 1; j < A.size(); ++j)
                for (ExampleId z : B) f(TripleId(A[i], A[j], z));
        break;
    case TripleCombo::Kind::Three:
        for (ExampleId x : A)
            for (ExampleId y : B)
                for (ExampleId z : C) f(TripleId(x, y, z));
        break;
    }
}

inline TripleId draw_from_combo(const SignaturePartition& p, const TripleCombo& c, Rng& rng) {
    const auto& A = p.classes()[c.a].members;
    const auto& B = p.classes()[c.b].members;
    const auto& C = p.classes()[c.c].members;
    switch (c.kind) {
    case TripleCombo::Kind::Within: {
        auto s = sample_distinct(rng, A.size(), 3);
        return TripleId(A[s[0]], A[s[1]], A[s[2]]);
    }
    case TripleCombo::Kind::TwoOne: {
        auto s = sample_distinct(rng, A.size(), 2);
        return TripleId(A[s[0]], A[s[1]], B[uniform_index(rng, B.size())]);
    }
    case TripleCombo::Kind::Three:
        break;
    }
    return TripleId(A[uniform_index(rng, A.size())], B[uniform_index(rng, B.size())], C[uniform_index(rng, C.size())]);
}

} // namespace detail

// Triples with no discovered feature summing to 2, minus those settled in none.
inline std::uint64_t count_unresolved_triples(const SignaturePartition& p, const NoneSet& none) {
    return detail::combo_total(unresolved_triple_combos(p)) - detail::excluded_unresolved(p, none);
}

// Uniform over unresolved, unsettled triples; nullopt when there are none.
// Draws a combo with probability proportional to its size, then uniform
// members, rejecting settled triples. Falls back to explicit enumeration
// when rejection keeps failing.
inline std::optional<TripleId> sample_unresolved_triple(const SignaturePartition& p, const NoneSet& none, Rng& rng) {
    auto combos = unresolved_triple_combos(p);
    const auto total = detail::combo_total(combos);
    const auto excluded = detail::excluded_unresolved(p, none);
    if (total == excluded) return std::nullopt;
    std::vector<std::uint64_t> cum(combos.size());
    std::uint64_t acc = 0;
    for (std::size_t k = 0; k < combos.size(); ++k) cum[k] = (acc += combos[k].weight);
    for (int attempt = 0; attempt < 64; ++attempt) {
        auto r = std::uniform_int_distribution<std::uint64_t>(0, total - 1)(rng);
        auto k = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), r) - cum.begin());
        auto t = detail::draw_from_combo(p, combos[k], rng);
        if (!none.contains(t)) return t;
    }
    std::vector<TripleId> open;
    for (auto& c : combos) {
        detail::for_each_combo_triple(p, c, [&](const TripleId& t) {
            if (!none.contains(t)) open.push_back(t);
        });
    }
    return open[uniform_index(rng, open.size())];
}

inline std::optional<TripleId> sample_unresolved_triple(const SignaturePartition& p, const NoneSet& none, std::uint64_t seed) {
    Rng rng(seed);
    return sample_unresolved_triple(p, none, rng);
}

// ---------------------------------------------------------------------------
// Pairs: {x,y} is unresolved iff x and y share a signature and are not known
// to be identical.

namespace detail {

inline std::uint64_t class_unresolved_pairs(const SignaturePartition::Class& c, const NoneSet& none) {
    std::map<ExampleId, std::uint64_t> groups;
    for (ExampleId x : c.members) ++groups[none.identity_root(x)];
    std::uint64_t settled = 0;
    for (auto& [root, size] : groups) settled += choose2(size);
    return choose2(c.members.size()) - settled;
}

} // namespace detail

inline std::uint64_t answered_open_pairs(const SignaturePartition& p, const NoneSet& none) {
    std::uint64_t k = 0;
    for (auto& q : none.answered_pairs()) k += p.class_of(q[0]) == p.class_of(q[1]) && !none.known_identical(q[0], q[1]);
    return k;
}

inline std::uint64_t count_unresolved_pairs(const SignaturePartition& p, const NoneSet& none) {
    std::uint64_t total = 0;
    for (auto& c : p.classes()) total += detail::class_unresolved_pairs(c, none);
    return total - answered_open_pairs(p, none);
}

inline std::optional<PairId> sample_unresolved_pair(const SignaturePartition& p, const NoneSet& none, Rng& rng) {
    std::vector<std::uint64_t> cum;
    std::uint64_t acc = 0;
    for (auto& c : p.classes()) cum.push_back(acc += detail::class_unresolved_pairs(c, none));
    if (acc == answered_open_pairs(p, none)) return std::nullopt;
    auto r = std::uniform_int_distribution<std::uint64_t>(0, acc - 1)(rng);
    const auto& members = p.classes()[static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), r) - cum.begin())].members;
    for (int attempt = 0; attempt < 64; ++attempt) {
        auto s = sample_distinct(rng, members.size(), 2);
        PairId q(members[s[0]], members[s[1]]);
        if (!none.contains(q)) return q;
    }
    std::vector<PairId> open;
    for (auto& c : p.classes()) {
        for (std::size_t i = 0; i < c.members.size(); ++i)
            for (std::size_t j = i + 1; j < c.members.size(); ++j)
                if (PairId q(c.members[i], c.members[j]); !none.contains(q)) open.push_back(q);
    }
    return open[uniform_index(rng, open.size())];
}

inline std::optional<PairId> sample_unresolved_pair(const SignaturePartition& p, const NoneSet& none, std::uint64_t seed) {
    Rng rng(seed);
    return sample_unresolved_pair(p, none, rng);
}

// ---------------------------------------------------------------------------
// Snapshot JSON: {discovered, classes:{signature:[ids]}, none_triples, none_pairs, answered_triples}

inline nlohmann::json partition_to_json(const SignaturePartition& p, const NoneSet& none) {
    nlohmann::json j;
    j["n_examples"] = p.n_examples();
    j["discovered"] = p.discovered();
    j["classes"] = nlohmann::json::object();
    for (auto& [key, members] : p.class_map()) j["classes"][key] = members;
    auto triples = [](const std::set<TripleId>& s) {
        nlohmann::json a = nlohmann::json::array();
        for (auto& t : s) a.push_back({t[0], t[1], t[2]});
        return a;
    };
    j["none_triples"] = triples(none.none_triples());
    j["answered_triples"] = triples(none.answered_triples());
    j["none_pairs"] = nlohmann::json::array();
    for (auto& q : none.none_pairs()) j["none_pairs"].push_back({q[0], q[1]});
    j["answered_pairs"] = nlohmann::json::array();
    for (auto& q : none.answered_pairs()) j["answered_pairs"].push_back({q[0], q[1]});
    return j;
}

inline std::pair<SignaturePartition, NoneSet> partition_from_json(const nlohmann::json& j) {
    auto names = j.at("discovered").get<std::vector<std::string>>();
    std::size_t n = 0;
    for (auto& [key, members] : j.at("classes").items()) n += members.size();
    if (j.contains("n_examples")) n = j.at("n_examples").get<std::size_t>();
    std::vector<Column> labels(names.size(), Column(n, 0));
    for (auto& [key, members] : j.at("classes").items()) {
        if (key.size() != names.size()) throw ValidationError("snapshot signature width differs from discovered count");
        for (auto x : members.get<std::vector<ExampleId>>()) {
            if (x < 0 || static_cast<std::size_t>(x) >= n) throw ValidationError("snapshot example out of range");
            for (std::size_t k = 0; k < key.size(); ++k) labels[k][static_cast<std::size_t>(x)] = key[k] == '1';
        }
    }
    NoneSet none;
    for (auto& t : j.value("none_triples", nlohmann::json::array())) none.add(TripleId(t[0], t[1], t[2]));
    for (auto& t : j.value("answered_triples", nlohmann::json::array())) none.add_answered(TripleId(t[0], t[1], t[2]));
    for (auto& q : j.value("none_pairs", nlohmann::json::array())) none.add(PairId(q[0], q[1]));
    for (auto& q : j.value("answered_pairs", nlohmann::json::array())) none.add_answered(PairId(q[0], q[1]));
    SignaturePartition p(n);
    for (std::size_t k = 0; k < names.size(); ++k) p.apply_discovery(labels[k], names[k]);
    return {std::move(p), std::move(none)};
}

} // namespace trifeat
