#pragma once

// Ground-truth feature structures: binary feature matrices, feature trees
// (proper binary and D-ary leafy), independent-feature product models and the
// left/right query counterexample. Everything here is pure given its seed.

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <deque>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "rng.hpp"

namespace trifeat {

using FeatureId = int;
using ExampleId = int;
using Column = std::vector<std::uint8_t>;

inline std::string synthetic_feature_name(FeatureId id) { return "f" + std::to_string(id + 1); }

// Three distinct example indices in ascending order.
class TripleId {
public:
    TripleId(ExampleId a, ExampleId b, ExampleId c) : ids_{a, b, c} {
        std::sort(ids_.begin(), ids_.end());
        if (ids_[0] < 0 || ids_[0] == ids_[1] || ids_[1] == ids_[2])
            throw InvalidParameter("triple needs three distinct non-negative examples");
    }

    static TripleId checked(ExampleId a, ExampleId b, ExampleId c, std::size_t n) {
        TripleId t(a, b, c);
        if (static_cast<std::size_t>(t.ids_[2]) >= n)
            throw InvalidParameter("triple example index out of range");
        return t;
    }

    const std::array<ExampleId, 3>& ids() const noexcept { return ids_; }
    ExampleId operator[](std::size_t k) const noexcept { return ids_[k]; }
    auto operator<=>(const TripleId&) const = default;

private:
    std::array<ExampleId, 3> ids_;
};

class PairId {
public:
    PairId(ExampleId a, ExampleId b) : ids_{std::min(a, b), std::max(a, b)} {
        if (ids_[0] < 0 || ids_[0] == ids_[1])
            throw InvalidParameter("pair needs two distinct non-negative examples");
    }

    static PairId checked(ExampleId a, ExampleId b, std::size_t n) {
        PairId p(a, b);
        if (static_cast<std::size_t>(p.ids_[1]) >= n)
            throw InvalidParameter("pair example index out of range");
        return p;
    }

    const std::array<ExampleId, 2>& ids() const noexcept { return ids_; }
    ExampleId operator[](std::size_t k) const noexcept { return ids_[k]; }
    auto operator<=>(const PairId&) const = default;

private:
    std::array<ExampleId, 2> ids_;
};

// N x M binary allocation matrix; row = example, column = feature. Stored
// column-major since discovery appends one labeled column at a time.
class FeatureMatrix {
public:
    FeatureMatrix() = default;

    explicit FeatureMatrix(std::size_t n_examples) : n_(n_examples) {}

    FeatureMatrix(std::size_t n_examples, std::vector<std::string> names)
        : n_(n_examples), names_(std::move(names)), cols_(names_.size(), Column(n_examples, 0)) {}

    std::size_t n_examples() const noexcept { return n_; }
    std::size_t n_features() const noexcept { return cols_.size(); }
    const std::vector<std::string>& feature_names() const noexcept { return names_; }
    const std::string& feature_name(FeatureId j) const { return names_.at(static_cast<std::size_t>(j)); }

    std::uint8_t at(ExampleId i, FeatureId j) const {
        return cols_[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
    }
    void set(ExampleId i, FeatureId j, bool v) {
        cols_[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = v ? 1 : 0;
    }

    const Column& column(FeatureId j) const { return cols_.at(static_cast<std::size_t>(j)); }
    const std::vector<Column>& columns() const noexcept { return cols_; }

    Column row(ExampleId i) const {
        Column r(cols_.size());
        for (std::size_t j = 0; j < cols_.size(); ++j) r[j] = cols_[j][static_cast<std::size_t>(i)];
        return r;
    }

    void append_column(std::span<const std::uint8_t> col, std::string name) {
        if (col.size() != n_) throw InvalidParameter("column length does not match example count");
        Column c(col.begin(), col.end());
        for (auto& b : c) {
            if (b > 1) throw InvalidParameter("feature matrix entries must be 0 or 1");
        }
        cols_.push_back(std::move(c));
        names_.push_back(std::move(name));
    }

    std::optional<FeatureId> find_feature(const std::string& name) const {
        auto it = std::find(names_.begin(), names_.end(), name);
        if (it == names_.end()) return std::nullopt;
        return static_cast<FeatureId>(it - names_.begin());
    }

    bool operator==(const FeatureMatrix&) const = default;

private:
    std::size_t n_ = 0;
    std::vector<std::string> names_;
    std::vector<Column> cols_;
};

// ---------------------------------------------------------------------------
// Feature trees

struct TreeNode {
    std::optional<int> parent;
    std::vector<int> children;
    std::optional<FeatureId> feature;
    std::optional<ExampleId> example;
};

// Rooted tree: internal non-root nodes carry features, leaves carry examples,
// the root carries neither. nodes[0] is the root.
struct FeatureTree {
    std::vector<TreeNode> nodes{TreeNode{}};
    std::vector<std::string> feature_names;

    static constexpr int root = 0;

    int add_node(int parent) {
        nodes.push_back(TreeNode{parent, {}, std::nullopt, std::nullopt});
        int id = static_cast<int>(nodes.size() - 1);
        nodes[static_cast<std::size_t>(parent)].children.push_back(id);
        return id;
    }

    const TreeNode& node(int id) const { return nodes.at(static_cast<std::size_t>(id)); }
    bool is_leaf(int id) const { return node(id).children.empty(); }

    std::size_t n_features() const noexcept { return feature_names.size(); }

    std::size_t n_examples() const {
        std::size_t n = 0;
        for (auto& nd : nodes) n += nd.example.has_value();
        return n;
    }

    std::vector<int> feature_nodes() const {
        std::vector<int> out(n_features(), -1);
        for (std::size_t v = 0; v < nodes.size(); ++v) {
            if (auto f = nodes[v].feature; f && *f >= 0 && static_cast<std::size_t>(*f) < out.size())
                out[static_cast<std::size_t>(*f)] = static_cast<int>(v);
        }
        return out;
    }

    std::vector<int> leaf_nodes() const {
        std::vector<int> out(n_examples(), -1);
        for (std::size_t v = 0; v < nodes.size(); ++v) {
            if (auto x = nodes[v].example; x && *x >= 0 && static_cast<std::size_t>(*x) < out.size())
                out[static_cast<std::size_t>(*x)] = static_cast<int>(v);
        }
        return out;
    }

    int depth(int id) const {
        int d = 0;
        for (auto p = node(id).parent; p; p = node(*p).parent) ++d;
        return d;
    }

    // Root distance of each feature's node; children of the root have depth 1.
    std::vector<int> feature_depths() const {
        auto fn = feature_nodes();
        std::vector<int> out(fn.size(), 0);
        for (std::size_t f = 0; f < fn.size(); ++f) out[f] = depth(fn[f]);
        return out;
    }

    std::size_t internal_child_count(int id) const {
        std::size_t k = 0;
        for (int c : node(id).children) k += !is_leaf(c);
        return k;
    }
};

namespace detail {

// Assigns feature ids in breadth-first order (shallow features get small ids)
// and example ids by a random permutation of the leaves.
inline void number_tree(FeatureTree& tree, Rng& rng) {
    std::vector<int> leaves;
    FeatureId next_feature = 0;
    std::deque<int> queue{FeatureTree::root};
    while (!queue.empty()) {
        int v = queue.front();
        queue.pop_front();
        for (int c : tree.nodes[static_cast<std::size_t>(v)].children) {
            auto& nd = tree.nodes[static_cast<std::size_t>(c)];
            if (nd.children.empty()) {
                leaves.push_back(c);
            } else {
                nd.feature = next_feature++;
                queue.push_back(c);
            }
        }
    }
    std::vector<ExampleId> perm(leaves.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t k = 0; k < leaves.size(); ++k)
        tree.nodes[static_cast<std::size_t>(leaves[k])].example = perm[k];
    tree.feature_names.clear();
    for (FeatureId f = 0; f < next_feature; ++f) tree.feature_names.push_back(synthetic_feature_name(f));
}

} // namespace detail

// Grows a proper binary tree by splitting a uniformly chosen leaf m times,
// starting from a root with two leaves. Always m + 2 leaves.
inline FeatureTree gen_proper_binary_tree(int m, std::uint64_t seed) {
    if (m < 1) throw InvalidParameter("proper binary tree needs m >= 1");
    Rng rng(seed);
    FeatureTree tree;
    std::vector<int> leaves{tree.add_node(FeatureTree::root), tree.add_node(FeatureTree::root)};
    for (int k = 0; k < m; ++k) {
        std::size_t pick = uniform_index(rng, leaves.size());
        int v = leaves[pick];
        leaves[pick] = tree.add_node(v);
        leaves.push_back(tree.add_node(v));
    }
    detail::number_tree(tree, rng);
    return tree;
}

// Deepest proper binary tree: a chain of m features, each with one leaf child
// except the last, which has two. The worst case for non-adaptive triples.
inline FeatureTree gen_caterpillar_tree(int m, std::uint64_t seed) {
    if (m < 1) throw InvalidParameter("caterpillar tree needs m >= 1");
    Rng rng(seed);
    FeatureTree tree;
    int spine = FeatureTree::root;
    for (int k = 0; k < m; ++k) {
        tree.add_node(spine);
        spine = tree.add_node(spine);
    }
    tree.add_node(spine);
    tree.add_node(spine);
    detail::number_tree(tree, rng);
    return tree;
}

// Random D-ary leafy tree with exactly leaf_budget leaves. The internal
// skeleton is grown by attaching each new feature under a uniformly chosen
// internal node that still has fewer than d internal children; then every
// internal node receives the leaves it needs to have at least two children
// and the remaining leaves are scattered uniformly over internal nodes.
inline FeatureTree gen_d_ary_leafy_tree(int m, int d, int leaf_budget, std::uint64_t seed) {
    if (m < 1) throw InvalidParameter("leafy tree needs m >= 1");
    if (d < 2) throw InvalidParameter("leafy tree needs d >= 2");
    // sum over internal nodes of max(0, 2 - internal children) is m + 2 plus
    // the excess branching above 2, so m + 2 leaves is the feasibility floor.
    if (leaf_budget < m + 2)
        throw InvalidParameter("leafy tree with m features needs at least m + 2 leaves");
    Rng rng(seed);

    auto grow = [&](int branching) {
        std::vector<int> parent(static_cast<std::size_t>(m) + 1, -1);
        std::vector<int> fanout(static_cast<std::size_t>(m) + 1, 0);
        std::vector<int> open{0};
        for (int k = 1; k <= m; ++k) {
            std::size_t pick = uniform_index(rng, open.size());
            int p = open[pick];
            parent[static_cast<std::size_t>(k)] = p;
            if (++fanout[static_cast<std::size_t>(p)] == branching) {
                open[pick] = open.back();
                open.pop_back();
            }
            open.push_back(k);
        }
        return std::pair{parent, fanout};
    };
    auto need_of = [](const std::vector<int>& fanout) {
        int need = 0;
        for (int c : fanout) need += std::max(0, 2 - c);
        return need;
    };

    auto [parent, fanout] = grow(d);
    for (int attempt = 0; attempt < 64 && need_of(fanout) > leaf_budget; ++attempt)
        std::tie(parent, fanout) = grow(d);
    if (need_of(fanout) > leaf_budget) std::tie(parent, fanout) = grow(2);

    FeatureTree tree;
    std::vector<int> node_of(static_cast<std::size_t>(m) + 1, FeatureTree::root);
    for (int k = 1; k <= m; ++k)
        node_of[static_cast<std::size_t>(k)] = tree.add_node(node_of[static_cast<std::size_t>(parent[static_cast<std::size_t>(k)])]);
    int placed = 0;
    for (int k = 0; k <= m; ++k) {
        for (int r = fanout[static_cast<std::size_t>(k)]; r < 2; ++r, ++placed)
            tree.add_node(node_of[static_cast<std::size_t>(k)]);
    }
    for (; placed < leaf_budget; ++placed)
        tree.add_node(node_of[uniform_index(rng, node_of.size())]);
    detail::number_tree(tree, rng);
    return tree;
}

inline FeatureMatrix tree_to_matrix(const FeatureTree& tree) {
    FeatureMatrix out(tree.n_examples(), tree.feature_names);
    for (auto& nd : tree.nodes) {
        if (!nd.example) continue;
        for (auto p = nd.parent; p; p = tree.node(*p).parent) {
            if (auto f = tree.node(*p).feature) out.set(*nd.example, *f, true);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Structural validation

enum class TreeShape { ProperBinary, DAryLeafy };

struct TreeKind {
    TreeShape shape = TreeShape::ProperBinary;
    int d = 2;

    static TreeKind proper_binary() { return {TreeShape::ProperBinary, 2}; }
    static TreeKind d_ary_leafy(int d) { return {TreeShape::DAryLeafy, d}; }
};

struct TreeViolation {
    int node;
    std::string message;
};

inline std::vector<TreeViolation> validate_tree(const FeatureTree& tree, TreeKind kind) {
    std::vector<TreeViolation> out;
    auto fail = [&](int v, std::string msg) { out.push_back({v, std::move(msg)}); };
    if (tree.nodes.empty()) {
        fail(-1, "tree has no root");
        return out;
    }
    const auto& root = tree.nodes[0];
    if (root.parent) fail(0, "root has a parent");
    if (root.feature || root.example) fail(0, "root carries a feature or example");
    if (root.children.empty()) fail(0, "root has no children");

    // Reachability and parent/child agreement.
    std::vector<int> seen(tree.nodes.size(), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (int c : tree.nodes[static_cast<std::size_t>(v)].children) {
            if (c <= 0 || static_cast<std::size_t>(c) >= tree.nodes.size()) {
                fail(v, "child index out of range");
                continue;
            }
            if (seen[static_cast<std::size_t>(c)]++) {
                fail(c, "node reached twice (cycle or shared child)");
                continue;
            }
            if (tree.nodes[static_cast<std::size_t>(c)].parent != v) fail(c, "parent link disagrees with child list");
            stack.push_back(c);
        }
    }
    std::vector<int> feature_hits(tree.feature_names.size(), 0);
    std::vector<ExampleId> examples;
    for (std::size_t v = 1; v < tree.nodes.size(); ++v) {
        const auto& nd = tree.nodes[v];
        int iv = static_cast<int>(v);
        if (!seen[v]) fail(iv, "node unreachable from root");
        if (nd.children.empty()) {
            if (!nd.example) fail(iv, "leaf without example");
            if (nd.feature) fail(iv, "feature node without children");
            if (nd.example) examples.push_back(*nd.example);
        } else {
            if (nd.example) fail(iv, "internal node carries an example");
            if (!nd.feature) {
                fail(iv, "internal node without feature");
            } else if (*nd.feature < 0 || static_cast<std::size_t>(*nd.feature) >= feature_hits.size()) {
                fail(iv, "feature id out of range");
            } else if (feature_hits[static_cast<std::size_t>(*nd.feature)]++) {
                fail(iv, "duplicate feature id " + std::to_string(*nd.feature));
            }
        }
    }
    for (std::size_t f = 0; f < feature_hits.size(); ++f) {
        if (!feature_hits[f]) fail(-1, "feature id " + std::to_string(f) + " not placed in tree");
    }
    std::sort(examples.begin(), examples.end());
    for (std::size_t k = 0; k < examples.size(); ++k) {
        if (examples[k] != static_cast<ExampleId>(k)) {
            fail(-1, "example ids are not distinct and dense");
            break;
        }
    }

    for (std::size_t v = 0; v < tree.nodes.size(); ++v) {
        const auto& nd = tree.nodes[v];
        if (nd.children.empty()) continue;
        int iv = static_cast<int>(v);
        std::size_t internal = 0;
        for (int c : nd.children) {
            if (c > 0 && static_cast<std::size_t>(c) < tree.nodes.size()) internal += !tree.nodes[static_cast<std::size_t>(c)].children.empty();
        }
        if (kind.shape == TreeShape::ProperBinary) {
            if (nd.children.size() != 2) fail(iv, "proper binary: internal node has " + std::to_string(nd.children.size()) + " children");
        } else {
            if (internal > static_cast<std::size_t>(kind.d))
                fail(iv, "branching: " + std::to_string(internal) + " internal children exceeds D=" + std::to_string(kind.d));
            if (nd.children.size() == 1 && internal == 1) fail(iv, "leafy: single child is an internal node");
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Independent features

struct FeatureBlock {
    int count = 1;
    double p = 0.5;
};

struct IndependentSpec {
    std::vector<FeatureBlock> blocks;

    IndependentSpec() = default;
    explicit IndependentSpec(std::vector<FeatureBlock> b) : blocks(std::move(b)) { validate(); }

    static IndependentSpec uniform(int m, double p) { return IndependentSpec({{m, p}}); }

    void validate() const {
        if (blocks.empty()) throw InvalidParameter("independent spec needs at least one block");
        for (auto& b : blocks) {
            if (b.count < 1) throw InvalidParameter("block feature count must be >= 1");
            if (!(b.p > 0.0 && b.p < 1.0)) throw InvalidParameter("block frequency must lie in (0,1)");
        }
    }

    std::size_t n_features() const {
        std::size_t m = 0;
        for (auto& b : blocks) m += static_cast<std::size_t>(b.count);
        return m;
    }

    // Per-feature frequency, flattened in block order.
    std::vector<double> frequencies() const {
        std::vector<double> out;
        for (auto& b : blocks) out.insert(out.end(), static_cast<std::size_t>(b.count), b.p);
        return out;
    }
};

// One example drawn from the product distribution.
inline Column draw_independent_row(std::span<const double> freqs, Rng& rng) {
    Column r(freqs.size());
    for (std::size_t j = 0; j < freqs.size(); ++j) r[j] = bernoulli(rng, freqs[j]);
    return r;
}

inline FeatureMatrix sample_independent(const IndependentSpec& spec, std::size_t n, std::uint64_t seed) {
    spec.validate();
    if (n < 1) throw InvalidParameter("sample_independent needs n >= 1");
    auto freqs = spec.frequencies();
    std::vector<std::string> names;
    for (std::size_t j = 0; j < freqs.size(); ++j) names.push_back(synthetic_feature_name(static_cast<FeatureId>(j)));
    FeatureMatrix out(n, std::move(names));
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < freqs.size(); ++j)
            out.set(static_cast<ExampleId>(i), static_cast<FeatureId>(j), bernoulli(rng, freqs[j]));
    }
    return out;
}

// Leafy-tree features over n examples followed by independent features on
// the same examples. Tree features come first, so identity salience ranks
// the hierarchy (shallow first) above the orthogonal features.
inline FeatureMatrix gen_tree_plus_independent(int tree_m, int d, std::size_t n, const IndependentSpec& extra,
                                               std::uint64_t seed) {
    auto tree = gen_d_ary_leafy_tree(tree_m, d, static_cast<int>(n), derive_seed(seed, 1));
    auto out = tree_to_matrix(tree);
    auto indep = sample_independent(extra, n, derive_seed(seed, 2));
    for (std::size_t j = 0; j < indep.n_features(); ++j)
        out.append_column(indep.column(static_cast<FeatureId>(j)), synthetic_feature_name(static_cast<FeatureId>(out.n_features())));
    return out;
}

// ---------------------------------------------------------------------------
// Queries against ground truth

// Features summing to |S| - 1 over the example set S.
inline std::vector<FeatureId> distinguishing_features(const FeatureMatrix& m, std::span<const ExampleId> set) {
    std::vector<FeatureId> out;
    const int target = static_cast<int>(set.size()) - 1;
    for (std::size_t j = 0; j < m.n_features(); ++j) {
        const auto& col = m.columns()[j];
        int sum = 0;
        for (ExampleId x : set) sum += col[static_cast<std::size_t>(x)];
        if (sum == target) out.push_back(static_cast<FeatureId>(j));
    }
    return out;
}

inline std::vector<FeatureId> distinguishing_features(const FeatureMatrix& m, const TripleId& t) {
    return distinguishing_features(m, std::span<const ExampleId>(t.ids()));
}

inline std::vector<FeatureId> distinguishing_features(const FeatureMatrix& m, const PairId& p) {
    return distinguishing_features(m, std::span<const ExampleId>(p.ids()));
}

namespace detail {

inline std::optional<FeatureId> extreme_distinguishing(const FeatureTree& tree, const TripleId& t, bool deepest) {
    auto leaves = tree.leaf_nodes();
    std::vector<int> hits(tree.n_features(), 0);
    std::vector<int> depth(tree.n_features(), 0);
    for (ExampleId x : t.ids()) {
        if (static_cast<std::size_t>(x) >= leaves.size()) throw InvalidParameter("triple refers to a missing leaf");
        int d = tree.depth(leaves[static_cast<std::size_t>(x)]);
        for (auto p = tree.node(leaves[static_cast<std::size_t>(x)]).parent; p; p = tree.node(*p).parent) {
            --d;
            if (auto f = tree.node(*p).feature) {
                ++hits[static_cast<std::size_t>(*f)];
                depth[static_cast<std::size_t>(*f)] = d;
            }
        }
    }
    std::optional<FeatureId> best;
    for (std::size_t f = 0; f < hits.size(); ++f) {
        if (hits[f] != 2) continue;
        if (!best || (deepest ? depth[f] > depth[static_cast<std::size_t>(*best)] : depth[f] < depth[static_cast<std::size_t>(*best)]))
            best = static_cast<FeatureId>(f);
    }
    return best;
}

} // namespace detail

// Generalist answer: the distinguishing feature closest to the root.
inline std::optional<FeatureId> shallowest_distinguishing(const FeatureTree& tree, const TripleId& t) {
    return detail::extreme_distinguishing(tree, t, false);
}

// Specifist answer: the deepest distinguishing feature.
inline std::optional<FeatureId> deepest_distinguishing(const FeatureTree& tree, const TripleId& t) {
    return detail::extreme_distinguishing(tree, t, true);
}

struct TauReport {
    std::vector<double> tau;
    double tau_min = 0.0;
    FeatureId argmin = 0;
};

// tau_f = 3 p_f^2 (1 - p_f) * prod_{g != f} (1 - p_g^2 (1 - p_g)).
// This equals the chance that a random triple splits 2-vs-1 on f and no other
// feature produces the same split; see unique_distinguishing_probability for
// the chance that f is the only distinguishing feature at all.
inline TauReport identifiability_tau(const IndependentSpec& spec) {
    spec.validate();
    auto p = spec.frequencies();
    TauReport r;
    r.tau.resize(p.size());
    for (std::size_t f = 0; f < p.size(); ++f) {
        double t = 3.0 * p[f] * p[f] * (1.0 - p[f]);
        for (std::size_t g = 0; g < p.size(); ++g) {
            if (g != f) t *= 1.0 - p[g] * p[g] * (1.0 - p[g]);
        }
        r.tau[f] = t;
    }
    auto it = std::min_element(r.tau.begin(), r.tau.end());
    r.tau_min = *it;
    r.argmin = static_cast<FeatureId>(it - r.tau.begin());
    return r;
}

inline std::vector<double> unique_distinguishing_probability(const IndependentSpec& spec) {
    spec.validate();
    auto p = spec.frequencies();
    std::vector<double> out(p.size());
    for (std::size_t f = 0; f < p.size(); ++f) {
        double t = 3.0 * p[f] * p[f] * (1.0 - p[f]);
        for (std::size_t g = 0; g < p.size(); ++g) {
            if (g != f) t *= 1.0 - 3.0 * p[g] * p[g] * (1.0 - p[g]);
        }
        out[f] = t;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Left/right counterexample

// Examples L = {0..l-1}, R = {l..l+r-1}. Features g_1..g_l carry ids 0..l-1,
// h_1..h_r ids l..l+r-1 and the target f id l+r, so identity salience makes
// f the least salient feature.
struct LrCounterexample {
    FeatureMatrix matrix;
    std::vector<ExampleId> left;
    std::vector<ExampleId> right;
    FeatureId target = 0;
    std::vector<FeatureId> g;
    std::vector<FeatureId> h;
    std::vector<FeatureId> salience;
    std::vector<std::string> warnings;
};

inline LrCounterexample build_lr_counterexample(int l, int r) {
    if (l < 1 || r < 1) throw InvalidParameter("counterexample needs l >= 1 and r >= 1");
    LrCounterexample out;
    const auto n = static_cast<std::size_t>(l + r);
    std::vector<std::string> names;
    for (int i = 1; i <= l; ++i) names.push_back("g" + std::to_string(i));
    for (int j = 1; j <= r; ++j) names.push_back("h" + std::to_string(j));
    names.push_back("f");
    out.matrix = FeatureMatrix(n, std::move(names));
    for (int i = 0; i < l; ++i) out.left.push_back(i);
    for (int j = 0; j < r; ++j) out.right.push_back(l + j);
    out.target = l + r;
    for (ExampleId x : out.left) out.matrix.set(x, out.target, true);
    for (int i = 0; i < l; ++i) {
        out.g.push_back(i);
        for (ExampleId x : out.left) {
            if (x != out.left[static_cast<std::size_t>(i)]) out.matrix.set(x, i, true);
        }
    }
    for (int j = 0; j < r; ++j) {
        FeatureId id = l + j;
        out.h.push_back(id);
        for (std::size_t x = 0; x < n; ++x) out.matrix.set(static_cast<ExampleId>(x), id, true);
        for (ExampleId x : out.right) {
            if (x != out.right[static_cast<std::size_t>(j)]) out.matrix.set(x, id, false);
        }
    }
    out.salience.resize(n + 1);
    std::iota(out.salience.begin(), out.salience.end(), 0);
    if (l == 1) out.warnings.push_back("l=1: g1 is the all-zero feature");
    if (r == 1) out.warnings.push_back("r=1: h1 is the all-one feature");
    return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline std::string bits_to_string(std::span<const std::uint8_t> bits) {
    std::string s(bits.size(), '0');
    for (std::size_t k = 0; k < bits.size(); ++k) s[k] = bits[k] ? '1' : '0';
    return s;
}

inline Column bits_from_string(const std::string& s) {
    Column out(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (s[k] != '0' && s[k] != '1') throw ValidationError("bitstring may only contain '0' and '1'");
        out[k] = s[k] == '1';
    }
    return out;
}

inline nlohmann::json matrix_to_json(const FeatureMatrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < m.n_examples(); ++i) rows.push_back(bits_to_string(m.row(static_cast<ExampleId>(i))));
    return {{"n_examples", m.n_examples()}, {"feature_names", m.feature_names()}, {"rows", rows}};
}

inline FeatureMatrix matrix_from_json(const nlohmann::json& j) {
    auto n = j.at("n_examples").get<std::size_t>();
    auto names = j.at("feature_names").get<std::vector<std::string>>();
    const auto& rows = j.at("rows");
    if (rows.size() != n) throw ValidationError("matrix JSON: row count differs from n_examples");
    FeatureMatrix m(n, names);
    for (std::size_t i = 0; i < n; ++i) {
        auto bits = bits_from_string(rows[i].get<std::string>());
        if (bits.size() != names.size()) throw ValidationError("matrix JSON: row width differs from feature count");
        for (std::size_t f = 0; f < bits.size(); ++f) m.set(static_cast<ExampleId>(i), static_cast<FeatureId>(f), bits[f]);
    }
    return m;
}

inline nlohmann::json tree_to_json(const FeatureTree& tree) {
    auto rec = [&](auto&& self, int v) -> nlohmann::json {
        const auto& nd = tree.node(v);
        nlohmann::json j;
        j["feature"] = nd.feature ? nlohmann::json(tree.feature_names.at(static_cast<std::size_t>(*nd.feature))) : nlohmann::json();
        j["leaf"] = nd.example ? nlohmann::json(*nd.example) : nlohmann::json();
        j["children"] = nlohmann::json::array();
        for (int c : nd.children) j["children"].push_back(self(self, c));
        return j;
    };
    auto j = rec(rec, FeatureTree::root);
    j["feature_names"] = tree.feature_names;
    return j;
}

// Feature ids follow the root's "feature_names" list when present, otherwise
// pre-order of appearance.
inline FeatureTree tree_from_json(const nlohmann::json& j) {
    FeatureTree tree;
    if (j.contains("feature_names")) tree.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    auto id_of = [&](const std::string& name) {
        auto it = std::find(tree.feature_names.begin(), tree.feature_names.end(), name);
        if (it != tree.feature_names.end()) return static_cast<FeatureId>(it - tree.feature_names.begin());
        tree.feature_names.push_back(name);
        return static_cast<FeatureId>(tree.feature_names.size() - 1);
    };
    auto rec = [&](auto&& self, const nlohmann::json& node, int v) -> void {
        for (const auto& c : node.at("children")) {
            int id = tree.add_node(v);
            auto& nd = tree.nodes[static_cast<std::size_t>(id)];
            if (!c.at("feature").is_null()) nd.feature = id_of(c.at("feature").get<std::string>());
            if (!c.at("leaf").is_null()) tree.nodes[static_cast<std::size_t>(id)].example = c.at("leaf").get<ExampleId>();
            self(self, c, id);
        }
    };
    rec(rec, j, FeatureTree::root);
    return tree;
}

} // namespace trifeat
