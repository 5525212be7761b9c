#include <gtest/gtest.h>

#include <map>

#include "oracles.hpp"
#include "trifeat/resolution.hpp"

using namespace trifeat;

namespace {

struct Instance {
    std::size_t n;
    std::vector<Column> labels;
    SignaturePartition partition;
    NoneSet none;
    std::set<TripleId> excluded;
    std::vector<PairId> none_pairs;
    std::set<PairId> answered_pairs;
};

Instance random_instance(std::uint64_t seed) {
    Rng rng(seed);
    std::size_t n = 4 + uniform_index(rng, 9);
    std::size_t k = uniform_index(rng, 5);
    Instance in{n, {}, SignaturePartition(n), {}, {}, {}, {}};
    for (std::size_t j = 0; j < k; ++j) {
        Column c(n);
        double p = 0.15 + 0.7 * std::uniform_real_distribution<double>()(rng);
        for (auto& b : c) b = bernoulli(rng, p);
        in.labels.push_back(c);
        in.partition.apply_discovery(c, "c" + std::to_string(j));
    }
    for (int q = 0; q < 6; ++q) {
        auto s = sample_distinct(rng, n, 3);
        TripleId t(static_cast<ExampleId>(s[0]), static_cast<ExampleId>(s[1]), static_cast<ExampleId>(s[2]));
        if (q % 2) in.none.add(t);
        else in.none.add_answered(t);
        in.excluded.insert(t);
        PairId p(t[0], t[1]);
        if (q % 3 == 0) {
            in.none.add(p);
            in.none_pairs.push_back(p);
        } else if (q % 3 == 1) {
            in.none.add_answered(p);
            in.answered_pairs.insert(p);
        }
    }
    return in;
}

} // namespace

TEST(Signature, StringAndResolution) {
    std::vector<Column> labels{{1, 0, 1}, {0, 0, 1}};
    EXPECT_EQ(signature(0, labels), "10");
    EXPECT_EQ(signature(2, labels), "11");
    EXPECT_TRUE(is_triple_resolved("10", "00", "11"));
    EXPECT_FALSE(is_triple_resolved("10", "00", "00"));
    EXPECT_TRUE(is_triple_resolved("1", "1", "0"));
}

TEST(Partition, IncrementalMatchesRebuild) {
    for (std::uint64_t s = 0; s < 50; ++s) {
        auto in = random_instance(s);
        std::vector<std::string> names;
        for (std::size_t j = 0; j < in.labels.size(); ++j) names.push_back("c" + std::to_string(j));
        auto rebuilt = SignaturePartition::from_labels(in.n, in.labels, names);
        EXPECT_EQ(in.partition.class_map(), rebuilt.class_map());
        EXPECT_TRUE(in.partition.consistent());
        for (ExampleId x = 0; x < static_cast<ExampleId>(in.n); ++x)
            EXPECT_EQ(in.partition.signature_string(x), signature(x, in.labels));
    }
}

TEST(Partition, UnresolvedTripleCountMatchesBruteForce) {
    for (std::uint64_t s = 0; s < 200; ++s) {
        auto in = random_instance(s);
        auto want = oracle_ref::unresolved_triples(in.n, in.labels, in.excluded);
        EXPECT_EQ(count_unresolved_triples(in.partition, in.none), want.size()) << "seed " << s;
        NoneSet empty;
        EXPECT_EQ(count_unresolved_triples(in.partition, empty), oracle_ref::unresolved_triples(in.n, in.labels, {}).size());
    }
}

TEST(Partition, UnresolvedPairCountMatchesBruteForce) {
    for (std::uint64_t s = 0; s < 200; ++s) {
        auto in = random_instance(s);
        auto want = oracle_ref::unresolved_pairs(in.n, in.labels, in.none_pairs, in.answered_pairs);
        EXPECT_EQ(count_unresolved_pairs(in.partition, in.none), want.size()) << "seed " << s;
    }
}

TEST(Partition, SamplesAreUnresolvedAndNoneWhenExhausted) {
    for (std::uint64_t s = 0; s < 100; ++s) {
        auto in = random_instance(s);
        auto open = oracle_ref::unresolved_triples(in.n, in.labels, in.excluded);
        auto t = sample_unresolved_triple(in.partition, in.none, s);
        EXPECT_EQ(t.has_value(), !open.empty());
        if (t) EXPECT_TRUE(open.count(*t));
        auto open_pairs = oracle_ref::unresolved_pairs(in.n, in.labels, in.none_pairs, in.answered_pairs);
        auto p = sample_unresolved_pair(in.partition, in.none, s);
        EXPECT_EQ(p.has_value(), !open_pairs.empty());
        if (p) EXPECT_TRUE(open_pairs.count(*p));
    }
}

TEST(Partition, TripleSamplingIsUniform) {
    std::size_t n = 7;
    SignaturePartition p(n);
    p.apply_discovery(Column{1, 1, 1, 0, 0, 0, 0}, "a");
    p.apply_discovery(Column{1, 0, 0, 1, 1, 0, 0}, "b");
    NoneSet none;
    none.add(TripleId(3, 5, 6));
    auto open = oracle_ref::unresolved_triples(n, p.labels(), {TripleId(3, 5, 6)});
    ASSERT_GT(open.size(), 3u);
    std::map<TripleId, int> hits;
    Rng rng(77);
    const int draws = 30000;
    for (int k = 0; k < draws; ++k) ++hits[*sample_unresolved_triple(p, none, rng)];
    EXPECT_EQ(hits.size(), open.size());
    // Chi-square against uniform; df < 40 here, 99.9% critical value ~ 73.
    double expect = static_cast<double>(draws) / static_cast<double>(open.size()), chi = 0.0;
    for (auto& t : open) chi += (hits[t] - expect) * (hits[t] - expect) / expect;
    EXPECT_LT(chi, 73.0);
}

TEST(NoneSet, PairNonesAreTransitive) {
    NoneSet s;
    s.add(PairId(0, 1));
    s.add(PairId(1, 2));
    EXPECT_TRUE(s.contains(PairId(0, 2)));
    EXPECT_FALSE(s.contains(PairId(0, 3)));
    SignaturePartition p(4);
    EXPECT_EQ(count_unresolved_pairs(p, s), 3u);
}

TEST(NoneSet, TripleNoneDoesNotSpread) {
    NoneSet s;
    s.add(TripleId(0, 1, 2));
    EXPECT_TRUE(s.contains(TripleId(0, 1, 2)));
    EXPECT_FALSE(s.contains(TripleId(0, 1, 3)));
    SignaturePartition p(4);
    EXPECT_EQ(count_unresolved_triples(p, s), 3u);
}

TEST(Partition, DiscoveryWidthChecked) {
    SignaturePartition p(3);
    EXPECT_ANY_THROW(p.apply_discovery(Column{1, 0}, "bad"));
}

TEST(Partition, JsonRoundTrip) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        auto in = random_instance(s);
        auto j = partition_to_json(in.partition, in.none);
        auto [p, none] = partition_from_json(j);
        EXPECT_EQ(p.class_map(), in.partition.class_map());
        EXPECT_EQ(none.none_triples(), in.none.none_triples());
        EXPECT_EQ(none.answered_pairs(), in.none.answered_pairs());
        EXPECT_EQ(count_unresolved_triples(p, none), count_unresolved_triples(in.partition, in.none));
        EXPECT_EQ(count_unresolved_pairs(p, none), count_unresolved_pairs(in.partition, in.none));
        EXPECT_EQ(partition_to_json(p, none).dump(), j.dump());
    }
}

TEST(Partition, WideSignaturesPackPastOneWord) {
    std::size_t n = 6;
    SignaturePartition p(n);
    std::vector<Column> labels;
    for (int j = 0; j < 150; ++j) {
        Column c(n, 0);
        if (j == 140) c = Column{1, 1, 0, 0, 0, 0};
        p.apply_discovery(c, "w" + std::to_string(j));
        labels.push_back(c);
    }
    NoneSet none;
    EXPECT_EQ(count_unresolved_triples(p, none), oracle_ref::unresolved_triples(n, labels, {}).size());
}
