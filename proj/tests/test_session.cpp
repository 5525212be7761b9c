#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "trifeat/algorithms.hpp"
#include "trifeat/session.hpp"

using namespace trifeat;
namespace fs = std::filesystem;

namespace {

ItemManifest make_manifest(std::size_t n) {
    nlohmann::json j{{"title", "test"}, {"items", nlohmann::json::array()}};
    for (std::size_t i = 0; i < n; ++i) j["items"].push_back({{"id", "i" + std::to_string(i)}, {"media", "m" + std::to_string(i) + ".png"}, {"kind", "image"}});
    return manifest_from_json(j);
}

SessionConfig make_config(std::string algorithm = "adaptive-triple", int votes = 1, bool elicitor_vote = true, std::uint64_t seed = 1) {
    SessionConfig c;
    c.algorithm = std::move(algorithm);
    c.votes = votes;
    c.elicitor_vote = elicitor_vote;
    c.seed = seed;
    return c;
}

std::string id_of(std::size_t i) { return "i" + std::to_string(i); }

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) { fs::remove_all(path); }
    ~TempDir() { fs::remove_all(path); }
};

// Answers every task from a truth matrix until the session is done.
// Returns the number of elicitations answered.
std::size_t drive(Session& s, const FeatureMatrix& truth, std::size_t max_steps = 10000) {
    std::size_t elicit = 0;
    for (std::size_t step = 0; step < max_steps; ++step) {
        auto t = s.next_task();
        if (t.kind == Task::Kind::Done) return elicit;
        if (t.elicitation()) {
            ++elicit;
            auto cand = distinguishing_features(truth, std::span<const ExampleId>(t.items));
            if (cand.empty()) {
                s.submit_elicitation(t.id, std::nullopt, std::nullopt);
                continue;
            }
            FeatureId f = cand.front();
            std::vector<std::string> chosen;
            for (auto x : t.items) {
                if (truth.at(x, f)) chosen.push_back(id_of(static_cast<std::size_t>(x)));
            }
            s.submit_elicitation(t.id, truth.feature_name(f), chosen);
        } else {
            auto f = truth.find_feature(t.feature);
            s.submit_labels(t.id, "w", bits_to_string(truth.column(*f)));
        }
    }
    ADD_FAILURE() << "session did not finish";
    return elicit;
}

} // namespace

TEST(Manifest, Validation) {
    EXPECT_EQ(make_manifest(4).items.size(), 4u);
    EXPECT_THROW(manifest_from_json(nlohmann::json::parse(R"({"items":[{"id":"a"},{"id":"a"}]})")), ValidationError);
    EXPECT_THROW(manifest_from_json(nlohmann::json::parse(R"({"items":[{"id":""}]})")), ValidationError);
    EXPECT_THROW(manifest_from_json(nlohmann::json::parse(R"({"items":[{"id":"a","kind":"audio"}]})")), ValidationError);
    EXPECT_THROW(manifest_from_json(nlohmann::json::parse(R"({"title":"x"})")), ValidationError);
    auto m = make_manifest(3);
    EXPECT_EQ(manifest_to_json(manifest_from_json(manifest_to_json(m))).dump(), manifest_to_json(m).dump());
}

TEST(SessionConfigJson, Validation) {
    EXPECT_THROW(session_config_from_json({{"algorithm", "tagging"}}), ValidationError);
    EXPECT_THROW(session_config_from_json({{"algorithm", "random-triple"}}), ValidationError);
    EXPECT_THROW(session_config_from_json({{"votes", 0}}), ValidationError);
    auto c = session_config_from_json({{"algorithm", "random-triple"}, {"budget", 4}, {"votes", 3}});
    EXPECT_EQ(session_config_to_json(session_config_from_json(session_config_to_json(c))).dump(), session_config_to_json(c).dump());
}

TEST(Session, SmallManifestsRejected) {
    EXPECT_THROW(Session("s", make_manifest(2), make_config()), ValidationError);
    EXPECT_NO_THROW(Session("s", make_manifest(2), make_config("adaptive-pair")));
    EXPECT_THROW(Session("s", make_manifest(1), make_config("adaptive-pair")), ValidationError);
}

TEST(Session, FreshExportHasUnitScatter) {
    Session s("s", make_manifest(5), make_config());
    auto j = s.export_json();
    EXPECT_EQ(j.at("metrics").at("g"), 1.0);
    EXPECT_EQ(j.at("metrics").at("distinct_interesting"), 0);
    EXPECT_EQ(j.at("item_ids").size(), 5u);
    EXPECT_EQ(j.at("transcript"), "");
}

TEST(Session, TaskJsonShape) {
    Session s("s", make_manifest(5), make_config());
    auto j = s.next_task_json();
    EXPECT_EQ(j.at("type"), "elicit_triple");
    EXPECT_EQ(j.at("task_id"), "t1");
    ASSERT_EQ(j.at("items").size(), 3u);
    EXPECT_EQ(j.at("items")[0].at("kind"), "image");
    // The pending task is re-served until answered.
    EXPECT_EQ(s.next_task_json(), j);
}

TEST(Session, FullRunResolvesEveryTriple) {
    auto truth = tree_to_matrix(gen_d_ary_leafy_tree(6, 3, 14, 2));
    Session s("s", make_manifest(14), make_config());
    drive(s, truth);
    auto m = s.matrix();
    auto nones = std::set<TripleId>{};
    auto log = s.transcript();
    for (auto& e : log.events()) {
        if (auto q = std::get_if<event::ElicitTriple>(&e); q && !q->answer) nones.insert(q->items);
    }
    EXPECT_TRUE(oracle_ref::unresolved_triples(14, m.columns(), nones).empty());
    EXPECT_EQ(oracle_ref::unresolved_triples(14, m.columns(), {}), oracle_ref::unresolved_triples(14, truth.columns(), {}));
    for (std::size_t k = 0; k < m.n_features(); ++k) {
        auto f = truth.find_feature(m.feature_name(static_cast<FeatureId>(k)));
        ASSERT_TRUE(f);
        EXPECT_EQ(m.column(static_cast<FeatureId>(k)), truth.column(*f));
    }
    EXPECT_TRUE(check_transcript_order(s.transcript()).empty());
    EXPECT_EQ(s.next_task().kind, Task::Kind::Done);
}

TEST(Session, PairSessionRuns) {
    auto truth = sample_independent(IndependentSpec::uniform(3, 0.5), 8, 1);
    Session s("s", make_manifest(8), make_config("adaptive-pair"));
    drive(s, truth);
    std::vector<PairId> nones;
    auto log = s.transcript();
    for (auto& e : log.events()) {
        if (auto q = std::get_if<event::ElicitPair>(&e); q && !q->answer) nones.push_back(q->items);
    }
    EXPECT_TRUE(oracle_ref::unresolved_pairs(8, s.matrix().columns(), nones, {}).empty());
}

TEST(Session, RandomTripleHonoursBudget) {
    auto truth = tree_to_matrix(gen_proper_binary_tree(4, 1));
    auto c = make_config("random-triple");
    c.budget = 7;
    Session s("s", make_manifest(6), c);
    EXPECT_EQ(drive(s, truth), 7u);
    auto log = s.transcript();
    auto& last = log.events().back();
    EXPECT_EQ(std::get<event::Termination>(last).reason, termination::budget);
}

TEST(Session, MajorityOfFiveVotes) {
    Session s("s", make_manifest(4), make_config("adaptive-triple", 5, false));
    auto t = s.next_task();
    std::vector<std::string> chosen{id_of(static_cast<std::size_t>(t.items[0])), id_of(static_cast<std::size_t>(t.items[1]))};
    s.submit_elicitation(t.id, std::string("red"), chosen);
    auto lab = s.next_task();
    ASSERT_EQ(lab.kind, Task::Kind::LabelBatch);
    EXPECT_EQ(lab.feature, "red");
    // item0: 1,1,1,0,0 -> 1; item1: 0,0,0,1,1 -> 0; item2: 1,0,1,0,1 -> 1; item3: 0,0,1,1,0 -> 0.
    const char* ballots[] = {"1010", "1000", "1011", "0101", "0110"};
    for (int v = 0; v < 4; ++v) s.submit_labels(lab.id, "v" + std::to_string(v), ballots[v]);
    EXPECT_EQ(s.matrix().n_features(), 0u);
    EXPECT_EQ(s.next_task().kind, Task::Kind::LabelBatch);
    s.submit_labels(lab.id, "v4", ballots[4]);
    auto m = s.matrix();
    ASSERT_EQ(m.n_features(), 1u);
    EXPECT_EQ(m.column(0), (Column{1, 0, 1, 0}));
}

TEST(Session, ElicitorCountsAsOneVote) {
    Session s("s", make_manifest(5), make_config("adaptive-triple", 3, true));
    auto t = s.next_task();
    std::vector<std::string> chosen{id_of(static_cast<std::size_t>(t.items[0])), id_of(static_cast<std::size_t>(t.items[1]))};
    s.submit_elicitation(t.id, std::string("red"), chosen);
    auto lab = s.next_task();
    std::string zeros(5, '0');
    s.submit_labels(lab.id, "a", zeros);
    s.submit_labels(lab.id, "b", zeros);
    EXPECT_EQ(s.matrix().n_features(), 0u);
    std::string ones(5, '1');
    s.submit_labels(lab.id, "c", ones);
    auto col = s.matrix().column(0);
    // Queried items were full before "c" voted (chosen ones at 1-0-0), the
    // rest end at 0-0-1.
    for (std::size_t x = 0; x < 5; ++x) EXPECT_EQ(col[x], 0) << x;
    EXPECT_EQ(s.warnings().size(), 1u);
}

TEST(Session, SingleVoteFromElicitorFixesQueriedItems) {
    Session s("s", make_manifest(5), make_config("adaptive-triple", 1, true));
    auto t = s.next_task();
    std::vector<std::string> chosen{id_of(static_cast<std::size_t>(t.items[0])), id_of(static_cast<std::size_t>(t.items[2]))};
    s.submit_elicitation(t.id, std::string("red"), chosen);
    auto lab = s.next_task();
    auto col_bits = std::string(5, '0');
    s.submit_labels(lab.id, "w", col_bits);
    auto col = s.matrix().column(0);
    EXPECT_EQ(col[static_cast<std::size_t>(t.items[0])], 1);
    EXPECT_EQ(col[static_cast<std::size_t>(t.items[1])], 0);
    EXPECT_EQ(col[static_cast<std::size_t>(t.items[2])], 1);
    EXPECT_TRUE(s.warnings().empty());
    EXPECT_TRUE(s.resolved_now(TripleId(t.items[0], t.items[1], t.items[2])));
}

TEST(Session, InconsistentLabelsWarn) {
    Session s("s", make_manifest(4), make_config("adaptive-triple", 1, false));
    auto t = s.next_task();
    s.submit_elicitation(t.id, std::string("red"),
                         std::vector<std::string>{id_of(static_cast<std::size_t>(t.items[0])), id_of(static_cast<std::size_t>(t.items[1]))});
    auto lab = s.next_task();
    s.submit_labels(lab.id, "w", "1111");
    ASSERT_EQ(s.warnings().size(), 1u);
    EXPECT_EQ(s.export_json().at("warnings").size(), 1u);
}

TEST(Session, DuplicateNamesFlagged) {
    auto truth = FeatureMatrix(6, {"Red", "red"});
    for (ExampleId x : {0, 1, 2}) truth.set(x, 0, true);
    for (ExampleId x : {0, 3}) truth.set(x, 1, true);
    Session s("s", make_manifest(6), make_config());
    drive(s, truth);
    auto m = s.matrix();
    if (m.n_features() == 2) {
        auto flags = s.export_json().at("flags");
        ASSERT_EQ(flags.size(), 1u);
        EXPECT_EQ(flags[0].at("possible_duplicate_of"), m.feature_name(0));
    } else {
        ADD_FAILURE() << "expected both columns to be elicited";
    }
}

TEST(Session, ConflictsAndValidation) {
    Session s("s", make_manifest(5), make_config("adaptive-triple", 2, false));
    auto t = s.next_task();
    EXPECT_THROW(s.submit_elicitation("t99", std::nullopt, std::nullopt), ConflictError);
    EXPECT_THROW(s.submit_labels(t.id, "w", "00000"), ConflictError);
    EXPECT_THROW(s.submit_elicitation(t.id, std::string("red"), std::nullopt), ValidationError);
    EXPECT_THROW(s.submit_elicitation(t.id, std::string("red"), std::vector<std::string>{id_of(static_cast<std::size_t>(t.items[0]))}), ValidationError);
    EXPECT_THROW(s.submit_elicitation(t.id, std::string("red"), std::vector<std::string>{"nope", id_of(static_cast<std::size_t>(t.items[0]))}), ValidationError);
    EXPECT_THROW(s.submit_elicitation(t.id, std::string(""), std::vector<std::string>{}), ValidationError);
    s.submit_elicitation(t.id, std::string("red"),
                         std::vector<std::string>{id_of(static_cast<std::size_t>(t.items[0])), id_of(static_cast<std::size_t>(t.items[1]))});
    // The elicitation is no longer pending.
    EXPECT_THROW(s.submit_elicitation(t.id, std::nullopt, std::nullopt), ConflictError);
    auto lab = s.next_task();
    EXPECT_THROW(s.submit_labels(lab.id, "w", "000"), ValidationError);
    EXPECT_THROW(s.submit_labels(lab.id, "w", "0002a"), ValidationError);
    EXPECT_THROW(s.submit_labels(lab.id, "", "00000"), ValidationError);
    s.submit_labels(lab.id, "w", "11000");
    EXPECT_THROW(s.submit_labels(lab.id, "w", "11000"), ConflictError);
    s.submit_labels(lab.id, "x", "11000");
    EXPECT_THROW(s.submit_labels(lab.id, "y", "11000"), ConflictError);
}

TEST(Session, FirstTripleIsUniform) {
    const std::size_t n = 100, runs = 20000;
    auto manifest = make_manifest(n);
    std::vector<double> hits(n, 0.0);
    std::size_t both01 = 0;
    for (std::size_t r = 0; r < runs; ++r) {
        Session s("s", manifest, make_config("adaptive-triple", 1, true, r));
        auto t = s.next_task();
        for (auto x : t.items) hits[static_cast<std::size_t>(x)] += 1;
        bool a = std::find(t.items.begin(), t.items.end(), 0) != t.items.end();
        bool b = std::find(t.items.begin(), t.items.end(), 1) != t.items.end();
        both01 += a && b;
    }
    // Each item appears with probability 3/n; chi-square over 99 df, 99.9% ~ 148.
    const double expect = 3.0 * runs / n;
    double chi = 0.0;
    for (double h : hits) chi += (h - expect) * (h - expect) / expect;
    EXPECT_LT(chi, 148.0);
    // Pairs co-occur with probability 3*2/(n(n-1)).
    const double p01 = 6.0 / (n * (n - 1.0));
    EXPECT_NEAR(static_cast<double>(both01) / runs, p01, 5.0 * std::sqrt(p01 / runs));
}

TEST(Session, ExportTranscriptReplaysToSameMatrix) {
    auto truth = tree_to_matrix(gen_d_ary_leafy_tree(5, 3, 12, 7));
    Session s("s", make_manifest(12), make_config());
    drive(s, truth);
    auto j = s.export_json();
    auto r = replay(Transcript::from_jsonl(j.at("transcript").get<std::string>()), nullptr);
    EXPECT_EQ(r.features.columns(), s.matrix().columns());
    EXPECT_EQ(r.features.feature_names(), s.matrix().feature_names());
    auto gt = GroundTruth::from_matrix(truth);
    EXPECT_NO_THROW(replay(Transcript::from_jsonl(j.at("transcript").get<std::string>()), &gt));
    EXPECT_EQ(matrix_from_json(j.at("matrix")).columns(), s.matrix().columns());
}

TEST(Session, RestoreFromLogIsExact) {
    auto truth = tree_to_matrix(gen_d_ary_leafy_tree(5, 3, 12, 3));
    Session s("s", make_manifest(12), make_config("adaptive-triple", 1, true, 9));
    // Stop mid-run: one label batch outstanding.
    for (int k = 0; k < 40; ++k) {
        auto t = s.next_task();
        if (t.kind != Task::Kind::ElicitTriple) break;
        auto cand = distinguishing_features(truth, std::span<const ExampleId>(t.items));
        if (cand.empty()) {
            s.submit_elicitation(t.id, std::nullopt, std::nullopt);
            continue;
        }
        std::vector<std::string> chosen;
        for (auto x : t.items) {
            if (truth.at(x, cand[0])) chosen.push_back(id_of(static_cast<std::size_t>(x)));
        }
        s.submit_elicitation(t.id, truth.feature_name(cand[0]), chosen);
        auto lab = s.next_task();
        if (k < 3) s.submit_labels(lab.id, "w", bits_to_string(truth.column(cand[0])));
        else break;
    }
    auto r = Session::restore(s.log_text());
    EXPECT_EQ(r->log_text(), s.log_text());
    EXPECT_EQ(r->matrix().columns(), s.matrix().columns());
    EXPECT_EQ(r->transcript().to_jsonl(), s.transcript().to_jsonl());
    EXPECT_EQ(r->next_task_json(), s.next_task_json());
    // Both continue identically.
    drive(*r, truth);
    drive(s, truth);
    EXPECT_EQ(r->log_text(), s.log_text());
}

TEST(Session, TamperedLogRejected) {
    Session s("s", make_manifest(6), make_config());
    auto t = s.next_task();
    s.submit_elicitation(t.id, std::nullopt, std::nullopt);
    s.next_task();
    auto text = s.log_text();
    auto pos = text.find("\"t2\"");
    ASSERT_NE(pos, std::string::npos);
    auto bad = text;
    bad.replace(pos, 4, "\"t7\"");
    EXPECT_THROW(Session::restore(bad), ReplayError);
    EXPECT_THROW(Session::restore("{\"type\":\"vote\"}\n"), ReplayError);
    EXPECT_THROW(Session::restore(text + "not json\n"), ReplayError);
}

TEST(Manager, PersistsAndReloads) {
    TempDir dir("trifeat_session_mgr");
    auto truth = tree_to_matrix(gen_proper_binary_tree(4, 5));
    std::string id, log;
    {
        SessionManager mgr(dir.path, 3);
        id = mgr.create(make_manifest(6), make_config());
        auto s = mgr.get(id);
        auto t = s->next_task();
        auto cand = distinguishing_features(truth, std::span<const ExampleId>(t.items));
        if (cand.empty()) {
            s->submit_elicitation(t.id, std::nullopt, std::nullopt);
        } else {
            std::vector<std::string> chosen;
            for (auto x : t.items) {
                if (truth.at(x, cand[0])) chosen.push_back(id_of(static_cast<std::size_t>(x)));
            }
            s->submit_elicitation(t.id, truth.feature_name(cand[0]), chosen);
        }
        s->next_task();
        log = s->log_text();
        EXPECT_THROW(mgr.get("missing"), NotFoundError);
    }
    EXPECT_TRUE(fs::exists(dir.path / id / "transcript.jsonl"));
    EXPECT_TRUE(fs::exists(dir.path / id / "snapshot.json"));
    std::ifstream f(dir.path / id / "transcript.jsonl");
    std::stringstream ss;
    ss << f.rdbuf();
    EXPECT_EQ(ss.str(), log);

    SessionManager again(dir.path, 3);
    ASSERT_EQ(again.ids(), std::vector<std::string>{id});
    auto s = again.get(id);
    EXPECT_EQ(s->log_text(), log);
    drive(*s, truth);
    EXPECT_EQ(s->next_task().kind, Task::Kind::Done);
    auto second = again.create(make_manifest(3), make_config());
    EXPECT_NE(second, id);
}
