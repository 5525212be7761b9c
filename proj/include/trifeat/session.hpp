#pragma once

// Live discovery sessions against human answerers. A session serves
// elicitation tasks chosen by the configured algorithm, collects batch label
// votes, commits majority columns into the partition and keeps an
// append-only JSON-lines log that is enough to rebuild it after a restart.
//
// The log interleaves transcript events (elicit_*, discovery, label_batch,
// termination) with session bookkeeping (session_create, task_served, vote).
// Transcript::from_jsonl skips the bookkeeping, so the same file replays as a
// plain run transcript.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "algorithms.hpp"
#include "error.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "resolution.hpp"
#include "rng.hpp"
#include "transcript.hpp"

namespace trifeat {

struct Item {
    std::string id;
    std::string media;
    std::string kind = "text";
};

struct ItemManifest {
    std::string title;
    std::optional<std::string> license;
    std::vector<Item> items;

    std::optional<std::size_t> index_of(const std::string& id) const {
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (items[i].id == id) return i;
        }
        return std::nullopt;
    }
};

inline ItemManifest manifest_from_json(const nlohmann::json& j) {
    ItemManifest m;
    try {
        m.title = j.value("title", std::string());
        if (j.contains("license") && !j.at("license").is_null()) m.license = j.at("license").get<std::string>();
        for (auto& it : j.at("items")) {
            Item item;
            item.id = it.at("id").get<std::string>();
            item.media = it.value("media", std::string());
            item.kind = it.value("kind", std::string("text"));
            m.items.push_back(std::move(item));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed manifest: ") + e.what());
    }
    std::set<std::string> seen;
    for (auto& it : m.items) {
        if (it.id.empty()) throw ValidationError("manifest item ids must be non-empty");
        if (!seen.insert(it.id).second) throw ValidationError("duplicate manifest item id '" + it.id + "'");
        if (it.kind != "image" && it.kind != "video" && it.kind != "text")
            throw ValidationError("item kind must be image, video or text");
    }
    return m;
}

inline nlohmann::json manifest_to_json(const ItemManifest& m) {
    nlohmann::json j{{"title", m.title}, {"items", nlohmann::json::array()}};
    if (m.license) j["license"] = *m.license;
    for (auto& it : m.items) j["items"].push_back({{"id", it.id}, {"media", it.media}, {"kind", it.kind}});
    return j;
}

struct SessionConfig {
    std::string algorithm = "adaptive-triple";
    std::optional<std::size_t> budget;
    // Votes per item before a label column is committed.
    int votes = 1;
    // The elicitor's assertion counts as one vote on the queried items.
    bool elicitor_vote = true;
    std::uint64_t seed = 0;

    std::size_t arity() const { return algorithm == "adaptive-pair" ? 2 : 3; }
};

inline SessionConfig session_config_from_json(const nlohmann::json& j) {
    SessionConfig c;
    try {
        c.algorithm = j.value("algorithm", c.algorithm);
        if (j.contains("budget") && !j.at("budget").is_null()) c.budget = j.at("budget").get<std::size_t>();
        c.votes = j.value("votes", c.votes);
        c.elicitor_vote = j.value("elicitor_vote", c.elicitor_vote);
        c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed session config: ") + e.what());
    }
    if (c.algorithm != "adaptive-triple" && c.algorithm != "adaptive-pair" && c.algorithm != "random-triple")
        throw ValidationError("session algorithm must be adaptive-triple, adaptive-pair or random-triple");
    if (c.algorithm == "random-triple" && !c.budget) throw ValidationError("random-triple sessions need a budget");
    if (c.votes < 1) throw ValidationError("votes must be >= 1");
    return c;
}

inline nlohmann::json session_config_to_json(const SessionConfig& c) {
    nlohmann::json j{{"algorithm", c.algorithm}, {"votes", c.votes}, {"elicitor_vote", c.elicitor_vote}, {"seed", c.seed}};
    j["budget"] = c.budget ? nlohmann::json(*c.budget) : nlohmann::json();
    return j;
}

struct Task {
    enum class Kind { ElicitTriple, ElicitPair, LabelBatch, Done };
    Kind kind = Kind::Done;
    std::string id;
    std::vector<ExampleId> items;
    std::string feature;

    bool elicitation() const { return kind == Kind::ElicitTriple || kind == Kind::ElicitPair; }
};

inline std::string task_kind_name(Task::Kind k) {
    switch (k) {
    case Task::Kind::ElicitTriple: return "elicit_triple";
    case Task::Kind::ElicitPair: return "elicit_pair";
    case Task::Kind::LabelBatch: return "label_batch";
    case Task::Kind::Done: return "done";
    }
    return "done";
}

inline std::string case_fold(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

class Session {
public:
    Session(std::string id, ItemManifest manifest, SessionConfig config, std::optional<std::filesystem::path> dir = {})
        : id_(std::move(id)), manifest_(std::move(manifest)), config_(std::move(config)),
          partition_(manifest_.items.size()), features_(manifest_.items.size()), dir_(std::move(dir)) {
        if (manifest_.items.size() < config_.arity())
            throw ValidationError("session needs at least " + std::to_string(config_.arity()) + " items");
        if (dir_) {
            std::filesystem::create_directories(*dir_);
            std::ofstream(*dir_ / "transcript.jsonl", std::ios::trunc);
        }
        log({{"v", transcript_version},
             {"type", "session_create"},
             {"id", id_},
             {"manifest", manifest_to_json(manifest_)},
             {"config", session_config_to_json(config_)}});
        snapshot();
    }

    // Rebuilds a session from its log; derived lines are regenerated and must
    // match what was stored.
    static std::unique_ptr<Session> restore(const std::string& text, std::optional<std::filesystem::path> dir = {}) {
        std::vector<nlohmann::json> lines;
        {
            std::istringstream in(text);
            std::string line;
            while (std::getline(in, line)) {
                if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
                try {
                    lines.push_back(nlohmann::json::parse(line));
                } catch (const nlohmann::json::exception& e) {
                    throw ReplayError(lines.size(), std::string("unparseable log line: ") + e.what());
                }
            }
        }
        if (lines.empty() || lines[0].value("type", "") != "session_create") throw ReplayError(0, "log must start with session_create");
        std::unique_ptr<Session> s(new Session(lines[0].at("id").get<std::string>(), manifest_from_json(lines[0].at("manifest")),
                                               session_config_from_json(lines[0].at("config"))));
        s->replaying_ = true;
        for (std::size_t k = 1; k < lines.size(); ++k) {
            const auto& j = lines[k];
            const auto type = j.value("type", std::string());
            try {
                if (type == "task_served") {
                    auto t = s->next_task_locked();
                    if (t.id != j.at("task_id").get<std::string>()) throw ReplayError(k, "served task id differs");
                } else if (type == "elicit_triple" || type == "elicit_pair") {
                    auto ev = event_from_json(j);
                    std::optional<std::string> name;
                    std::vector<std::string> chosen;
                    std::visit(
                        [&](const auto& e) {
                            using T = std::decay_t<decltype(e)>;
                            if constexpr (std::is_same_v<T, event::ElicitTriple>) {
                                name = e.answer;
                                if (e.chosen)
                                    for (auto x : *e.chosen) chosen.push_back(s->manifest_.items.at(static_cast<std::size_t>(x)).id);
                            } else if constexpr (std::is_same_v<T, event::ElicitPair>) {
                                name = e.answer;
                                if (e.chosen) chosen.push_back(s->manifest_.items.at(static_cast<std::size_t>(*e.chosen)).id);
                            }
                        },
                        *ev);
                    s->submit_elicitation_locked(s->pending_ ? s->pending_->id : std::string(), name,
                                                 name ? std::optional(chosen) : std::nullopt);
                } else if (type == "vote") {
                    s->submit_labels_locked(j.at("task_id").get<std::string>(), j.at("voter").get<std::string>(),
                                            j.at("bits").get<std::string>());
                } else if (type == "termination") {
                    if (s->next_task_locked().kind != Task::Kind::Done) throw ReplayError(k, "termination while tasks remain");
                } else if (type == "discovery" || type == "label_batch") {
                    // regenerated
                } else {
                    throw ReplayError(k, "unknown log line type '" + type + "'");
                }
            } catch (const ReplayError&) {
                throw;
            } catch (const Error& e) {
                throw ReplayError(k, e.what());
            }
        }
        s->replaying_ = false;
        if (s->log_.size() != lines.size()) throw ReplayError(std::min(s->log_.size(), lines.size()), "log length differs after replay");
        for (std::size_t k = 0; k < lines.size(); ++k) {
            if (s->log_[k] != lines[k]) throw ReplayError(k, "regenerated log line differs");
        }
        s->dir_ = std::move(dir);
        if (s->dir_) s->snapshot();
        return s;
    }

    const std::string& id() const noexcept { return id_; }
    const ItemManifest& manifest() const noexcept { return manifest_; }
    const SessionConfig& config() const noexcept { return config_; }

    Task next_task() {
        std::unique_lock lock(mu_);
        return next_task_locked();
    }

    // chosen: manifest ids of the items the answerer says carry the feature.
    // A missing feature name means NONE.
    void submit_elicitation(const std::string& task_id, const std::optional<std::string>& feature_name,
                            const std::optional<std::vector<std::string>>& chosen) {
        std::unique_lock lock(mu_);
        submit_elicitation_locked(task_id, feature_name, chosen);
    }

    void submit_labels(const std::string& task_id, const std::string& voter, const std::string& bits) {
        std::unique_lock lock(mu_);
        submit_labels_locked(task_id, voter, bits);
    }

    nlohmann::json next_task_json() {
        std::unique_lock lock(mu_);
        return task_json(next_task_locked());
    }

    nlohmann::json task_json(const Task& t) const {
        nlohmann::json j{{"type", task_kind_name(t.kind)}};
        if (t.kind == Task::Kind::Done) return j;
        j["task_id"] = t.id;
        j["items"] = nlohmann::json::array();
        for (auto x : t.items) {
            const auto& it = manifest_.items[static_cast<std::size_t>(x)];
            j["items"].push_back({{"index", x}, {"id", it.id}, {"media", it.media}, {"kind", it.kind}});
        }
        if (t.kind == Task::Kind::LabelBatch) {
            j["feature"] = t.feature;
            j["votes_needed"] = config_.votes;
            j["voters"] = voters_;
        }
        return j;
    }

    FeatureMatrix matrix() const {
        std::shared_lock lock(mu_);
        return features_;
    }

    nlohmann::json metrics_json() const {
        std::shared_lock lock(mu_);
        return metrics_locked();
    }

    nlohmann::json export_json() const {
        std::shared_lock lock(mu_);
        nlohmann::json j{{"id", id_}, {"matrix", matrix_to_json(features_)}, {"metrics", metrics_locked()}};
        j["item_ids"] = nlohmann::json::array();
        for (auto& it : manifest_.items) j["item_ids"].push_back(it.id);
        j["flags"] = nlohmann::json::array();
        for (auto& [feature, of] : duplicate_of_) j["flags"].push_back({{"feature", feature}, {"possible_duplicate_of", of}});
        j["warnings"] = warnings_;
        j["transcript"] = transcript_.to_jsonl();
        return j;
    }

    Transcript transcript() const {
        std::shared_lock lock(mu_);
        return transcript_;
    }

    std::string log_text() const {
        std::shared_lock lock(mu_);
        std::string out;
        for (auto& j : log_) out += j.dump() + "\n";
        return out;
    }

    std::vector<std::string> warnings() const {
        std::shared_lock lock(mu_);
        return warnings_;
    }

    // Examples currently sharing a signature, for tests and the UI.
    std::size_t class_of(ExampleId x) const {
        std::shared_lock lock(mu_);
        return partition_.class_of(x);
    }

    bool resolved_now(const TripleId& t) const {
        std::shared_lock lock(mu_);
        return !detail::class_unresolved(partition_, t) || none_.contains(t);
    }

private:
    Task next_task_locked() {
        if (pending_) return *pending_;
        if (done_) return Task{};
        Task t;
        bool exhausted = config_.budget && elicitations_ >= *config_.budget;
        if (!exhausted) {
            Rng rng(derive_seed(config_.seed, served_));
            if (config_.algorithm == "adaptive-triple") {
                if (auto tri = sample_unresolved_triple(partition_, none_, rng)) {
                    t.kind = Task::Kind::ElicitTriple;
                    t.items.assign(tri->ids().begin(), tri->ids().end());
                }
            } else if (config_.algorithm == "adaptive-pair") {
                if (auto p = sample_unresolved_pair(partition_, none_, rng)) {
                    t.kind = Task::Kind::ElicitPair;
                    t.items.assign(p->ids().begin(), p->ids().end());
                }
            } else {
                auto s = sample_distinct(rng, manifest_.items.size(), 3);
                TripleId tri(static_cast<ExampleId>(s[0]), static_cast<ExampleId>(s[1]), static_cast<ExampleId>(s[2]));
                t.kind = Task::Kind::ElicitTriple;
                t.items.assign(tri.ids().begin(), tri.ids().end());
            }
        }
        if (t.kind == Task::Kind::Done) {
            done_ = true;
            record(event::Termination{exhausted ? termination::budget : termination::exhaustion});
            snapshot();
            return t;
        }
        ++served_;
        t.id = new_task_id();
        pending_ = t;
        log({{"v", transcript_version}, {"type", "task_served"}, {"task_id", t.id}, {"kind", task_kind_name(t.kind)}, {"items", t.items}});
        snapshot();
        return t;
    }

    void submit_elicitation_locked(const std::string& task_id, const std::optional<std::string>& feature_name,
                                   const std::optional<std::vector<std::string>>& chosen) {
        if (!pending_ || !pending_->elicitation() || pending_->id != task_id)
            throw ConflictError("task '" + task_id + "' is not the pending elicitation task");
        const Task task = *pending_;
        if (feature_name && feature_name->empty()) throw ValidationError("feature name must be non-empty");
        std::vector<ExampleId> chosen_ix;
        if (feature_name) {
            if (!chosen) throw ValidationError("an answer must say which items carry the feature");
            const std::size_t want = task.items.size() - 1;
            if (chosen->size() != want)
                throw ValidationError("chosen must list " + std::to_string(want) + " of the task items");
            for (auto& id : *chosen) {
                auto ix = manifest_.index_of(id);
                if (!ix || std::find(task.items.begin(), task.items.end(), static_cast<ExampleId>(*ix)) == task.items.end())
                    throw ValidationError("chosen item '" + id + "' is not part of the task");
                if (std::find(chosen_ix.begin(), chosen_ix.end(), static_cast<ExampleId>(*ix)) != chosen_ix.end())
                    throw ValidationError("chosen items must be distinct");
                chosen_ix.push_back(static_cast<ExampleId>(*ix));
            }
            std::sort(chosen_ix.begin(), chosen_ix.end());
        } else if (chosen && !chosen->empty()) {
            throw ValidationError("a NONE answer takes no chosen items");
        }

        std::size_t elicit_index;
        if (task.kind == Task::Kind::ElicitTriple) {
            TripleId t(task.items[0], task.items[1], task.items[2]);
            event::ElicitTriple ev{t, feature_name, std::nullopt};
            if (feature_name) ev.chosen = std::array<ExampleId, 2>{chosen_ix[0], chosen_ix[1]};
            elicit_index = record(ev);
            if (!feature_name) none_.add(t);
        } else {
            PairId p(task.items[0], task.items[1]);
            event::ElicitPair ev{p, feature_name, std::nullopt};
            if (feature_name) ev.chosen = chosen_ix[0];
            elicit_index = record(ev);
            if (!feature_name) none_.add(p);
        }
        ++elicitations_;
        pending_.reset();
        if (feature_name) {
            record(event::Discovery{*feature_name, elicit_index});
            Task label;
            label.kind = Task::Kind::LabelBatch;
            label.id = new_task_id();
            label.feature = *feature_name;
            label.items.resize(manifest_.items.size());
            std::iota(label.items.begin(), label.items.end(), 0);
            pending_ = label;
            origin_items_ = task.items;
            votes_.assign(manifest_.items.size(), {});
            voters_.clear();
            if (config_.elicitor_vote) {
                for (auto x : task.items)
                    votes_[static_cast<std::size_t>(x)].push_back(
                        std::find(chosen_ix.begin(), chosen_ix.end(), x) != chosen_ix.end());
            }
        }
        snapshot();
    }

    void submit_labels_locked(const std::string& task_id, const std::string& voter, const std::string& bits) {
        if (!pending_ || pending_->kind != Task::Kind::LabelBatch || pending_->id != task_id)
            throw ConflictError("task '" + task_id + "' is not the pending label task");
        if (voter.empty()) throw ValidationError("voter id must be non-empty");
        if (bits.size() != manifest_.items.size())
            throw ValidationError("bits must hold one label per item (" + std::to_string(manifest_.items.size()) + ")");
        if (bits.find_first_not_of("01") != std::string::npos) throw ValidationError("bits must be 0 or 1");
        if (std::find(voters_.begin(), voters_.end(), voter) != voters_.end())
            throw ConflictError("voter '" + voter + "' already labeled this task");
        log({{"v", transcript_version}, {"type", "vote"}, {"task_id", task_id}, {"voter", voter}, {"bits", bits}});
        voters_.push_back(voter);
        const auto k = static_cast<std::size_t>(config_.votes);
        for (std::size_t x = 0; x < bits.size(); ++x) {
            if (votes_[x].size() < k) votes_[x].push_back(bits[x] == '1');
        }
        bool ready = std::all_of(votes_.begin(), votes_.end(), [&](const auto& v) { return v.size() >= k; });
        if (ready) commit_label();
        snapshot();
    }

    void commit_label() {
        const std::string name = pending_->feature;
        Column col(manifest_.items.size());
        for (std::size_t x = 0; x < col.size(); ++x) {
            std::size_t ones = std::count(votes_[x].begin(), votes_[x].end(), true);
            col[x] = 2 * ones > votes_[x].size();
        }
        const auto folded = case_fold(name);
        for (auto& existing : features_.feature_names()) {
            if (case_fold(existing) == folded) {
                duplicate_of_.push_back({name + "#" + std::to_string(features_.n_features()), existing});
                break;
            }
        }
        std::size_t sum = 0;
        for (auto x : origin_items_) sum += col[static_cast<std::size_t>(x)];
        if (sum + 1 != origin_items_.size()) {
            warnings_.push_back("feature '" + name + "' does not distinguish the items it was elicited on");
        }
        features_.append_column(col, name);
        partition_.apply_discovery(col, name);
        record(event::LabelBatch{name, bits_to_string(col)});
        pending_.reset();
        votes_.clear();
        voters_.clear();
        origin_items_.clear();
    }

    nlohmann::json metrics_locked() const {
        auto rep = metric_report(features_);
        auto j = metric_report_to_json(rep);
        j["n_features"] = features_.n_features();
        j["elicitations"] = elicitations_;
        j["discovered"] = features_.feature_names();
        j["classes"] = partition_.classes().size();
        return j;
    }

    std::string new_task_id() { return "t" + std::to_string(++task_counter_); }

    std::size_t record(Event e) {
        log(event_to_json(e));
        return transcript_.append(std::move(e));
    }

    void log(nlohmann::json j) {
        if (dir_ && !replaying_) {
            std::ofstream f(*dir_ / "transcript.jsonl", std::ios::app | std::ios::binary);
            f << j.dump() << '\n';
            f.flush();
            if (!f) throw Error("failed to append to session log");
        }
        log_.push_back(std::move(j));
    }

    void snapshot() const {
        if (!dir_ || replaying_) return;
        nlohmann::json j{{"id", id_},
                         {"manifest", manifest_to_json(manifest_)},
                         {"config", session_config_to_json(config_)},
                         {"partition", partition_to_json(partition_, none_)},
                         {"features", matrix_to_json(features_)},
                         {"elicitations", elicitations_},
                         {"served", served_},
                         {"log_lines", log_.size()},
                         {"warnings", warnings_}};
        j["pending"] = pending_ ? task_json(*pending_) : nlohmann::json();
        auto tmp = *dir_ / "snapshot.json.tmp";
        {
            std::ofstream f(tmp, std::ios::trunc | std::ios::binary);
            f << j.dump(2);
        }
        std::filesystem::rename(tmp, *dir_ / "snapshot.json");
    }

    std::string id_;
    ItemManifest manifest_;
    SessionConfig config_;
    SignaturePartition partition_;
    NoneSet none_;
    FeatureMatrix features_;
    Transcript transcript_;
    std::vector<nlohmann::json> log_;
    std::optional<Task> pending_;
    std::vector<std::vector<bool>> votes_;
    std::vector<std::string> voters_;
    std::vector<ExampleId> origin_items_;
    std::vector<std::pair<std::string, std::string>> duplicate_of_;
    std::vector<std::string> warnings_;
    std::size_t elicitations_ = 0;
    std::size_t served_ = 0;
    std::size_t task_counter_ = 0;
    bool done_ = false;
    bool replaying_ = false;
    std::optional<std::filesystem::path> dir_;
    mutable std::shared_mutex mu_;
};

// Owns every live session; optionally persists each under root/<id>/.
class SessionManager {
public:
    explicit SessionManager(std::optional<std::filesystem::path> root = {}, std::uint64_t seed = 0)
        : root_(std::move(root)), seed_(seed) {
        if (!root_ || !std::filesystem::exists(*root_)) return;
        for (auto& entry : std::filesystem::directory_iterator(*root_)) {
            auto log = entry.path() / "transcript.jsonl";
            if (!entry.is_directory() || !std::filesystem::exists(log)) continue;
            std::ifstream f(log, std::ios::binary);
            std::stringstream ss;
            ss << f.rdbuf();
            std::shared_ptr<Session> s = Session::restore(ss.str(), entry.path());
            auto id = s->id();
            sessions_.emplace(id, std::move(s));
        }
        counter_ = sessions_.size();
    }

    std::string create(const ItemManifest& manifest, SessionConfig config) {
        std::unique_lock lock(mu_);
        std::string id;
        do {
            Rng rng(derive_seed(seed_, counter_++));
            std::ostringstream o;
            o << 's' << std::hex << (rng() & 0xffffffffffffULL);
            id = o.str();
        } while (sessions_.count(id));
        std::optional<std::filesystem::path> dir;
        if (root_) dir = *root_ / id;
        auto s = std::make_shared<Session>(id, manifest, config, dir);
        sessions_.emplace(id, std::move(s));
        return id;
    }

    std::shared_ptr<Session> get(const std::string& id) const {
        std::shared_lock lock(mu_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) throw NotFoundError("no session '" + id + "'");
        return it->second;
    }

    std::vector<std::string> ids() const {
        std::shared_lock lock(mu_);
        std::vector<std::string> out;
        for (auto& [k, _] : sessions_) out.push_back(k);
        return out;
    }

private:
    std::optional<std::filesystem::path> root_;
    std::uint64_t seed_;
    std::size_t counter_ = 0;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    mutable std::shared_mutex mu_;
};

} // namespace trifeat
