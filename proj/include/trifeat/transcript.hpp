#pragma once

// Append-only event log of a discovery run, serialized as JSON lines with a
// schema version. Unknown event types are skipped on load, which lets the
// session service interleave its own bookkeeping events.

#include <array>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "model.hpp"

namespace trifeat {

inline constexpr int transcript_version = 1;

namespace event {

struct ElicitTriple {
    TripleId items;
    std::optional<std::string> answer;
    // Examples the answerer said share the feature (human sessions).
    std::optional<std::array<ExampleId, 2>> chosen;
};

struct ElicitPair {
    PairId items;
    std::optional<std::string> answer;
    // Example the answerer said carries the feature (human sessions).
    std::optional<ExampleId> chosen;
};

struct ElicitTag {
    ExampleId item;
    std::optional<std::string> answer;
};

struct LabelBatch {
    std::string feature;
    std::string bits;
};

struct Discovery {
    std::string feature;
    std::size_t event_index;
};

struct Termination {
    std::string reason;
};

} // namespace event

using Event = std::variant<event::ElicitTriple, event::ElicitPair, event::ElicitTag, event::LabelBatch,
                           event::Discovery, event::Termination>;

inline bool is_elicitation(const Event& e) {
    return std::holds_alternative<event::ElicitTriple>(e) || std::holds_alternative<event::ElicitPair>(e) ||
           std::holds_alternative<event::ElicitTag>(e);
}

inline nlohmann::json event_to_json(const Event& e) {
    auto opt = [](const std::optional<std::string>& s) { return s ? nlohmann::json(*s) : nlohmann::json(); };
    nlohmann::json j{{"v", transcript_version}};
    std::visit(
        [&](const auto& ev) {
            using T = std::decay_t<decltype(ev)>;
            if constexpr (std::is_same_v<T, event::ElicitTriple>) {
                j["type"] = "elicit_triple";
                j["items"] = ev.items.ids();
                j["answer"] = opt(ev.answer);
                if (ev.chosen) j["chosen"] = *ev.chosen;
            } else if constexpr (std::is_same_v<T, event::ElicitPair>) {
                j["type"] = "elicit_pair";
                j["items"] = ev.items.ids();
                j["answer"] = opt(ev.answer);
                if (ev.chosen) j["chosen"] = *ev.chosen;
            } else if constexpr (std::is_same_v<T, event::ElicitTag>) {
                j["type"] = "elicit_tag";
                j["item"] = ev.item;
                j["answer"] = opt(ev.answer);
            } else if constexpr (std::is_same_v<T, event::LabelBatch>) {
                j["type"] = "label_batch";
                j["feature"] = ev.feature;
                j["bits"] = ev.bits;
            } else if constexpr (std::is_same_v<T, event::Discovery>) {
                j["type"] = "discovery";
                j["feature"] = ev.feature;
                j["event_index"] = ev.event_index;
            } else {
                j["type"] = "termination";
                j["reason"] = ev.reason;
            }
        },
        e);
    return j;
}

// nullopt for event types this schema does not know.
inline std::optional<Event> event_from_json(const nlohmann::json& j) {
    if (j.value("v", 0) != transcript_version) throw ValidationError("unsupported transcript schema version");
    auto answer = [&]() -> std::optional<std::string> {
        if (!j.contains("answer") || j.at("answer").is_null()) return std::nullopt;
        return j.at("answer").get<std::string>();
    };
    const auto type = j.at("type").get<std::string>();
    if (type == "elicit_triple") {
        auto ids = j.at("items").get<std::array<ExampleId, 3>>();
        event::ElicitTriple ev{TripleId(ids[0], ids[1], ids[2]), answer(), std::nullopt};
        if (j.contains("chosen") && !j.at("chosen").is_null()) ev.chosen = j.at("chosen").get<std::array<ExampleId, 2>>();
        return ev;
    }
    if (type == "elicit_pair") {
        auto ids = j.at("items").get<std::array<ExampleId, 2>>();
        event::ElicitPair ev{PairId(ids[0], ids[1]), answer(), std::nullopt};
        if (j.contains("chosen") && !j.at("chosen").is_null()) ev.chosen = j.at("chosen").get<ExampleId>();
        return ev;
    }
    if (type == "elicit_tag") return event::ElicitTag{j.at("item").get<ExampleId>(), answer()};
    if (type == "label_batch") return event::LabelBatch{j.at("feature").get<std::string>(), j.at("bits").get<std::string>()};
    if (type == "discovery") return event::Discovery{j.at("feature").get<std::string>(), j.at("event_index").get<std::size_t>()};
    if (type == "termination") return event::Termination{j.at("reason").get<std::string>()};
    return std::nullopt;
}

class Transcript {
public:
    std::size_t append(Event e) {
        events_.push_back(std::move(e));
        return events_.size() - 1;
    }

    const std::vector<Event>& events() const noexcept { return events_; }
    std::size_t size() const noexcept { return events_.size(); }
    bool empty() const noexcept { return events_.empty(); }

    Transcript prefix(std::size_t k) const {
        Transcript t;
        t.events_.assign(events_.begin(), events_.begin() + static_cast<std::ptrdiff_t>(std::min(k, events_.size())));
        return t;
    }

    std::string to_jsonl() const {
        std::string out;
        for (auto& e : events_) out += event_to_json(e).dump() + "\n";
        return out;
    }

    static Transcript from_jsonl(const std::string& text) {
        Transcript t;
        std::istringstream in(text);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw ValidationError("transcript line " + std::to_string(lineno) + ": " + e.what());
            }
            if (auto ev = event_from_json(j)) t.append(std::move(*ev));
        }
        return t;
    }

private:
    std::vector<Event> events_;
};

// Ordering rules: each Discovery points back at an elicitation that returned
// that feature, and its LabelBatch arrives before the next elicitation.
// Returns human-readable problems; empty when well formed.
inline std::vector<std::string> check_transcript_order(const Transcript& t) {
    std::vector<std::string> problems;
    std::optional<std::string> awaiting_labels;
    const auto& ev = t.events();
    for (std::size_t k = 0; k < ev.size(); ++k) {
        if (is_elicitation(ev[k]) && awaiting_labels) {
            problems.push_back("event " + std::to_string(k) + ": elicitation before labels for '" + *awaiting_labels + "'");
            awaiting_labels.reset();
        }
        if (auto d = std::get_if<event::Discovery>(&ev[k])) {
            bool ok = d->event_index < k && is_elicitation(ev[d->event_index]);
            if (ok) {
                std::visit(
                    [&](const auto& src) {
                        if constexpr (requires { src.answer; }) ok = src.answer == d->feature;
                    },
                    ev[d->event_index]);
            }
            if (!ok) problems.push_back("event " + std::to_string(k) + ": discovery without matching elicitation");
            awaiting_labels = d->feature;
        }
        if (auto b = std::get_if<event::LabelBatch>(&ev[k]); b && awaiting_labels && b->feature == *awaiting_labels)
            awaiting_labels.reset();
    }
    return problems;
}

} // namespace trifeat
