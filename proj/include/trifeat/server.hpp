#pragma once

// HTTP+JSON front end for SessionManager.
//
//   POST /sessions                      {manifest, config} -> {id}
//   GET  /sessions/{id}/task            -> task
//   POST /sessions/{id}/elicitation     {task_id, feature_name, chosen:[a,b]|null}
//   POST /sessions/{id}/labels          {task_id, voter, bits}
//   GET  /sessions/{id}/export
//   GET  /sessions/{id}/metrics
//
// 400 validation, 401 bad token, 404 unknown session, 409 conflict.

#include <cstdlib>
#include <optional>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "error.hpp"
#include "session.hpp"

namespace trifeat {

inline constexpr const char* token_env_var = "TRIFEAT_TOKEN";

class SessionServer {
public:
    explicit SessionServer(SessionManager& manager, std::optional<std::string> token = std::nullopt)
        : manager_(manager), token_(std::move(token)) {
        routes();
    }

    // Reads the bearer token from the environment when set and non-empty.
    static std::optional<std::string> token_from_env() {
        const char* t = std::getenv(token_env_var);
        if (!t || !*t) return std::nullopt;
        return std::string(t);
    }

    bool listen(const std::string& host, int port) { return server_.listen(host, port); }
    int bind_any_port(const std::string& host) { return server_.bind_to_any_port(host); }
    bool listen_after_bind() { return server_.listen_after_bind(); }
    void stop() { server_.stop(); }
    void wait_until_ready() { server_.wait_until_ready(); }
    httplib::Server& raw() { return server_; }

private:
    using Req = httplib::Request;
    using Res = httplib::Response;

    static void send(Res& res, int status, const nlohmann::json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    template <typename F>
    auto guarded(F fn) {
        return [this, fn](const Req& req, Res& res) {
            if (token_) {
                auto auth = req.get_header_value("Authorization");
                if (auth != "Bearer " + *token_) return send(res, 401, {{"error", "missing or invalid bearer token"}});
            }
            try {
                fn(req, res);
            } catch (const NotFoundError& e) {
                send(res, 404, {{"error", e.what()}});
            } catch (const ConflictError& e) {
                send(res, 409, {{"error", e.what()}});
            } catch (const ValidationError& e) {
                send(res, 400, {{"error", e.what()}});
            } catch (const InvalidParameter& e) {
                send(res, 400, {{"error", e.what()}});
            } catch (const ConfigError& e) {
                send(res, 400, {{"error", e.what()}});
            } catch (const nlohmann::json::exception& e) {
                send(res, 400, {{"error", std::string("malformed request: ") + e.what()}});
            } catch (const std::exception& e) {
                send(res, 500, {{"error", e.what()}});
            }
        };
    }

    static nlohmann::json body(const Req& req) {
        try {
            return nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(std::string("request body is not JSON: ") + e.what());
        }
    }

    void routes() {
        server_.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                     {"Access-Control-Allow-Headers", "Content-Type, Authorization"},
                                     {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
        server_.Options(R"(.*)", [](const Req&, Res& res) { res.status = 204; });

        server_.Post("/sessions", guarded([this](const Req& req, Res& res) {
            auto j = body(req);
            if (!j.is_object() || !j.contains("manifest")) throw ValidationError("body needs a manifest");
            auto manifest = manifest_from_json(j.at("manifest"));
            auto config = session_config_from_json(j.value("config", nlohmann::json::object()));
            send(res, 201, {{"id", manager_.create(manifest, config)}});
        }));

        server_.Get(R"(/sessions/([^/]+)/task)", guarded([this](const Req& req, Res& res) {
            send(res, 200, manager_.get(req.matches[1])->next_task_json());
        }));

        server_.Post(R"(/sessions/([^/]+)/elicitation)", guarded([this](const Req& req, Res& res) {
            auto s = manager_.get(req.matches[1]);
            auto j = body(req);
            auto task_id = j.at("task_id").get<std::string>();
            std::optional<std::string> name;
            if (j.contains("feature_name") && !j.at("feature_name").is_null()) name = j.at("feature_name").get<std::string>();
            std::optional<std::vector<std::string>> chosen;
            if (j.contains("chosen") && !j.at("chosen").is_null()) chosen = j.at("chosen").get<std::vector<std::string>>();
            s->submit_elicitation(task_id, name, chosen);
            send(res, 200, {{"ok", true}});
        }));

        server_.Post(R"(/sessions/([^/]+)/labels)", guarded([this](const Req& req, Res& res) {
            auto s = manager_.get(req.matches[1]);
            auto j = body(req);
            s->submit_labels(j.at("task_id").get<std::string>(), j.at("voter").get<std::string>(),
                             j.at("bits").get<std::string>());
            send(res, 200, {{"ok", true}});
        }));

        server_.Get(R"(/sessions/([^/]+)/export)", guarded([this](const Req& req, Res& res) {
            send(res, 200, manager_.get(req.matches[1])->export_json());
        }));

        server_.Get(R"(/sessions/([^/]+)/metrics)", guarded([this](const Req& req, Res& res) {
            send(res, 200, manager_.get(req.matches[1])->metrics_json());
        }));
    }

    SessionManager& manager_;
    std::optional<std::string> token_;
    httplib::Server server_;
};

} // namespace trifeat
