// trifeat command line: generate, bounds, run, reproduce, serve, replay.
// Exit status: 0 pass, 1 fail, 2 configuration error.

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "trifeat/lab.hpp"
#include "trifeat/server.hpp"

namespace {

using namespace trifeat;

constexpr int exit_pass = 0;
constexpr int exit_fail = 1;
constexpr int exit_config = 2;

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot read '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

nlohmann::json read_json(const std::string& path) {
    try {
        return nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
}

void emit(const std::string& text, const std::string& out) {
    if (out.empty() || out == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(out, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + out + "'");
    f << text;
}

SessionServer* active_server = nullptr;

void on_signal(int) {
    if (active_server) active_server->stop();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Feature discovery from two-out-of-three queries"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    std::string out;
    unsigned workers = 1;
    std::optional<std::size_t> trials;

    // generate
    auto* gen = app.add_subcommand("generate", "Emit a ground-truth model as JSON");
    std::string gen_model_file, gen_kind = "proper-binary";
    int gen_m = 8, gen_d = 2, gen_l = 2, gen_r = 2;
    std::optional<int> gen_leaves;
    std::size_t gen_n = 0;
    double gen_p = 0.5;
    gen->add_option("--model", gen_model_file, "Model spec JSON file (overrides the flags)");
    gen->add_option("--kind", gen_kind, "Model kind")->check(CLI::IsMember(model_kinds()));
    gen->add_option("--m", gen_m, "Feature count (trees)");
    gen->add_option("--d", gen_d, "Branching bound D");
    gen->add_option("--leaf-budget", gen_leaves, "Leaf budget (d-ary-leafy)");
    gen->add_option("--n", gen_n, "Example count (independent)");
    gen->add_option("--p", gen_p, "Feature frequency (independent, one block of m)");
    gen->add_option("--l", gen_l, "Left set size (lr-counterexample)");
    gen->add_option("--r", gen_r, "Right set size (lr-counterexample)");
    gen->add_option("--seed", seed, "Seed");
    gen->add_option("--out", out, "Output file (default stdout)");

    // bounds
    auto* bounds = app.add_subcommand("bounds", "Emit closed-form bound values");
    std::optional<int> b_m;
    int b_d = 2;
    double b_delta = 0.1;
    std::optional<double> b_p;
    std::string b_spec;
    bounds->add_option("--m", b_m, "Feature count");
    bounds->add_option("--d", b_d, "Branching bound D");
    bounds->add_option("--delta", b_delta, "Failure probability");
    bounds->add_option("--p", b_p, "Uniform feature frequency (independent model with m features)");
    bounds->add_option("--spec", b_spec, "JSON file with {blocks:[{count,p}...]}");
    bounds->add_option("--out", out, "Output file (default stdout)");

    // run
    auto* run = app.add_subcommand("run", "Run an experiment config");
    std::string config_file;
    std::optional<std::uint64_t> run_seed;
    run->add_option("config", config_file, "Experiment config JSON")->required();
    run->add_option("--seed", run_seed, "Override master seed");
    run->add_option("--trials", trials, "Override trial count");
    run->add_option("--workers", workers, "Worker threads");
    run->add_option("--out", out, "Output CSV path; a .json twin is written beside it");

    // reproduce
    auto* rep = app.add_subcommand("reproduce", "Run a named reproduction suite");
    std::string suite;
    double scale = 1.0;
    std::uint64_t rep_seed = SuiteOptions{}.seed;
    unsigned rep_workers = default_workers();
    rep->add_option("suite", suite, "Suite name")->required();
    rep->add_option("--seed", rep_seed, "Master seed");
    rep->add_option("--workers", rep_workers, "Worker threads");
    rep->add_option("--scale", scale, "Scale factor applied to the declared trial counts");
    rep->add_option("--out", out, "Directory for evidence CSVs");

    // serve
    auto* serve = app.add_subcommand("serve", "Start the session service");
    std::string host = "127.0.0.1", data_dir;
    int port = 8080;
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port");
    serve->add_option("--data", data_dir, "Session directory (persistence off when empty)");
    serve->add_option("--seed", seed, "Seed for session ids");

    // replay
    auto* rp = app.add_subcommand("replay", "Replay a transcript and print the recovered state");
    std::string transcript_file, truth_file;
    rp->add_option("transcript", transcript_file, "Transcript JSONL")->required();
    rp->add_option("--truth", truth_file, "Ground-truth matrix JSON to check answers against");
    rp->add_option("--out", out, "Output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? exit_pass : exit_config;
    }

    try {
        if (*gen) {
            ModelSpec m;
            if (!gen_model_file.empty()) {
                m = model_spec_from_json(read_json(gen_model_file));
            } else {
                m.kind = gen_kind;
                m.m = gen_m;
                m.d = gen_d;
                m.leaf_budget = gen_leaves;
                m.n = gen_n;
                m.l = gen_l;
                m.r = gen_r;
                if (m.kind == "independent" || m.kind == "fresh" || m.kind == "tree-plus-independent")
                    m.blocks = {{gen_m, gen_p}};
            }
            ExperimentConfig probe;
            probe.model = m;
            probe.algorithm.name = "adaptive-triple";
            probe.validate();
            emit(generate_model_json(m, seed).dump(2) + "\n", out);
            return exit_pass;
        }
        if (*bounds) {
            BoundInputs in;
            in.m = b_m;
            in.d = b_d;
            in.delta = b_delta;
            if (!b_spec.empty()) {
                auto j = read_json(b_spec);
                std::vector<FeatureBlock> blocks;
                for (auto& b : j.at("blocks")) blocks.push_back({b.at("count").get<int>(), b.at("p").get<double>()});
                in.spec = IndependentSpec(blocks);
            } else if (b_p) {
                if (!b_m) throw ConfigError("--p needs --m");
                in.spec = IndependentSpec::uniform(*b_m, *b_p);
            }
            emit(bound_table_to_json(compute_bounds(in)).dump(2) + "\n", out);
            return exit_pass;
        }
        if (*run) {
            auto j = read_json(config_file);
            if (run_seed) j["seed"] = *run_seed;
            if (trials) j["trials"] = *trials;
            if (run->count("--workers")) j["workers"] = workers;
            if (!out.empty()) j["out"] = out;
            auto cfg = experiment_config_from_json(j);
            auto res = run_experiment(cfg);
            if (cfg.out) {
                std::filesystem::path p(*cfg.out);
                emit(experiment_csv(res), p.string());
                auto jp = p;
                jp.replace_extension(".json");
                emit(experiment_json(res).dump(2) + "\n", jp.string());
            } else {
                std::cout << experiment_csv(res);
            }
            return exit_pass;
        }
        if (*rep) {
            SuiteOptions o;
            o.seed = rep_seed;
            o.workers = rep_workers;
            if (!(scale > 0.0)) throw ConfigError("--scale must be positive");
            o.scale = scale;
            auto r = reproduce(suite, o);
            for (auto& c : r.checks) {
                std::cout << (c.pass ? "PASS " : "FAIL ") << r.name << ": " << c.description;
                if (!c.evidence.empty()) std::cout << " [" << c.evidence << "]";
                std::cout << '\n';
            }
            if (!out.empty()) write_evidence(r, out);
            std::cout << (r.pass() ? "PASS " : "FAIL ") << r.name << '\n';
            return r.pass() ? exit_pass : exit_fail;
        }
        if (*serve) {
            std::optional<std::filesystem::path> dir;
            if (!data_dir.empty()) dir = data_dir;
            SessionManager manager(dir, seed);
            SessionServer server(manager, SessionServer::token_from_env());
            active_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "listening on " << host << ':' << port << '\n';
            if (!server.listen(host, port)) {
                std::cerr << "cannot bind " << host << ':' << port << '\n';
                return exit_config;
            }
            return exit_pass;
        }
        if (*rp) {
            auto t = Transcript::from_jsonl(read_file(transcript_file));
            std::optional<GroundTruth> truth;
            if (!truth_file.empty()) truth = GroundTruth::from_matrix(matrix_from_json(read_json(truth_file)));
            try {
                auto r = replay(t, truth ? &*truth : nullptr);
                emit(run_result_to_json(r).dump(2) + "\n", out);
            } catch (const ReplayError& e) {
                std::cerr << "replay failed: " << e.what() << '\n';
                return exit_fail;
            }
            return exit_pass;
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return exit_config;
    } catch (const InvalidParameter& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return exit_config;
    } catch (const ValidationError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_fail;
    }
    return exit_pass;
}
