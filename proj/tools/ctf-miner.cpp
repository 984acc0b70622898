// ctf-miner: ingest CTF event exports and run the analyses from the command line.

#include "ctfminer/error.hpp"
#include "ctfminer/ingest.hpp"
#include "ctfminer/pipeline.hpp"
#include "ctfminer/service.hpp"
#include "ctfminer/store.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace ctfminer;
namespace fs = std::filesystem;

namespace {

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidConfig("cannot read " + path);
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& ex) {
        throw InvalidConfig(path + ": " + ex.what());
    }
}

void write_output(const std::string& out, const std::string& text) {
    if (out == "-") {
        std::cout << text << std::flush;
        return;
    }
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    if (!f || !(f << text) || !f.flush()) throw Error("IoError", "cannot write " + out);
}

fs::path data_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (auto v = process_env("CTFMINER_DATA_DIR")) return *v;
    return "data";
}

// Options shared by every query subcommand.
struct QueryFlags {
    std::string data;
    std::string dataset;
    std::string request;
    std::string filter;
    std::string mapping;
    std::string weights;
    std::string out = "-";

    void attach(CLI::App* cmd) {
        cmd->add_option("--data", data, "Data directory (default $CTFMINER_DATA_DIR or ./data)");
        cmd->add_option("--dataset", dataset, "Dataset id")->required();
        cmd->add_option("--request", request, "Request JSON file; other flags override its sections");
        cmd->add_option("--filter", filter, "Filter spec JSON file");
        cmd->add_option("--mapping", mapping, "Activity mapping JSON file");
        cmd->add_option("--out", out, "Output file, - for stdout")->capture_default_str();
    }

    Json base() const {
        Json j = request.empty() ? Json::object() : read_json_file(request);
        if (!j.is_object()) throw InvalidSpec("request file must hold a JSON object");
        if (!filter.empty()) j["filter"] = read_json_file(filter);
        if (!mapping.empty()) j["mapping"] = read_json_file(mapping);
        if (!weights.empty()) {
            Json w = read_json_file(weights);
            // a bare {kind: weight} map is accepted as shorthand
            const bool full = w.is_object() && (w.contains("weights") || w.contains("window_pct") ||
                                                w.contains("step_pct") || w.contains("normalization"));
            Json s = j.contains("sentiment") ? j["sentiment"] : Json::object();
            if (full) {
                s.update(w);
            } else {
                s["weights"] = w;
            }
            j["sentiment"] = s;
        }
        return j;
    }

    std::shared_ptr<const EventLog> load() const { return DatasetStore(data_dir(data)).load(dataset); }
};

void set_sentiment(Json& j, std::optional<double> window, std::optional<double> step) {
    if (!window && !step) return;
    Json s = j.contains("sentiment") ? j["sentiment"] : Json::object();
    if (window) s["window_pct"] = *window;
    if (step) s["step_pct"] = *step;
    j["sentiment"] = s;
}

std::string stats_table(const DatasetRecord& r) {
    std::ostringstream out;
    const auto& s = r.stats;
    out << "dataset: " << r.id << "\n";
    out << "trainees: " << s.trainees << "\n";
    out << "levels: " << r.levels.size() << "\n";
    out << "class   events  activities\n";
    auto row = [&](const char* name, std::size_t events, std::size_t acts) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%-6s %7zu %11zu\n", name, events, acts);
        out << buf;
    };
    row("BASH", s.raw_events.bash, s.distinct_activities.bash);
    row("MSF", s.raw_events.msf, s.distinct_activities.msf);
    row("GAME", s.raw_events.game, s.distinct_activities.game);
    row("total", s.raw_events.total(), s.distinct_activities.total());
    out << "removed: " << r.removed_duplicates << " duplicates, " << r.removed_bursts << " bursts, "
        << r.removed_garbage << " garbage\n";
    return out.str();
}

AnalysisServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("ctf-miner"));
    spdlog::set_pattern("%^%l%$: %v");

    CLI::App app{"Process mining, sentiment metrics and clustering for CTF training logs"};
    app.require_subcommand(1);
    std::function<int()> action;

    // ingest
    std::string in_path, in_adapter = "normalized", in_pre, in_id, in_name, in_data, in_out;
    bool in_partial = false;
    auto* ingest_cmd = app.add_subcommand("ingest", "Parse, preprocess and store an event export");
    ingest_cmd->add_option("path", in_path, "Export file or directory")->required();
    ingest_cmd->add_option("--adapter", in_adapter, "Input adapter (normalized, kypo)")->capture_default_str();
    ingest_cmd->add_option("--preprocess", in_pre, "Preprocess config JSON file");
    ingest_cmd->add_option("--id", in_id, "Dataset id (default: file name stem)");
    ingest_cmd->add_option("--name", in_name, "Display name");
    ingest_cmd->add_option("--data", in_data, "Data directory");
    ingest_cmd->add_option("--report", in_out, "Write ingest result JSON here (- for stdout)");
    ingest_cmd->add_flag("--allow-partial", in_partial, "Keep parsable records when some fail");
    ingest_cmd->callback([&] {
        action = [&] {
            IngestRequest req;
            req.adapter = in_adapter;
            req.id = in_id.empty() ? fs::path(in_path).stem().string() : in_id;
            req.name = in_name;
            req.allow_partial = in_partial;
            if (!in_pre.empty()) req.preprocess = preprocess_config_from_json(read_json_file(in_pre));
            DatasetStore store(data_dir(in_data));
            const auto outcome = store.create(req, read_records(in_path));
            for (const auto& e : outcome.errors) {
                spdlog::warn("{}:{}: skipped: {}", e.origin, e.line, e.reason);
            }
            if (!in_out.empty()) {
                write_output(in_out, render({{"dataset", to_json(outcome.record)},
                                             {"removal", to_json(outcome.removal)}}));
            }
            if (in_out != "-") std::cout << stats_table(outcome.record);
            return 0;
        };
    });

    // list / stats
    std::string ls_data;
    auto* list_cmd = app.add_subcommand("list", "List stored datasets");
    list_cmd->add_option("--data", ls_data, "Data directory");
    list_cmd->callback([&] {
        action = [&] {
            for (const auto& r : DatasetStore(data_dir(ls_data)).list()) std::cout << r.id << "\t" << r.name << "\n";
            return 0;
        };
    });

    QueryFlags stats_flags;
    auto* stats_cmd = app.add_subcommand("stats", "Per-class event and distinct-activity counts");
    stats_flags.attach(stats_cmd);
    stats_cmd->callback([&] {
        action = [&] {
            const auto log = stats_flags.load();
            const auto q = query_from_json(stats_flags.base());
            q.mapping.validate();
            const auto mapped = map_activities(*log, q.mapping);
            write_output(stats_flags.out, render({{"mapping", to_json(q.mapping)}, {"stats", to_json(dataset_stats(mapped))}}));
            return 0;
        };
    });

    // graph
    QueryFlags graph_flags;
    std::string g_mode = "freq", g_stat = "mean", g_format = "json";
    std::optional<double> g_threshold;
    std::vector<std::string> g_highlight;
    auto* graph_cmd = app.add_subcommand("graph", "Mine the process graph");
    graph_flags.attach(graph_cmd);
    graph_cmd->add_option("--mode", g_mode, "freq or perf")->check(CLI::IsMember({"freq", "perf"}))->capture_default_str();
    graph_cmd->add_option("--stat", g_stat, "Performance statistic")
        ->check(CLI::IsMember({"mean", "median", "min", "max"}))
        ->capture_default_str();
    graph_cmd->add_option("--threshold", g_threshold, "Dependency threshold in [0,1]")->check(CLI::Range(0.0, 1.0));
    graph_cmd->add_option("--highlight", g_highlight, "Trainee ids whose paths to mark")->delimiter(',');
    graph_cmd->add_option("--format", g_format, "dot or json")->check(CLI::IsMember({"dot", "json"}))->capture_default_str();
    graph_cmd->callback([&] {
        action = [&] {
            Json j = graph_flags.base();
            const bool flags_given = graph_cmd->count("--mode") || graph_cmd->count("--stat") ||
                                     graph_cmd->count("--threshold") || graph_cmd->count("--highlight");
            if (flags_given || !j.contains("graph")) {
                Json g = j.contains("graph") ? j["graph"] : Json::object();
                g["mode"] = g_mode == "perf" ? "performance" : "frequency";
                if (g_mode == "perf") {
                    g["stat"] = g_stat;
                } else {
                    g.erase("stat");
                }
                if (g_threshold) g["dependency_threshold"] = *g_threshold;
                if (!g_highlight.empty()) g["highlight_trainees"] = g_highlight;
                j["graph"] = g;
            }
            const auto q = query_from_json(j);
            const auto log = graph_flags.load();
            if (g_format == "dot") {
                const auto dot = graph_dot(*log, q);
                if (dot == "digraph process {\n}\n") spdlog::warn("the filter left no events; the graph is empty");
                write_output(graph_flags.out, dot);
                return 0;
            }
            const auto result = graph_query(*log, q);
            for (const auto& w : result.at("warnings")) spdlog::warn("{}", w.get<std::string>());
            write_output(graph_flags.out, render(result));
            return 0;
        };
    });

    // sentiment
    QueryFlags sent_flags;
    std::optional<double> s_window, s_step;
    auto* sent_cmd = app.add_subcommand("sentiment", "Sliding-window sentiment series");
    sent_flags.attach(sent_cmd);
    sent_cmd->add_option("--weights", sent_flags.weights, "Sentiment config or weight map JSON file");
    sent_cmd->add_option("--window", s_window, "Window size, percent of the level")->check(CLI::Range(0.0, 100.0));
    sent_cmd->add_option("--step", s_step, "Window step, percent of the level")->check(CLI::Range(0.0, 100.0));
    sent_cmd->callback([&] {
        action = [&] {
            Json j = sent_flags.base();
            set_sentiment(j, s_window, s_step);
            write_output(sent_flags.out, render(sentiment_query(*sent_flags.load(), query_from_json(j))));
            return 0;
        };
    });

    // cluster / elbow
    QueryFlags cl_flags;
    std::optional<int> c_k, c_restarts, c_iter;
    std::optional<std::uint64_t> c_seed;
    std::optional<std::string> c_features;
    std::optional<double> c_window, c_step;
    auto clustering_flags = [&](CLI::App* cmd, QueryFlags& flags) {
        flags.attach(cmd);
        cmd->add_option("--weights", flags.weights, "Sentiment config or weight map JSON file");
        cmd->add_option("--window", c_window, "Window size, percent of the level")->check(CLI::Range(0.0, 100.0));
        cmd->add_option("--step", c_step, "Window step, percent of the level")->check(CLI::Range(0.0, 100.0));
        cmd->add_option("--seed", c_seed, "k-means seed");
        cmd->add_option("--restarts", c_restarts, "k-means restarts")->check(CLI::PositiveNumber);
        cmd->add_option("--max-iter", c_iter, "Lloyd iteration cap")->check(CLI::PositiveNumber);
        cmd->add_option("--features", c_features, "series or level_aggregates")
            ->check(CLI::IsMember({"series", "level_aggregates"}));
    };
    auto clustering_json = [&](QueryFlags& flags) {
        Json j = flags.base();
        set_sentiment(j, c_window, c_step);
        Json c = j.contains("clustering") ? j["clustering"] : Json::object();
        if (c_k) c["k"] = *c_k;
        if (c_seed) c["seed"] = *c_seed;
        if (c_restarts) c["restarts"] = *c_restarts;
        if (c_iter) c["max_iter"] = *c_iter;
        if (c_features) c["feature_space"] = *c_features;
        j["clustering"] = c;
        return j;
    };
    auto* cluster_cmd = app.add_subcommand("cluster", "k-means clustering of sentiment series");
    clustering_flags(cluster_cmd, cl_flags);
    cluster_cmd->add_option("--k", c_k, "Number of clusters")->check(CLI::Range(1, 1000000));
    cluster_cmd->callback([&] {
        action = [&] {
            write_output(cl_flags.out, render(clusters_query(*cl_flags.load(), query_from_json(clustering_json(cl_flags)))));
            return 0;
        };
    });

    QueryFlags el_flags;
    std::optional<int> e_kmax;
    auto* elbow_cmd = app.add_subcommand("elbow", "WCSS for k = 1..kmax and the suggested k");
    clustering_flags(elbow_cmd, el_flags);
    elbow_cmd->add_option("--kmax", e_kmax, "Largest k")->check(CLI::Range(1, 1000000));
    elbow_cmd->callback([&] {
        action = [&] {
            Json j = clustering_json(el_flags);
            if (e_kmax) j["k_max"] = *e_kmax;
            write_output(el_flags.out, render(elbow_query(*el_flags.load(), query_from_json(j))));
            return 0;
        };
    });

    // matrix
    QueryFlags mx_flags;
    auto* matrix_cmd = app.add_subcommand("matrix", "Trainee x activity matrix");
    mx_flags.attach(matrix_cmd);
    matrix_cmd->callback([&] {
        action = [&] {
            write_output(mx_flags.out, render(matrix_query(*mx_flags.load(), query_from_json(mx_flags.base()))));
            return 0;
        };
    });

    // proximity
    QueryFlags px_flags;
    std::optional<std::size_t> p_window;
    std::optional<std::string> p_center;
    std::optional<long long> p_span;
    std::vector<std::string> p_trainees;
    auto* prox_cmd = app.add_subcommand("proximity", "Activities near a time or inside a sentiment window");
    px_flags.attach(prox_cmd);
    prox_cmd->add_option("--weights", px_flags.weights, "Sentiment config (window geometry) JSON file");
    auto* wopt = prox_cmd->add_option("--window", p_window, "Global sliding-window index");
    auto* copt = prox_cmd->add_option("--center", p_center, "ISO-8601 instant");
    prox_cmd->add_option("--span-ms", p_span, "Span around the center, ms")->check(CLI::PositiveNumber);
    prox_cmd->add_option("--trainees", p_trainees, "Selected trainee ids")->delimiter(',');
    wopt->excludes(copt);
    prox_cmd->callback([&] {
        action = [&] {
            Json j = px_flags.base();
            Json p = j.contains("proximity") ? j["proximity"] : Json::object();
            if (p_window) p["window"] = *p_window;
            if (p_center) p["center"] = *p_center;
            if (p_span) p["span_ms"] = *p_span;
            if (!p_trainees.empty()) p["trainees"] = p_trainees;
            j["proximity"] = p;
            write_output(px_flags.out, render(proximity_query(*px_flags.load(), query_from_json(j))));
            return 0;
        };
    });

    // overview
    QueryFlags ov_flags;
    std::vector<std::string> o_metrics;
    auto* ov_cmd = app.add_subcommand("overview", "Per-level statistical overview");
    ov_flags.attach(ov_cmd);
    ov_cmd->add_option("--weights", ov_flags.weights, "Sentiment config or weight map JSON file");
    ov_cmd->add_option("--metrics", o_metrics, "command_count,relative_time,sentiment")
        ->delimiter(',')
        ->check(CLI::IsMember({"command_count", "relative_time", "sentiment"}));
    ov_cmd->callback([&] {
        action = [&] {
            Json j = ov_flags.base();
            if (!o_metrics.empty()) j["metrics"] = o_metrics;
            write_output(ov_flags.out, render(overview_query(*ov_flags.load(), query_from_json(j))));
            return 0;
        };
    });

    // validate
    QueryFlags va_flags;
    auto* va_cmd = app.add_subcommand("validate", "Check a filter spec against a dataset");
    va_flags.attach(va_cmd);
    va_cmd->callback([&] {
        action = [&] {
            const auto result = validate_query(*va_flags.load(), query_from_json(va_flags.base()));
            write_output(va_flags.out, render(result));
            for (const auto& w : result.at("report").at("warnings")) spdlog::warn("{}", w.get<std::string>());
            for (const auto& e : result.at("report").at("errors")) spdlog::error("{}", e.get<std::string>());
            return result.at("report").at("errors").empty() ? 0 : 1;
        };
    });

    // serve
    std::optional<int> sv_port;
    std::string sv_data, sv_config, sv_host, sv_level;
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP analysis service");
    serve_cmd->add_option("--port", sv_port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
    serve_cmd->add_option("--host", sv_host, "Bind address");
    serve_cmd->add_option("--data", sv_data, "Data directory");
    serve_cmd->add_option("--config", sv_config, "Service config JSON file");
    serve_cmd->add_option("--log-level", sv_level, "trace, debug, info, warn, error");
    serve_cmd->callback([&] {
        action = [&] {
            auto cfg = load_service_config(sv_config.empty() ? std::nullopt : std::optional<fs::path>(sv_config));
            if (sv_port) cfg.port = *sv_port;
            if (!sv_host.empty()) cfg.host = sv_host;
            if (!sv_data.empty()) cfg.data_dir = sv_data;
            if (!sv_level.empty()) cfg.log_level = sv_level;
            spdlog::set_level(spdlog::level::from_str(cfg.log_level));
            AnalysisServer server(cfg);
            const int port = server.bind();
            if (port < 0) throw Error("IoError", "cannot bind " + cfg.host + ":" + std::to_string(cfg.port));
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            spdlog::info("listening on {}:{} (data: {})", cfg.host, port, cfg.data_dir.string());
            std::cout << "port " << port << std::endl;
            server.serve();
            g_server = nullptr;
            return 0;
        };
    });

    CLI11_PARSE(app, argc, argv);
    try {
        return action ? action() : 0;
    } catch (const ParseFailure& e) {
        spdlog::error("{}: {}", e.code(), e.what());
        for (const auto& d : e.details()) spdlog::error("  {}", d);
        return 1;
    } catch (const Error& e) {
        spdlog::error("{}: {}", e.code(), e.what());
        return 1;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
}
