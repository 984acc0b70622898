#include "ctfminer/service.hpp"

#include "ctfminer/error.hpp"
#include "ctfminer/pipeline.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>

namespace ctfminer {

std::optional<std::string> process_env(const std::string& name) {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
}

namespace {

int parse_port(const std::string& text) {
    try {
        std::size_t used = 0;
        const int p = std::stoi(text, &used);
        if (used == text.size() && p >= 0 && p <= 65535) return p;
    } catch (const std::exception&) {
    }
    throw InvalidConfig("invalid port '" + text + "'");
}

void check_log_level(const std::string& level) {
    if (spdlog::level::from_str(level) == spdlog::level::off && level != "off") {
        throw InvalidConfig("unknown log level '" + level + "'");
    }
}

}  // namespace

ServiceConfig load_service_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env) {
    ServiceConfig cfg;
    if (file) {
        std::ifstream in(*file);
        if (!in) throw InvalidConfig("cannot read config file " + file->string());
        Json j;
        try {
            j = Json::parse(in);
            for (const auto& [key, _] : j.items()) {
                if (key != "host" && key != "port" && key != "data_dir" && key != "log_level") {
                    throw InvalidConfig("unknown config key '" + key + "'");
                }
            }
            cfg.host = j.value("host", cfg.host);
            cfg.port = j.value("port", cfg.port);
            cfg.data_dir = j.value("data_dir", cfg.data_dir.string());
            cfg.log_level = j.value("log_level", cfg.log_level);
        } catch (const Json::exception& ex) {
            throw InvalidConfig("config file " + file->string() + ": " + ex.what());
        }
    }
    if (auto v = env("CTFMINER_HOST")) cfg.host = *v;
    if (auto v = env("CTFMINER_PORT")) cfg.port = parse_port(*v);
    if (auto v = env("CTFMINER_DATA_DIR")) cfg.data_dir = *v;
    if (auto v = env("CTFMINER_LOG_LEVEL")) cfg.log_level = *v;
    if (cfg.port < 0 || cfg.port > 65535) throw InvalidConfig("port out of range");
    check_log_level(cfg.log_level);
    return cfg;
}

int http_status(const std::string& code) {
    if (code == "UnknownDataset") return 404;
    if (code == "DuplicateId") return 409;
    if (code == "ParseError" || code == "UnknownAdapter" || code == "EmptyDataset" || code == "InvalidEvent" ||
        code == "BadRequest") {
        return 400;
    }
    if (code == "InvalidSpec" || code == "InvalidConfig" || code == "TemplateError" || code == "UnknownTrainee" ||
        code == "MissingClusters" || code == "KTooLarge" || code == "EmptyInput" || code == "LengthMismatch") {
        return 422;
    }
    return 500;
}

Json error_body(const std::string& code, const std::string& message, const Json& details) {
    return {{"code", code}, {"message", message}, {"details", details}};
}

struct AnalysisServer::Impl {
    ServiceConfig cfg;
    DatasetStore store;
    httplib::Server server;

    explicit Impl(ServiceConfig c) : cfg(std::move(c)), store(cfg.data_dir) { routes(); }

    static void send_json(httplib::Response& res, int status, const Json& body) {
        res.status = status;
        res.set_content(render(body), "application/json");
    }

    static void send_error(httplib::Response& res, const std::string& code, const std::string& message,
                           const Json& details = Json::array()) {
        send_json(res, http_status(code), error_body(code, message, details));
    }

    // Runs a handler, turning library exceptions into {code, message, details}.
    template <typename F>
    static void guarded(httplib::Response& res, F&& f) {
        try {
            f();
        } catch (const ParseFailure& e) {
            send_error(res, e.code(), e.what(), Json(e.details()));
        } catch (const Error& e) {
            send_error(res, e.code(), e.what());
        } catch (const Json::parse_error& e) {
            send_error(res, "BadRequest", std::string("request body is not valid JSON: ") + e.what());
        } catch (const std::exception& e) {
            spdlog::error("internal error: {}", e.what());
            send_error(res, "InternalError", e.what());
        }
    }

    static Json body_json(const httplib::Request& req) {
        if (req.body.find_first_not_of(" \t\r\n") == std::string::npos) return Json();
        return Json::parse(req.body);
    }

    void query_route(const char* name, Json (*fn)(const EventLog&, const QueryRequest&)) {
        const std::string pattern = std::string(R"(/datasets/([^/]+)/)") + name;
        server.Post(pattern, [this, fn](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto log = store.load(req.matches[1]);
                const auto q = query_from_json(body_json(req));
                send_json(res, 200, fn(*log, q));
            });
        });
    }

    void routes() {
        server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
        server.set_logger([](const httplib::Request& req, const httplib::Response& res) {
            spdlog::info("{} {} -> {}", req.method, req.path, res.status);
        });
        server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
            res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
            res.status = 204;
        });

        server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, {{"status", "ok"}});
        });

        server.Post("/datasets", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { ingest(req, res); });
        });

        server.Get("/datasets", [this](const httplib::Request&, httplib::Response& res) {
            guarded(res, [&] {
                Json list = Json::array();
                for (const auto& r : store.list()) list.push_back(to_json(r));
                send_json(res, 200, {{"datasets", list}});
            });
        });

        server.Get(R"(/datasets/([^/]+)/summary)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { send_json(res, 200, {{"dataset", to_json(store.record(req.matches[1]))}}); });
        });

        server.Get(R"(/datasets/([^/]+)/export/dot)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto log = store.load(req.matches[1]);
                Json graph = Json::object();
                if (req.has_param("mode")) graph["mode"] = req.get_param_value("mode");
                if (req.has_param("stat")) graph["stat"] = req.get_param_value("stat");
                if (req.has_param("threshold")) {
                    try {
                        graph["dependency_threshold"] = std::stod(req.get_param_value("threshold"));
                    } catch (const std::exception&) {
                        throw InvalidSpec("threshold must be a number");
                    }
                }
                const auto q = query_from_json({{"graph", graph}});
                res.status = 200;
                res.set_content(graph_dot(*log, q), "text/vnd.graphviz");
            });
        });

        server.Delete(R"(/datasets/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const std::string id = req.matches[1];
                store.remove(id);
                send_json(res, 200, {{"deleted", id}});
            });
        });

        query_route("graph", graph_query);
        query_route("sentiment", sentiment_query);
        query_route("clusters", clusters_query);
        query_route("elbow", elbow_query);
        query_route("matrix", matrix_query);
        query_route("proximity", proximity_query);
        query_route("overview", overview_query);
        query_route("validate", validate_query);
    }

    void ingest(const httplib::Request& req, httplib::Response& res) {
        if (!req.is_multipart_form_data() || !req.has_file("file")) {
            throw Error("BadRequest", "expected a multipart upload with a 'file' part");
        }
        const auto file = req.get_file_value("file");
        auto field = [&](const char* name) -> std::optional<std::string> {
            if (!req.has_file(name)) return std::nullopt;
            return req.get_file_value(name).content;
        };
        IngestRequest ir;
        ir.adapter = field("adapter").value_or("normalized");
        ir.id = field("id").value_or(std::filesystem::path(file.filename).stem().string());
        ir.name = field("name").value_or(ir.id);
        if (auto p = field("preprocess")) ir.preprocess = preprocess_config_from_json(Json::parse(*p));
        if (auto p = field("allow_partial")) ir.allow_partial = *p == "true" || *p == "1";

        const auto records = split_records(file.content, file.filename);
        const auto outcome = store.create(ir, records);
        Json errors = Json::array();
        for (const auto& e : outcome.errors) {
            errors.push_back({{"line", e.line}, {"origin", e.origin}, {"reason", e.reason}});
        }
        spdlog::info("ingested dataset '{}' ({} events)", ir.id, outcome.record.stats.raw_events.total());
        send_json(res, 201, {{"dataset", to_json(outcome.record)}, {"parse_errors", errors}});
    }
};

AnalysisServer::AnalysisServer(ServiceConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}
AnalysisServer::~AnalysisServer() = default;

int AnalysisServer::bind() {
    if (impl_->cfg.port == 0) return impl_->server.bind_to_any_port(impl_->cfg.host);
    return impl_->server.bind_to_port(impl_->cfg.host, impl_->cfg.port) ? impl_->cfg.port : -1;
}

bool AnalysisServer::serve() { return impl_->server.listen_after_bind(); }
void AnalysisServer::stop() { impl_->server.stop(); }
void AnalysisServer::wait_until_ready() const { impl_->server.wait_until_ready(); }
DatasetStore& AnalysisServer::store() { return impl_->store; }

}  // namespace ctfminer
