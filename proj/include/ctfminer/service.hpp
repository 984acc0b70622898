#pragma once

#include "ctfminer/canonical_json.hpp"
#include "ctfminer/store.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

namespace ctfminer {

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path data_dir = "data";
    std::string log_level = "info";
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Process environment lookup.
std::optional<std::string> process_env(const std::string& name);

/// Defaults, then the JSON file (keys host, port, data_dir, log_level), then
/// CTFMINER_HOST / CTFMINER_PORT / CTFMINER_DATA_DIR / CTFMINER_LOG_LEVEL.
/// Command-line flags are applied by the caller on top. Throws InvalidConfig.
ServiceConfig load_service_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env = process_env);

/// HTTP status for a library error code.
int http_status(const std::string& code);
Json error_body(const std::string& code, const std::string& message, const Json& details = Json::array());

class AnalysisServer {
public:
    explicit AnalysisServer(ServiceConfig cfg);
    ~AnalysisServer();

    AnalysisServer(const AnalysisServer&) = delete;
    AnalysisServer& operator=(const AnalysisServer&) = delete;

    /// Binds host:port (port 0 picks a free one) and returns the bound port, or -1.
    int bind();
    /// Blocks serving requests until stop().
    bool serve();
    void stop();
    /// Blocks until the listener accepts connections.
    void wait_until_ready() const;

    DatasetStore& store();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace ctfminer
