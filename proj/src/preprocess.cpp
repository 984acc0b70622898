#include "ctfminer/preprocess.hpp"

#include "ctfminer/error.hpp"

#include <map>
#include <regex>
#include <set>
#include <tuple>

namespace ctfminer {

std::vector<std::string> PreprocessConfig::default_command_vocabulary() {
    return {
        // shell
        "apt", "awk", "base64", "bash", "cat", "cd", "chmod", "chown", "clear", "cp", "curl", "cut",
        "dig", "echo", "env", "exit", "export", "file", "find", "ftp", "grep", "gzip", "head", "history",
        "host", "hydra", "id", "ifconfig", "ip", "john", "kill", "less", "ln", "locate", "ls", "man",
        "mkdir", "more", "msfconsole", "mv", "nano", "nc", "netcat", "netstat", "nikto", "nmap",
        "nslookup", "openssl", "passwd", "perl", "ping", "ps", "pwd", "python", "python2", "python3",
        "rm", "rmdir", "scp", "searchsploit", "sed", "sftp", "sh", "sort", "ss", "ssh", "ssh-keygen",
        "ssh2john", "su", "sudo", "tail", "tar", "telnet", "top", "touch", "traceroute", "uname",
        "uniq", "unzip", "vi", "vim", "wc", "wget", "whoami", "xxd", "zip",
        // metasploit console
        "back", "check", "db_nmap", "exploit", "help", "info", "options", "run", "search", "sessions",
        "set", "setg", "show", "unset", "use",
    };
}

void PreprocessConfig::validate() const {
    if (dedup_window.count() <= 0) throw InvalidConfig("dedup_window_ms must be > 0");
    if (burst_window.count() <= 0) throw InvalidConfig("burst_window_ms must be > 0");
    if (burst_count_threshold < 2) throw InvalidConfig("burst_count_threshold must be >= 2");
    for (const auto& p : garbage_patterns) {
        try {
            std::regex re(p);
        } catch (const std::regex_error& ex) {
            throw InvalidConfig("garbage pattern '" + p + "' does not compile: " + ex.what());
        }
    }
}

Json to_json(const PreprocessConfig& cfg) {
    return {
        {"dedup_window_ms", cfg.dedup_window.count()},
        {"burst_count_threshold", cfg.burst_count_threshold},
        {"burst_window_ms", cfg.burst_window.count()},
        {"garbage_patterns", cfg.garbage_patterns},
        {"command_vocabulary", cfg.command_vocabulary},
    };
}

PreprocessConfig preprocess_config_from_json(const Json& j) {
    if (j.is_null()) return {};
    if (!j.is_object()) throw InvalidConfig("preprocess config must be a JSON object");
    PreprocessConfig cfg;
    try {
        if (j.contains("dedup_window_ms")) cfg.dedup_window = Millis{j.at("dedup_window_ms").get<std::int64_t>()};
        if (j.contains("burst_count_threshold")) cfg.burst_count_threshold = j.at("burst_count_threshold").get<int>();
        if (j.contains("burst_window_ms")) cfg.burst_window = Millis{j.at("burst_window_ms").get<std::int64_t>()};
        if (j.contains("garbage_patterns")) cfg.garbage_patterns = j.at("garbage_patterns").get<std::vector<std::string>>();
        if (j.contains("command_vocabulary")) cfg.command_vocabulary = j.at("command_vocabulary").get<std::vector<std::string>>();
    } catch (const Json::exception& ex) {
        throw InvalidConfig(std::string("preprocess config: ") + ex.what());
    }
    cfg.validate();
    return cfg;
}

Json to_json(const RemovalReport& report) {
    Json removed = Json::array();
    for (const auto& r : report.removed) {
        static constexpr const char* names[] = {"duplicate", "burst", "garbage"};
        removed.push_back({{"category", names[static_cast<int>(r.category)]},
                           {"trainee_id", r.event.trainee_id},
                           {"timestamp", format_timestamp(r.event.timestamp)},
                           {"content", r.event.content}});
    }
    return {{"duplicates", report.duplicates},
            {"bursts", report.bursts},
            {"garbage", report.garbage},
            {"total", report.total()},
            {"removed", std::move(removed)}};
}

namespace {

std::string command_word(const std::string& normalized) {
    std::string first = normalized.substr(0, normalized.find(' '));
    if (auto slash = first.rfind('/'); slash != std::string::npos && slash + 1 < first.size()) {
        first = first.substr(slash + 1);
    }
    return first;
}

}  // namespace

std::pair<EventLog, RemovalReport> preprocess(const EventLog& log, const PreprocessConfig& cfg) {
    cfg.validate();
    const auto& events = log.events();
    const std::size_t n = events.size();
    std::vector<bool> keep(n, true);
    std::vector<RemovalCategory> why(n, RemovalCategory::Garbage);
    std::vector<std::string> normalized(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (is_command(events[i].event_class)) normalized[i] = normalize_command(events[i].content);
    }

    std::vector<std::regex> garbage;
    for (const auto& p : cfg.garbage_patterns) garbage.emplace_back(p);
    for (std::size_t i = 0; i < n; ++i) {
        if (!is_command(events[i].event_class)) continue;
        for (const auto& re : garbage) {
            if (std::regex_search(normalized[i], re)) {
                keep[i] = false;
                why[i] = RemovalCategory::Garbage;
                break;
            }
        }
    }

    // duplicates: compare with the last kept copy of the same key
    std::map<std::tuple<std::string, EventClass, std::string>, Timestamp> last_kept;
    for (std::size_t i = 0; i < n; ++i) {
        if (!keep[i] || !is_command(events[i].event_class)) continue;
        auto key = std::make_tuple(events[i].trainee_id, events[i].event_class, normalized[i]);
        auto it = last_kept.find(key);
        if (it != last_kept.end() && events[i].timestamp - it->second <= cfg.dedup_window) {
            keep[i] = false;
            why[i] = RemovalCategory::Duplicate;
            continue;
        }
        last_kept[key] = events[i].timestamp;
    }

    // paste bursts, per trainee over the surviving command stream
    const std::set<std::string> vocabulary(cfg.command_vocabulary.begin(), cfg.command_vocabulary.end());
    std::map<std::string, std::vector<std::size_t>> streams;
    for (std::size_t i = 0; i < n; ++i) {
        if (keep[i] && is_command(events[i].event_class)) streams[events[i].trainee_id].push_back(i);
    }
    const auto threshold = static_cast<std::size_t>(cfg.burst_count_threshold);
    for (const auto& [_, stream] : streams) {
        std::vector<std::size_t> run;
        auto flush = [&] {
            if (run.size() >= threshold) {
                for (auto idx : run) {
                    keep[idx] = false;
                    why[idx] = RemovalCategory::Burst;
                }
            }
            run.clear();
        };
        for (auto idx : stream) {
            if (vocabulary.contains(command_word(normalized[idx]))) {
                flush();
                continue;
            }
            if (!run.empty() && events[idx].timestamp - events[run.back()].timestamp > cfg.burst_window) flush();
            run.push_back(idx);
        }
        flush();
    }

    RemovalReport report;
    std::vector<Event> kept;
    kept.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (keep[i]) {
            kept.push_back(events[i]);
            continue;
        }
        switch (why[i]) {
            case RemovalCategory::Duplicate: ++report.duplicates; break;
            case RemovalCategory::Burst: ++report.bursts; break;
            case RemovalCategory::Garbage: ++report.garbage; break;
        }
        report.removed.push_back({events[i], why[i]});
    }
    return {EventLog::build(log.dataset_id(), std::move(kept), log.levels()), std::move(report)};
}

}  // namespace ctfminer
