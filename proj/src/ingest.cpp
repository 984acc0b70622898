#include "ctfminer/ingest.hpp"

#include "ctfminer/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace ctfminer {

namespace {

std::optional<Timestamp> timestamp_from_json(const Json& v) {
    if (v.is_string()) return parse_timestamp(v.get_ref<const std::string&>());
    if (v.is_number_integer()) return Timestamp{Millis{v.get<std::int64_t>()}};
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (!std::isfinite(d)) return std::nullopt;
        return Timestamp{Millis{static_cast<std::int64_t>(d)}};
    }
    return std::nullopt;
}

std::string string_field(const Json& obj, std::string_view key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return {};
    if (it->is_string()) return it->get<std::string>();
    return it->dump();
}

// Canonical schema: exactly the six normalized fields, game_type only on game events.
class NormalizedAdapter final : public Adapter {
public:
    std::string id() const override { return "normalized"; }

    std::vector<Event> parse(std::span<const SourceRecord> records,
                             std::vector<ParseError>& errors) const override {
        std::vector<Event> out;
        out.reserve(records.size());
        for (const auto& rec : records) {
            try {
                out.push_back(parse_one(rec.text));
            } catch (const std::exception& ex) {
                errors.push_back({rec.line, rec.origin, ex.what()});
            }
        }
        return out;
    }

private:
    static Event parse_one(const std::string& text) {
        const Json j = Json::parse(text);
        if (!j.is_object()) throw std::runtime_error("record is not a JSON object");
        static const std::set<std::string> allowed = {"timestamp", "trainee_id", "level",
                                                      "event_class", "game_type", "content"};
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!allowed.contains(it.key())) throw std::runtime_error("unexpected field '" + it.key() + "'");
        }
        for (const char* key : {"timestamp", "trainee_id", "level", "event_class", "content"}) {
            if (!j.contains(key)) throw std::runtime_error(std::string("missing field '") + key + "'");
        }
        Event e;
        const auto& ts = j.at("timestamp");
        if (!ts.is_string()) throw std::runtime_error("timestamp must be an ISO-8601 string");
        auto parsed = parse_timestamp(ts.get_ref<const std::string&>());
        if (!parsed) throw std::runtime_error("malformed timestamp '" + ts.get<std::string>() + "'");
        e.timestamp = *parsed;
        if (!j.at("trainee_id").is_string()) throw std::runtime_error("trainee_id must be a string");
        e.trainee_id = j.at("trainee_id").get<std::string>();
        if (!j.at("level").is_number_integer()) throw std::runtime_error("level must be an integer");
        e.level = j.at("level").get<int>();
        auto cls = j.at("event_class").is_string()
                       ? parse_event_class(j.at("event_class").get<std::string>())
                       : std::nullopt;
        if (!cls) throw std::runtime_error("event_class must be one of game|bash|msf");
        e.event_class = *cls;
        if (j.contains("game_type")) {
            auto gt = j.at("game_type").is_string() ? parse_game_type(j.at("game_type").get<std::string>())
                                                    : std::nullopt;
            if (!gt) throw std::runtime_error("unknown game_type");
            e.game_type = gt;
        }
        if (!j.at("content").is_string()) throw std::runtime_error("content must be a string");
        e.content = j.at("content").get<std::string>();
        check_event(e);
        return e;
    }
};

struct KypoPending {
    Event event;
    std::optional<long long> source_level;
};

// Public KYPO training exports: JSON lines of bash/msf command records
// ({"timestamp_str", "cmd", "cmd_type", "sandbox_id", ...}) and training
// event records ({"type": "cz.muni.csirt.kypo.events.trainings.X",
// "timestamp", "level", "sandbox_id", ...}). Commands carry no level; they
// inherit the trainee's most recent LevelStarted. Source level ids are
// renumbered 1..n in ascending order.
class KypoAdapter final : public Adapter {
public:
    std::string id() const override { return "kypo"; }

    std::vector<Event> parse(std::span<const SourceRecord> records,
                             std::vector<ParseError>& errors) const override {
        std::vector<KypoPending> pending;
        for (const auto& rec : records) {
            try {
                pending.push_back(parse_one(rec));
            } catch (const std::exception& ex) {
                errors.push_back({rec.line, rec.origin, ex.what()});
            }
        }

        std::set<long long> source_levels;
        for (const auto& p : pending) {
            if (p.source_level) source_levels.insert(*p.source_level);
        }
        std::map<long long, int> ordinal;
        int next = 1;
        for (long long id : source_levels) ordinal[id] = next++;

        // per trainee, levels change at LevelStarted events
        std::map<std::string, std::vector<std::pair<Timestamp, int>>> starts;
        for (const auto& p : pending) {
            if (p.source_level && p.event.game_type == GameType::LevelStarted) {
                starts[p.event.trainee_id].emplace_back(p.event.timestamp, ordinal[*p.source_level]);
            }
        }
        for (auto& [_, v] : starts) std::stable_sort(v.begin(), v.end());

        std::vector<Event> out;
        out.reserve(pending.size());
        for (auto& p : pending) {
            if (p.source_level) {
                p.event.level = ordinal[*p.source_level];
            } else {
                auto it = starts.find(p.event.trainee_id);
                if (it == starts.end() || it->second.empty()) {
                    p.event.level = 0;
                } else {
                    const auto& v = it->second;
                    auto ub = std::upper_bound(v.begin(), v.end(), p.event.timestamp,
                                               [](Timestamp t, const auto& s) { return t < s.first; });
                    p.event.level = ub == v.begin() ? v.front().second : std::prev(ub)->second;
                }
            }
            out.push_back(std::move(p.event));
        }
        return out;
    }

private:
    static std::string trainee_from_origin(const std::string& origin) {
        std::filesystem::path p(origin);
        auto parent = p.parent_path().filename().string();
        return parent;
    }

    static std::optional<GameType> game_type_from(std::string type) {
        if (auto dot = type.rfind('.'); dot != std::string::npos) type = type.substr(dot + 1);
        static const std::map<std::string, GameType> aliases = {
            {"TrainingRunStarted", GameType::TrainingStarted},
            {"TrainingStarted", GameType::TrainingStarted},
            {"LevelStarted", GameType::LevelStarted},
            {"CorrectAnswerSubmitted", GameType::CorrectAnswerSubmitted},
            {"CorrectFlagSubmitted", GameType::CorrectAnswerSubmitted},
            {"WrongAnswerSubmitted", GameType::WrongAnswerSubmitted},
            {"WrongFlagSubmitted", GameType::WrongAnswerSubmitted},
            {"HintTaken", GameType::HintTaken},
            {"SolutionDisplayed", GameType::SolutionDisplayed},
            {"TrainingRunEnded", GameType::TrainingFinished},
            {"TrainingRunFinished", GameType::TrainingFinished},
            {"TrainingFinished", GameType::TrainingFinished},
        };
        auto it = aliases.find(type);
        if (it == aliases.end()) return std::nullopt;
        return it->second;
    }

    static KypoPending parse_one(const SourceRecord& rec) {
        const Json j = Json::parse(rec.text);
        if (!j.is_object()) throw std::runtime_error("record is not a JSON object");

        Event e;
        std::optional<Timestamp> ts;
        if (j.contains("timestamp_str")) ts = timestamp_from_json(j.at("timestamp_str"));
        if (!ts && j.contains("timestamp")) ts = timestamp_from_json(j.at("timestamp"));
        if (!ts) throw std::runtime_error("missing or malformed timestamp");
        e.timestamp = *ts;

        e.trainee_id = string_field(j, "sandbox_id");
        if (e.trainee_id.empty()) e.trainee_id = string_field(j, "user_ref_id");
        if (e.trainee_id.empty()) e.trainee_id = trainee_from_origin(rec.origin);
        if (e.trainee_id.empty()) throw std::runtime_error("cannot determine trainee (no sandbox_id)");

        std::optional<long long> level;
        if (j.contains("cmd")) {
            const std::string cmd_type = string_field(j, "cmd_type");
            const bool msf = cmd_type.find("msf") != std::string::npos ||
                             (cmd_type.empty() && rec.origin.find("msf") != std::string::npos);
            e.event_class = msf ? EventClass::Msf : EventClass::Bash;
            e.content = string_field(j, "cmd");
            if (normalize_command(e.content).empty()) throw std::runtime_error("empty command");
        } else if (j.contains("type")) {
            auto gt = game_type_from(string_field(j, "type"));
            if (!gt) throw std::runtime_error("unsupported training event type '" + string_field(j, "type") + "'");
            e.event_class = EventClass::Game;
            e.game_type = gt;
            for (const char* key : {"answer_content", "hint_title", "hint_id"}) {
                if (auto v = string_field(j, key); !v.empty()) {
                    e.content = v;
                    break;
                }
            }
            if (auto it = j.find("level"); it != j.end() && it->is_number_integer()) {
                level = it->get<long long>();
            }
        } else {
            throw std::runtime_error("record is neither a command nor a training event");
        }
        return KypoPending{std::move(e), level};
    }
};

}  // namespace

const AdapterRegistry& AdapterRegistry::builtin() {
    static const AdapterRegistry registry = [] {
        AdapterRegistry r;
        r.add(std::make_unique<NormalizedAdapter>());
        r.add(std::make_unique<KypoAdapter>());
        return r;
    }();
    return registry;
}

void AdapterRegistry::add(std::unique_ptr<Adapter> adapter) { adapters_.push_back(std::move(adapter)); }

const Adapter& AdapterRegistry::get(const std::string& id) const {
    for (const auto& a : adapters_) {
        if (a->id() == id) return *a;
    }
    throw UnknownAdapter("unknown adapter '" + id + "'");
}

std::vector<std::string> AdapterRegistry::ids() const {
    std::vector<std::string> out;
    for (const auto& a : adapters_) out.push_back(a->id());
    return out;
}

IngestResult ingest(std::span<const SourceRecord> records, const std::string& adapter_id,
                    const std::string& dataset_id, const AdapterRegistry& registry) {
    const Adapter& adapter = registry.get(adapter_id);
    std::vector<SourceRecord> non_blank;
    for (const auto& r : records) {
        if (r.text.find_first_not_of(" \t\r\n") != std::string::npos) non_blank.push_back(r);
    }
    IngestResult result;
    result.record_count = non_blank.size();
    auto events = adapter.parse(non_blank, result.errors);
    if (events.empty()) {
        throw EmptyDataset("no events could be ingested (" + std::to_string(result.errors.size()) +
                           " records failed to parse)");
    }
    result.log = EventLog::build(dataset_id, std::move(events));
    return result;
}

std::vector<SourceRecord> split_records(const std::string& text, const std::string& origin) {
    std::vector<SourceRecord> out;
    std::istringstream in(text);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        out.push_back({std::move(line), n, origin});
    }
    return out;
}

std::vector<SourceRecord> read_records(const std::filesystem::path& path) {
    namespace fs = std::filesystem;
    auto read_file = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open " + p.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        return split_records(ss.str(), p.string());
    };
    if (!fs::is_directory(path)) return read_file(path);
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(path)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<SourceRecord> out;
    for (const auto& f : files) {
        auto recs = read_file(f);
        out.insert(out.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
    }
    return out;
}

Json event_to_json(const Event& e) {
    Json j = {
        {"timestamp", format_timestamp(e.timestamp)},
        {"trainee_id", e.trainee_id},
        {"level", e.level},
        {"event_class", std::string(to_string(e.event_class))},
        {"content", e.content},
    };
    if (e.game_type) j["game_type"] = std::string(to_string(*e.game_type));
    return j;
}

std::string write_normalized(const EventLog& log) {
    std::string out;
    for (const auto& e : log.events()) {
        out += canonical_dump(event_to_json(e));
        out += '\n';
    }
    return out;
}

}  // namespace ctfminer
