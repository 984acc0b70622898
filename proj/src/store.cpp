#include "ctfminer/store.hpp"

#include "ctfminer/error.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <regex>
#include <sstream>

namespace ctfminer {

namespace fs = std::filesystem;

namespace {

ClassCounts counts_from_json(const Json& j) {
    ClassCounts c;
    c.game = j.at("game").get<std::size_t>();
    c.bash = j.at("bash").get<std::size_t>();
    c.msf = j.at("msf").get<std::size_t>();
    return c;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("IoError", "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("IoError", "cannot write " + p.string());
    out << text;
    if (!out.flush()) throw Error("IoError", "cannot write " + p.string());
}

std::string now_iso() {
    return format_timestamp(std::chrono::time_point_cast<Millis>(std::chrono::system_clock::now()));
}

}  // namespace

Json to_json(const DatasetRecord& r) {
    return {{"id", r.id},
            {"name", r.name},
            {"adapter", r.adapter},
            {"ingested_at", r.ingested_at},
            {"event_file", r.event_file},
            {"source_records", r.source_records},
            {"stats", to_json(r.stats)},
            {"preprocess", to_json(r.preprocess)},
            {"removed", {{"duplicates", r.removed_duplicates}, {"bursts", r.removed_bursts}, {"garbage", r.removed_garbage}}},
            {"levels", r.levels}};
}

DatasetRecord dataset_record_from_json(const Json& j) {
    DatasetRecord r;
    try {
        r.id = j.at("id").get<std::string>();
        r.name = j.at("name").get<std::string>();
        r.adapter = j.at("adapter").get<std::string>();
        r.ingested_at = j.at("ingested_at").get<std::string>();
        r.event_file = j.at("event_file").get<std::string>();
        r.source_records = j.at("source_records").get<std::size_t>();
        const auto& s = j.at("stats");
        r.stats.raw_events = counts_from_json(s.at("raw_events"));
        r.stats.distinct_activities = counts_from_json(s.at("distinct_activities"));
        for (const auto& [lvl, n] : s.at("events_per_level").items()) {
            r.stats.events_per_level[std::stoi(lvl)] = n.get<std::size_t>();
        }
        r.stats.trainees = s.at("trainees").get<std::size_t>();
        r.preprocess = preprocess_config_from_json(j.at("preprocess"));
        r.removed_duplicates = j.at("removed").at("duplicates").get<std::size_t>();
        r.removed_bursts = j.at("removed").at("bursts").get<std::size_t>();
        r.removed_garbage = j.at("removed").at("garbage").get<std::size_t>();
        r.levels = j.at("levels").get<std::vector<int>>();
    } catch (const Json::exception& ex) {
        throw Error("IoError", std::string("corrupt dataset metadata: ") + ex.what());
    }
    return r;
}

bool valid_dataset_id(const std::string& id) {
    static const std::regex re("[A-Za-z0-9_-][A-Za-z0-9_.-]*");
    return id.size() <= 128 && std::regex_match(id, re);
}

DatasetStore::DatasetStore(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

fs::path DatasetStore::dir(const std::string& id) const {
    if (!valid_dataset_id(id)) throw UnknownDataset("no dataset '" + id + "'");
    return root_ / id;
}

IngestOutcome DatasetStore::create(const IngestRequest& req, std::span<const SourceRecord> records,
                                   const AdapterRegistry& registry) {
    if (!valid_dataset_id(req.id)) throw InvalidConfig("invalid dataset id '" + req.id + "'");
    req.preprocess.validate();
    registry.get(req.adapter);
    {
        std::lock_guard lock(mutex_);
        if (fs::exists(root_ / req.id)) throw DuplicateId("dataset '" + req.id + "' already exists");
    }

    auto parsed = ingest(records, req.adapter, req.id, registry);
    if (!parsed.errors.empty() && !req.allow_partial) {
        std::vector<std::string> details;
        for (const auto& e : parsed.errors) {
            details.push_back((e.origin.empty() ? "" : e.origin + ":") + std::to_string(e.line) + ": " + e.reason);
        }
        const auto& first = parsed.errors.front();
        throw ParseFailure(std::to_string(parsed.errors.size()) + " record(s) failed to parse; first at line " +
                               std::to_string(first.line) + ": " + first.reason,
                           std::move(details));
    }
    auto [log, removal] = preprocess(parsed.log, req.preprocess);

    IngestOutcome out;
    out.errors = std::move(parsed.errors);
    out.removal = std::move(removal);
    auto& r = out.record;
    r.id = req.id;
    r.name = req.name.empty() ? req.id : req.name;
    r.adapter = req.adapter;
    r.ingested_at = now_iso();
    r.source_records = parsed.record_count;
    r.stats = dataset_stats(map_activities(log, ActivityMappingConfig{}));
    r.preprocess = req.preprocess;
    r.removed_duplicates = out.removal.duplicates;
    r.removed_bursts = out.removal.bursts;
    r.removed_garbage = out.removal.garbage;
    r.levels = log.levels();

    std::lock_guard lock(mutex_);
    const auto target = root_ / req.id;
    if (fs::exists(target)) throw DuplicateId("dataset '" + req.id + "' already exists");
    const auto staging = root_ / (".staging-" + req.id);
    fs::remove_all(staging);
    fs::create_directories(staging);
    write_file(staging / r.event_file, write_normalized(log));
    write_file(staging / "removal_report.json", canonical_dump(to_json(out.removal)) + "\n");
    write_file(staging / "metadata.json", canonical_dump(to_json(r)) + "\n");
    fs::rename(staging, target);
    cache_[req.id] = std::make_shared<const EventLog>(std::move(log));
    return out;
}

std::vector<DatasetRecord> DatasetStore::list() const {
    std::vector<std::string> ids;
    {
        std::lock_guard lock(mutex_);
        for (const auto& entry : fs::directory_iterator(root_)) {
            const auto name = entry.path().filename().string();
            if (entry.is_directory() && valid_dataset_id(name) && fs::exists(entry.path() / "metadata.json")) {
                ids.push_back(name);
            }
        }
    }
    std::sort(ids.begin(), ids.end());
    std::vector<DatasetRecord> out;
    for (const auto& id : ids) {
        try {
            out.push_back(record(id));
        } catch (const UnknownDataset&) {
            // deleted in between
        }
    }
    return out;
}

DatasetRecord DatasetStore::record(const std::string& id) const {
    const auto d = dir(id);
    std::lock_guard lock(mutex_);
    if (!fs::exists(d / "metadata.json")) throw UnknownDataset("no dataset '" + id + "'");
    return dataset_record_from_json(Json::parse(read_file(d / "metadata.json")));
}

std::shared_ptr<const EventLog> DatasetStore::load(const std::string& id) const {
    const auto rec = record(id);
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(id); it != cache_.end()) return it->second;
    const auto path = dir(id) / rec.event_file;
    if (!fs::exists(path)) throw UnknownDataset("no dataset '" + id + "'");
    const auto records = split_records(read_file(path), path.string());
    std::vector<ParseError> errors;
    auto events = AdapterRegistry::builtin().get("normalized").parse(records, errors);
    if (!errors.empty()) throw Error("IoError", "stored events of '" + id + "' are corrupt: " + errors.front().reason);
    auto log = std::make_shared<const EventLog>(EventLog::build(id, std::move(events), rec.levels));
    cache_[id] = log;
    return log;
}

void DatasetStore::remove(const std::string& id) {
    const auto d = dir(id);
    std::lock_guard lock(mutex_);
    if (!fs::exists(d / "metadata.json")) throw UnknownDataset("no dataset '" + id + "'");
    cache_.erase(id);
    fs::remove_all(d);
}

}  // namespace ctfminer
