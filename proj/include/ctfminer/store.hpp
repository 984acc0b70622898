#pragma once

#include "ctfminer/canonical_json.hpp"
#include "ctfminer/event.hpp"
#include "ctfminer/ingest.hpp"
#include "ctfminer/mapping.hpp"
#include "ctfminer/preprocess.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace ctfminer {

struct DatasetRecord {
    std::string id;
    std::string name;
    std::string adapter;
    std::string ingested_at;
    std::string event_file = "events.jsonl";
    std::size_t source_records = 0;
    StatsSummary stats;  ///< after preprocessing
    PreprocessConfig preprocess;
    std::size_t removed_duplicates = 0;
    std::size_t removed_bursts = 0;
    std::size_t removed_garbage = 0;
    std::vector<int> levels;
};

Json to_json(const DatasetRecord& r);
DatasetRecord dataset_record_from_json(const Json& j);

/// Letters, digits, '-', '_' and '.', not starting with '.'.
bool valid_dataset_id(const std::string& id);

struct IngestRequest {
    std::string id;
    std::string name;
    std::string adapter = "normalized";
    PreprocessConfig preprocess;
    /// Keep the records that parsed instead of rejecting the whole upload.
    bool allow_partial = false;
};

struct IngestOutcome {
    DatasetRecord record;
    std::vector<ParseError> errors;
    RemovalReport removal;
};

/// One directory per dataset under `root`, holding the normalized event file
/// and metadata.json. Loaded logs are shared immutable snapshots, so a query
/// holding one is unaffected by a concurrent delete.
class DatasetStore {
public:
    explicit DatasetStore(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }

    /// Throws DuplicateId, InvalidConfig, UnknownAdapter, ParseFailure, EmptyDataset.
    IngestOutcome create(const IngestRequest& req, std::span<const SourceRecord> records,
                         const AdapterRegistry& registry = AdapterRegistry::builtin());

    std::vector<DatasetRecord> list() const;
    /// Throws UnknownDataset.
    DatasetRecord record(const std::string& id) const;
    std::shared_ptr<const EventLog> load(const std::string& id) const;
    void remove(const std::string& id);

private:
    std::filesystem::path dir(const std::string& id) const;

    std::filesystem::path root_;
    mutable std::mutex mutex_;
    mutable std::map<std::string, std::shared_ptr<const EventLog>> cache_;
};

}  // namespace ctfminer
