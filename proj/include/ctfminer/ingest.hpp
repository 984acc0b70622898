#pragma once

#include "ctfminer/canonical_json.hpp"
#include "ctfminer/event.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ctfminer {

/// One line of a source export. `origin` names the file it came from and is
/// used by adapters that derive trainee ids from the export layout.
struct SourceRecord {
    std::string text;
    std::size_t line = 0;
    std::string origin;
};

struct ParseError {
    std::size_t line = 0;
    std::string origin;
    std::string reason;
};

/// Converts source-format records into normalized events. Every record
/// yields either one event or one ParseError.
class Adapter {
public:
    virtual ~Adapter() = default;
    virtual std::string id() const = 0;
    virtual std::vector<Event> parse(std::span<const SourceRecord> records,
                                     std::vector<ParseError>& errors) const = 0;
};

class AdapterRegistry {
public:
    /// Registry holding the built-in "normalized" and "kypo" adapters.
    static const AdapterRegistry& builtin();

    void add(std::unique_ptr<Adapter> adapter);
    /// Throws UnknownAdapter.
    const Adapter& get(const std::string& id) const;
    std::vector<std::string> ids() const;

private:
    std::vector<std::unique_ptr<Adapter>> adapters_;
};

struct IngestResult {
    EventLog log;
    std::vector<ParseError> errors;
    std::size_t record_count = 0;
};

/// Blank lines are not records. Throws UnknownAdapter, and EmptyDataset when
/// no record produced an event.
IngestResult ingest(std::span<const SourceRecord> records, const std::string& adapter_id,
                    const std::string& dataset_id,
                    const AdapterRegistry& registry = AdapterRegistry::builtin());

/// Splits text into SourceRecords with 1-based line numbers.
std::vector<SourceRecord> split_records(const std::string& text, const std::string& origin = {});

/// Reads a file, or every regular file below a directory (sorted by path).
std::vector<SourceRecord> read_records(const std::filesystem::path& path);

/// Serializes one event as a line of the normalized event file.
Json event_to_json(const Event& e);
std::string write_normalized(const EventLog& log);

}  // namespace ctfminer
