#pragma once

#include "ctfminer/canonical_json.hpp"
#include "ctfminer/event.hpp"

#include <string>
#include <utility>
#include <vector>

namespace ctfminer {

struct PreprocessConfig {
    Millis dedup_window{1000};
    int burst_count_threshold = 5;
    Millis burst_window{2000};
    /// ECMAScript regexes; a BASH/MSF event whose content matches any is garbage.
    std::vector<std::string> garbage_patterns;
    /// Command names treated as meaningful when screening paste bursts.
    std::vector<std::string> command_vocabulary = default_command_vocabulary();

    static std::vector<std::string> default_command_vocabulary();

    /// Throws InvalidConfig.
    void validate() const;

    bool operator==(const PreprocessConfig&) const = default;
};

Json to_json(const PreprocessConfig& cfg);
/// Missing keys take defaults; throws InvalidConfig on bad values.
PreprocessConfig preprocess_config_from_json(const Json& j);

enum class RemovalCategory { Duplicate, Burst, Garbage };

struct RemovedEvent {
    Event event;
    RemovalCategory category;
};

struct RemovalReport {
    std::size_t duplicates = 0;
    std::size_t bursts = 0;
    std::size_t garbage = 0;
    std::vector<RemovedEvent> removed;

    std::size_t total() const { return duplicates + bursts + garbage; }
};

Json to_json(const RemovalReport& report);

/// Removes garbage-pattern matches, then same-trainee exact duplicates
/// (keyed on class and normalized content) within the dedup window of the
/// last kept copy, then paste bursts: maximal runs of at least
/// burst_count_threshold consecutive out-of-vocabulary commands of one
/// trainee with successive gaps within burst_window. GAME events are never
/// removed and surviving events keep their order.
std::pair<EventLog, RemovalReport> preprocess(const EventLog& log, const PreprocessConfig& cfg);

}  // namespace ctfminer
