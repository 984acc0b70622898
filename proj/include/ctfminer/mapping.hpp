#pragma once

#include "ctfminer/canonical_json.hpp"
#include "ctfminer/event.hpp"

#include <map>
#include <regex>
#include <set>
#include <string>
#include <vector>

namespace ctfminer {

enum class MappingMode {
    CommandOnly,  ///< first token only (lower bound)
    FullCommand,  ///< whole whitespace-normalized command line (upper bound)
};

struct MappingRule {
    std::set<EventClass> event_classes{EventClass::Bash, EventClass::Msf};
    std::string match_pattern;
    /// "$1".."$9" and "$0" expand to capture groups, "$$" to a literal '$'.
    std::string activity_label_template;

    bool operator==(const MappingRule&) const = default;
};

struct ActivityMappingConfig {
    std::vector<MappingRule> rules;
    MappingMode default_mode = MappingMode::CommandOnly;

    /// Throws InvalidConfig (bad selector, non-compiling pattern, template
    /// referring to a group the pattern does not define).
    void validate() const;

    bool operator==(const ActivityMappingConfig&) const = default;
};

Json to_json(const ActivityMappingConfig& cfg);
ActivityMappingConfig mapping_config_from_json(const Json& j);

/// Compiled form of a mapping config; reusable across logs.
class ActivityMapper {
public:
    explicit ActivityMapper(ActivityMappingConfig cfg);

    /// Throws TemplateError when a referenced group did not participate.
    Activity map(const Event& e) const;

    const ActivityMappingConfig& config() const { return cfg_; }

private:
    ActivityMappingConfig cfg_;
    std::vector<std::regex> compiled_;
};

ActivityLog map_activities(const EventLog& log, const ActivityMappingConfig& cfg);

struct ClassCounts {
    std::size_t game = 0;
    std::size_t bash = 0;
    std::size_t msf = 0;

    std::size_t total() const { return game + bash + msf; }
    std::size_t& operator[](EventClass c);
    bool operator==(const ClassCounts&) const = default;
};

struct StatsSummary {
    ClassCounts raw_events;
    ClassCounts distinct_activities;
    std::map<int, std::size_t> events_per_level;
    std::size_t trainees = 0;
};

Json to_json(const StatsSummary& s);

StatsSummary dataset_stats(const ActivityLog& log);
/// Event counts only (no activity resolution needed).
StatsSummary dataset_stats(const EventLog& log);

}  // namespace ctfminer
