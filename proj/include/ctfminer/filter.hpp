#pragma once

#include "ctfminer/canonical_json.hpp"
#include "ctfminer/event.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace ctfminer {

enum class RuleMode { Include, Exclude };

struct CommandRule {
    std::string pattern;
    /// Keyword patterns are case-sensitive substrings; regex ones use ECMAScript search.
    bool is_regex = false;
    RuleMode mode = RuleMode::Exclude;
    std::set<EventClass> target_classes{EventClass::Bash, EventClass::Msf};

    bool operator==(const CommandRule&) const = default;
};

enum class TraineeRuleMode { RequireTrainee, ExcludeTrainee };

struct GameEventRule {
    GameType game_type = GameType::HintTaken;
    int level = 0;
    TraineeRuleMode mode = TraineeRuleMode::RequireTrainee;

    bool operator==(const GameEventRule&) const = default;
};

struct FilterSpec {
    std::optional<std::set<std::string>> included_trainees;  ///< nullopt = all
    std::optional<std::vector<int>> included_levels;         ///< nullopt = all
    std::vector<CommandRule> command_rules;
    std::vector<GameEventRule> game_event_rules;

    bool operator==(const FilterSpec&) const = default;
};

Json to_json(const FilterSpec& spec);
/// Throws InvalidSpec on malformed documents (validity is checked separately).
FilterSpec filter_spec_from_json(const Json& j);

struct ValidationReport {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;

    bool ok() const { return errors.empty(); }
};

Json to_json(const ValidationReport& r);

/// Checks that need no dataset: contiguity, pattern compilation, rule targets.
ValidationReport validate_structure(const FilterSpec& spec);
/// validate_structure plus dataset-relative checks (unknown trainees/levels).
ValidationReport validate(const FilterSpec& spec, const ActivityLog& log);

/// Throws InvalidSpec when validate_structure reports errors. Game-event rules
/// are evaluated against the input log before level filtering.
ActivityLog apply(const FilterSpec& spec, const ActivityLog& log);

/// Trainees that survive the trainee set and game-event rules.
std::set<std::string> surviving_trainees(const FilterSpec& spec, const ActivityLog& log);

// --- temporary visual suppression (presentation only) ---

struct ClusterResult;

struct SuppressionState {
    std::set<std::string> visible_trainees;
    double suppression_strength = 0.8;
};

enum class SuppressionSort { ById, ByCluster };

struct TraineeVisibility {
    std::string trainee_id;
    bool visible = true;
    std::optional<int> cluster;
};

Json to_json(const std::vector<TraineeVisibility>& list);

/// Every trainee of `all_trainees` annotated visible/suppressed; nothing is
/// dropped. ByCluster groups by cluster index, ids ascending within.
/// Throws MissingClusters when ByCluster is requested without clusters.
std::vector<TraineeVisibility> suppression_selection(const SuppressionState& state,
                                                     const std::set<std::string>& all_trainees,
                                                     const ClusterResult* clusters,
                                                     SuppressionSort sort);

/// Cluster bar switch: hides (or shows) every member of `cluster`.
SuppressionState toggle_cluster(SuppressionState state, const ClusterResult& clusters, int cluster,
                                bool visible);

/// Explicit conversion of the current suppression into a raw trainee filter.
FilterSpec suppression_to_filter(const SuppressionState& state, FilterSpec base);

}  // namespace ctfminer
