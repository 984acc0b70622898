#pragma once

#include <chrono>
#include <compare>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ctfminer {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;
using Millis = std::chrono::milliseconds;

/// Parses an ISO-8601 instant ("2021-03-24T10:34:57.811Z", offsets allowed).
/// Fractions beyond millisecond precision are truncated. Returns nullopt on
/// any syntax or range error.
std::optional<Timestamp> parse_timestamp(std::string_view text);

/// Formats as "YYYY-MM-DDTHH:MM:SS.mmmZ".
std::string format_timestamp(Timestamp ts);

enum class EventClass { Game, Bash, Msf };

enum class GameType {
    TrainingStarted,
    LevelStarted,
    CorrectAnswerSubmitted,
    WrongAnswerSubmitted,
    HintTaken,
    SolutionDisplayed,
    TrainingFinished,
};

std::string_view to_string(EventClass c);
std::string_view to_string(GameType t);
std::optional<EventClass> parse_event_class(std::string_view s);
std::optional<GameType> parse_game_type(std::string_view s);

inline bool is_command(EventClass c) { return c != EventClass::Game; }

/// Trim plus collapse of internal whitespace runs to one space. Case is kept.
std::string normalize_command(std::string_view text);

struct Event {
    Timestamp timestamp{};
    std::string trainee_id;
    int level = 0;
    EventClass event_class = EventClass::Game;
    std::optional<GameType> game_type;
    std::string content;

    bool operator==(const Event&) const = default;
};

/// Throws InvalidEvent when the class/game_type/content invariants fail.
void check_event(const Event& e);

/// Immutable, timestamp-ordered event collection for one dataset.
class EventLog {
public:
    EventLog() = default;

    /// Validates and sorts (timestamp, then trainee id, then input order).
    /// `extra_levels` are kept in the level list even when no event uses them.
    static EventLog build(std::string dataset_id, std::vector<Event> events,
                          const std::vector<int>& extra_levels = {});

    const std::string& dataset_id() const { return dataset_id_; }
    const std::vector<Event>& events() const { return events_; }
    const std::set<std::string>& trainees() const { return trainees_; }
    const std::vector<int>& levels() const { return levels_; }
    std::size_t size() const { return events_.size(); }
    bool empty() const { return events_.empty(); }

    bool operator==(const EventLog&) const = default;

private:
    std::string dataset_id_;
    std::vector<Event> events_;
    std::set<std::string> trainees_;
    std::vector<int> levels_;
};

struct Activity {
    std::string label;
    EventClass source_class = EventClass::Game;
    int level = 0;

    auto operator<=>(const Activity&) const = default;
    bool operator==(const Activity&) const = default;
};

/// Stable node id: "n" + 16 hex digits of FNV-1a over (class, level, label).
std::string activity_id(const Activity& a);

/// EventLog where every event carries its resolved Activity.
class ActivityLog {
public:
    ActivityLog() = default;

    /// `events` must already be in canonical order; activities are parallel.
    static ActivityLog build(std::string dataset_id, std::vector<Event> events,
                             std::vector<Activity> activities, std::vector<int> levels);

    const std::string& dataset_id() const { return dataset_id_; }
    const std::vector<Event>& events() const { return events_; }
    const std::vector<Activity>& activities() const { return activities_; }
    const Event& event(std::size_t i) const { return events_[i]; }
    const Activity& activity(std::size_t i) const { return activities_[i]; }
    const std::set<std::string>& trainees() const { return trainees_; }
    const std::vector<int>& levels() const { return levels_; }
    std::size_t size() const { return events_.size(); }
    bool empty() const { return events_.empty(); }

    bool operator==(const ActivityLog&) const = default;

private:
    std::string dataset_id_;
    std::vector<Event> events_;
    std::vector<Activity> activities_;
    std::set<std::string> trainees_;
    std::vector<int> levels_;
};

}  // namespace ctfminer
