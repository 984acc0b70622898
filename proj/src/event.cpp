#include "ctfminer/event.hpp"

#include "ctfminer/error.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>

namespace ctfminer {

namespace {

constexpr std::array<std::string_view, 7> kGameTypeNames = {
    "TrainingStarted",   "LevelStarted",     "CorrectAnswerSubmitted", "WrongAnswerSubmitted",
    "HintTaken",         "SolutionDisplayed", "TrainingFinished",
};

bool read_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > s.size()) return false;
    for (std::size_t i = pos; i < pos + len; ++i) {
        if (s[i] < '0' || s[i] > '9') return false;
    }
    auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, out);
    return ec == std::errc{} && p == s.data() + pos + len;
}

}  // namespace

std::optional<Timestamp> parse_timestamp(std::string_view s) {
    using namespace std::chrono;
    // YYYY-MM-DDTHH:MM:SS is the mandatory prefix
    if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') ||
        s[13] != ':' || s[16] != ':') {
        return std::nullopt;
    }
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
    if (!read_int(s, 0, 4, y) || !read_int(s, 5, 2, mo) || !read_int(s, 8, 2, d) ||
        !read_int(s, 11, 2, h) || !read_int(s, 14, 2, mi) || !read_int(s, 17, 2, sec)) {
        return std::nullopt;
    }
    if (h > 23 || mi > 59 || sec > 60) return std::nullopt;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;

    std::size_t pos = 19;
    long long frac_ms = 0;
    if (pos < s.size() && (s[pos] == '.' || s[pos] == ',')) {
        ++pos;
        const std::size_t start = pos;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
            if (pos - start < 3) frac_ms = frac_ms * 10 + (s[pos] - '0');
            ++pos;
        }
        if (pos == start) return std::nullopt;
        for (std::size_t n = pos - start; n < 3; ++n) frac_ms *= 10;
    }

    int offset_min = 0;
    if (pos < s.size() && (s[pos] == 'Z' || s[pos] == 'z')) {
        ++pos;
    } else if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
        const int sign = s[pos] == '-' ? -1 : 1;
        int oh = 0, om = 0;
        if (!read_int(s, pos + 1, 2, oh)) return std::nullopt;
        std::size_t mpos = pos + 3;
        if (mpos < s.size() && s[mpos] == ':') ++mpos;
        if (!read_int(s, mpos, 2, om)) return std::nullopt;
        if (oh > 23 || om > 59) return std::nullopt;
        offset_min = sign * (oh * 60 + om);
        pos = mpos + 2;
    } else {
        return std::nullopt;  // naive local times are ambiguous
    }
    if (pos != s.size()) return std::nullopt;

    auto tp = sys_days{ymd} + hours{h} + minutes{mi} + seconds{sec} + milliseconds{frac_ms} -
              minutes{offset_min};
    return time_point_cast<milliseconds>(tp);
}

std::string format_timestamp(Timestamp ts) {
    using namespace std::chrono;
    const auto day_point = floor<days>(ts);
    const year_month_day ymd{day_point};
    auto rest = ts - day_point;
    const auto h = duration_cast<hours>(rest);
    rest -= h;
    const auto m = duration_cast<minutes>(rest);
    rest -= m;
    const auto s = duration_cast<seconds>(rest);
    rest -= s;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(h.count()), static_cast<int>(m.count()),
                  static_cast<int>(s.count()), static_cast<int>(rest.count()));
    return buf;
}

std::string_view to_string(EventClass c) {
    switch (c) {
        case EventClass::Game: return "game";
        case EventClass::Bash: return "bash";
        case EventClass::Msf: return "msf";
    }
    return "game";
}

std::string_view to_string(GameType t) { return kGameTypeNames[static_cast<std::size_t>(t)]; }

std::optional<EventClass> parse_event_class(std::string_view s) {
    if (s == "game") return EventClass::Game;
    if (s == "bash") return EventClass::Bash;
    if (s == "msf") return EventClass::Msf;
    return std::nullopt;
}

std::optional<GameType> parse_game_type(std::string_view s) {
    for (std::size_t i = 0; i < kGameTypeNames.size(); ++i) {
        if (kGameTypeNames[i] == s) return static_cast<GameType>(i);
    }
    return std::nullopt;
}

std::string normalize_command(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char ch : text) {
        const bool ws = ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' || ch == '\v' || ch == '\f';
        if (ws) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(ch);
    }
    return out;
}

void check_event(const Event& e) {
    if (e.trainee_id.empty()) throw InvalidEvent("event has an empty trainee_id");
    if (e.level < 0) throw InvalidEvent("event level must be non-negative");
    if (e.event_class == EventClass::Game) {
        if (!e.game_type) throw InvalidEvent("game event without game_type");
    } else {
        if (e.game_type) throw InvalidEvent("command event must not carry game_type");
        if (normalize_command(e.content).empty()) throw InvalidEvent("command event with empty content");
    }
}

EventLog EventLog::build(std::string dataset_id, std::vector<Event> events,
                         const std::vector<int>& extra_levels) {
    for (const auto& e : events) check_event(e);
    std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
        if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
        return a.trainee_id < b.trainee_id;
    });
    EventLog log;
    log.dataset_id_ = std::move(dataset_id);
    std::set<int> levels(extra_levels.begin(), extra_levels.end());
    for (const auto& e : events) {
        log.trainees_.insert(e.trainee_id);
        levels.insert(e.level);
    }
    log.levels_.assign(levels.begin(), levels.end());
    log.events_ = std::move(events);
    return log;
}

std::string activity_id(const Activity& a) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](std::string_view bytes) {
        for (unsigned char c : bytes) {
            h ^= c;
            h *= 1099511628211ULL;
        }
    };
    mix(to_string(a.source_class));
    mix("\x1f");
    mix(std::to_string(a.level));
    mix("\x1f");
    mix(a.label);
    char buf[20];
    std::snprintf(buf, sizeof buf, "n%016llx", static_cast<unsigned long long>(h));
    return buf;
}

ActivityLog ActivityLog::build(std::string dataset_id, std::vector<Event> events,
                               std::vector<Activity> activities, std::vector<int> levels) {
    if (events.size() != activities.size()) {
        throw InvalidEvent("activity annotations do not match events");
    }
    for (std::size_t i = 1; i < events.size(); ++i) {
        const auto& a = events[i - 1];
        const auto& b = events[i];
        if (b.timestamp < a.timestamp || (b.timestamp == a.timestamp && b.trainee_id < a.trainee_id)) {
            throw InvalidEvent("activity log events are not in canonical order");
        }
    }
    ActivityLog log;
    log.dataset_id_ = std::move(dataset_id);
    std::set<int> lv(levels.begin(), levels.end());
    for (const auto& e : events) {
        log.trainees_.insert(e.trainee_id);
        lv.insert(e.level);
    }
    log.levels_.assign(lv.begin(), lv.end());
    log.events_ = std::move(events);
    log.activities_ = std::move(activities);
    return log;
}

}  // namespace ctfminer
