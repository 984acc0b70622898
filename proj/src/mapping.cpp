#include "ctfminer/mapping.hpp"

#include "ctfminer/error.hpp"

namespace ctfminer {

namespace {

// Group indices referenced by a label template, in order of appearance.
std::vector<int> template_refs(const std::string& tpl) {
    std::vector<int> refs;
    for (std::size_t i = 0; i + 1 < tpl.size(); ++i) {
        if (tpl[i] != '$') continue;
        if (tpl[i + 1] == '$') {
            ++i;
        } else if (tpl[i + 1] >= '0' && tpl[i + 1] <= '9') {
            refs.push_back(tpl[i + 1] - '0');
            ++i;
        }
    }
    return refs;
}

std::string expand(const std::string& tpl, const std::smatch& m, const std::string& pattern) {
    std::string out;
    for (std::size_t i = 0; i < tpl.size(); ++i) {
        if (tpl[i] == '$' && i + 1 < tpl.size()) {
            const char next = tpl[i + 1];
            if (next == '$') {
                out.push_back('$');
                ++i;
                continue;
            }
            if (next >= '0' && next <= '9') {
                const auto g = static_cast<std::size_t>(next - '0');
                if (g >= m.size() || !m[g].matched) {
                    throw TemplateError("group $" + std::string(1, next) + " of pattern '" + pattern +
                                        "' did not participate in the match");
                }
                out += m[g].str();
                ++i;
                continue;
            }
        }
        out.push_back(tpl[i]);
    }
    return out;
}

}  // namespace

void ActivityMappingConfig::validate() const {
    for (const auto& rule : rules) {
        if (rule.event_classes.empty()) throw InvalidConfig("mapping rule selects no event class");
        if (rule.event_classes.contains(EventClass::Game)) {
            throw InvalidConfig("mapping rules apply to bash/msf events only");
        }
        std::regex re;
        try {
            re.assign(rule.match_pattern);
        } catch (const std::regex_error& ex) {
            throw InvalidConfig("mapping pattern '" + rule.match_pattern + "' does not compile: " + ex.what());
        }
        for (int g : template_refs(rule.activity_label_template)) {
            if (static_cast<unsigned>(g) > re.mark_count()) {
                throw InvalidConfig("template '" + rule.activity_label_template + "' references $" +
                                    std::to_string(g) + " but pattern defines " +
                                    std::to_string(re.mark_count()) + " groups");
            }
        }
    }
}

Json to_json(const ActivityMappingConfig& cfg) {
    Json rules = Json::array();
    for (const auto& r : cfg.rules) {
        Json classes = Json::array();
        for (auto c : r.event_classes) classes.push_back(std::string(to_string(c)));
        rules.push_back({{"event_classes", classes},
                         {"match_pattern", r.match_pattern},
                         {"activity_label_template", r.activity_label_template}});
    }
    return {{"rules", rules},
            {"default_mode", cfg.default_mode == MappingMode::CommandOnly ? "command_only" : "full_command"}};
}

ActivityMappingConfig mapping_config_from_json(const Json& j) {
    if (j.is_null()) return {};
    if (!j.is_object()) throw InvalidConfig("mapping config must be a JSON object");
    ActivityMappingConfig cfg;
    try {
        if (j.contains("default_mode")) {
            const auto mode = j.at("default_mode").get<std::string>();
            if (mode == "command_only") {
                cfg.default_mode = MappingMode::CommandOnly;
            } else if (mode == "full_command") {
                cfg.default_mode = MappingMode::FullCommand;
            } else {
                throw InvalidConfig("default_mode must be command_only or full_command");
            }
        }
        if (j.contains("rules")) {
            for (const auto& r : j.at("rules")) {
                MappingRule rule;
                if (r.contains("event_classes")) {
                    rule.event_classes.clear();
                    for (const auto& c : r.at("event_classes")) {
                        auto cls = parse_event_class(c.get<std::string>());
                        if (!cls) throw InvalidConfig("unknown event class " + c.dump());
                        rule.event_classes.insert(*cls);
                    }
                }
                rule.match_pattern = r.at("match_pattern").get<std::string>();
                rule.activity_label_template = r.at("activity_label_template").get<std::string>();
                cfg.rules.push_back(std::move(rule));
            }
        }
    } catch (const Json::exception& ex) {
        throw InvalidConfig(std::string("mapping config: ") + ex.what());
    }
    cfg.validate();
    return cfg;
}

ActivityMapper::ActivityMapper(ActivityMappingConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    for (const auto& r : cfg_.rules) compiled_.emplace_back(r.match_pattern);
}

Activity ActivityMapper::map(const Event& e) const {
    if (e.event_class == EventClass::Game) {
        return {std::string(to_string(*e.game_type)), EventClass::Game, e.level};
    }
    const std::string line = normalize_command(e.content);
    for (std::size_t i = 0; i < compiled_.size(); ++i) {
        if (!cfg_.rules[i].event_classes.contains(e.event_class)) continue;
        std::smatch m;
        if (std::regex_search(line, m, compiled_[i])) {
            return {expand(cfg_.rules[i].activity_label_template, m, cfg_.rules[i].match_pattern),
                    e.event_class, e.level};
        }
    }
    if (cfg_.default_mode == MappingMode::CommandOnly) {
        return {line.substr(0, line.find(' ')), e.event_class, e.level};
    }
    return {line, e.event_class, e.level};
}

ActivityLog map_activities(const EventLog& log, const ActivityMappingConfig& cfg) {
    const ActivityMapper mapper(cfg);
    std::vector<Activity> activities;
    activities.reserve(log.size());
    for (const auto& e : log.events()) activities.push_back(mapper.map(e));
    return ActivityLog::build(log.dataset_id(), log.events(), std::move(activities), log.levels());
}

std::size_t& ClassCounts::operator[](EventClass c) {
    switch (c) {
        case EventClass::Game: return game;
        case EventClass::Bash: return bash;
        case EventClass::Msf: return msf;
    }
    return game;
}

namespace {

Json counts_json(const ClassCounts& c) {
    return {{"game", c.game}, {"bash", c.bash}, {"msf", c.msf}, {"total", c.total()}};
}

}  // namespace

Json to_json(const StatsSummary& s) {
    Json per_level = Json::object();
    for (const auto& [lvl, n] : s.events_per_level) per_level[std::to_string(lvl)] = n;
    return {{"raw_events", counts_json(s.raw_events)},
            {"distinct_activities", counts_json(s.distinct_activities)},
            {"events_per_level", per_level},
            {"trainees", s.trainees}};
}

StatsSummary dataset_stats(const EventLog& log) {
    StatsSummary s;
    s.trainees = log.trainees().size();
    for (int lvl : log.levels()) s.events_per_level[lvl] = 0;
    for (const auto& e : log.events()) {
        ++s.raw_events[e.event_class];
        ++s.events_per_level[e.level];
    }
    return s;
}

StatsSummary dataset_stats(const ActivityLog& log) {
    StatsSummary s;
    s.trainees = log.trainees().size();
    for (int lvl : log.levels()) s.events_per_level[lvl] = 0;
    std::set<Activity> seen;
    for (std::size_t i = 0; i < log.size(); ++i) {
        const auto& e = log.event(i);
        ++s.raw_events[e.event_class];
        ++s.events_per_level[e.level];
        if (seen.insert(log.activity(i)).second) ++s.distinct_activities[log.activity(i).source_class];
    }
    return s;
}

}  // namespace ctfminer
