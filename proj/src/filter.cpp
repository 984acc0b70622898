#include "ctfminer/filter.hpp"

#include "ctfminer/clustering.hpp"
#include "ctfminer/error.hpp"

#include <algorithm>
#include <limits>
#include <regex>

namespace ctfminer {

namespace {

Json classes_json(const std::set<EventClass>& classes) {
    Json out = Json::array();
    for (auto c : classes) out.push_back(std::string(to_string(c)));
    return out;
}

bool is_rule_target(GameType t) {
    return t == GameType::HintTaken || t == GameType::SolutionDisplayed || t == GameType::WrongAnswerSubmitted;
}

bool level_included(const FilterSpec& spec, int level) {
    if (!spec.included_levels) return true;
    const auto& lv = *spec.included_levels;
    return std::find(lv.begin(), lv.end(), level) != lv.end();
}

// Compiled command rule; keyword rules stay substring matches.
struct CompiledRule {
    const CommandRule* rule;
    std::optional<std::regex> re;

    bool matches(const std::string& content) const {
        if (re) return std::regex_search(content, *re);
        return content.find(rule->pattern) != std::string::npos;
    }
};

std::vector<CompiledRule> compile(const std::vector<CommandRule>& rules) {
    std::vector<CompiledRule> out;
    for (const auto& r : rules) {
        CompiledRule c{&r, std::nullopt};
        if (r.is_regex) c.re.emplace(r.pattern);
        out.push_back(std::move(c));
    }
    return out;
}

bool passes(const std::vector<CompiledRule>& rules, const Event& e) {
    for (const auto& c : rules) {
        if (!c.rule->target_classes.contains(e.event_class)) continue;
        const bool hit = c.matches(e.content);
        if (c.rule->mode == RuleMode::Include ? !hit : hit) return false;
    }
    return true;
}

}  // namespace

Json to_json(const FilterSpec& spec) {
    Json j = Json::object();
    if (spec.included_trainees) j["included_trainees"] = Json(*spec.included_trainees);
    if (spec.included_levels) j["included_levels"] = Json(*spec.included_levels);
    Json rules = Json::array();
    for (const auto& r : spec.command_rules) {
        rules.push_back({{"pattern", r.pattern},
                         {"regex", r.is_regex},
                         {"mode", r.mode == RuleMode::Include ? "include" : "exclude"},
                         {"target_classes", classes_json(r.target_classes)}});
    }
    j["command_rules"] = rules;
    Json game = Json::array();
    for (const auto& r : spec.game_event_rules) {
        game.push_back({{"game_type", std::string(to_string(r.game_type))},
                        {"level", r.level},
                        {"mode", r.mode == TraineeRuleMode::RequireTrainee ? "require_trainee" : "exclude_trainee"}});
    }
    j["game_event_rules"] = game;
    return j;
}

FilterSpec filter_spec_from_json(const Json& j) {
    if (j.is_null()) return {};
    if (!j.is_object()) throw InvalidSpec("filter must be a JSON object");
    static const std::set<std::string> known = {"included_trainees", "included_levels", "command_rules",
                                                "game_event_rules"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.contains(it.key())) throw InvalidSpec("unknown filter field '" + it.key() + "'");
    }
    FilterSpec spec;
    try {
        if (j.contains("included_trainees") && !j.at("included_trainees").is_null()) {
            spec.included_trainees = j.at("included_trainees").get<std::set<std::string>>();
        }
        if (j.contains("included_levels") && !j.at("included_levels").is_null()) {
            spec.included_levels = j.at("included_levels").get<std::vector<int>>();
        }
        for (const auto& r : j.value("command_rules", Json::array())) {
            CommandRule rule;
            rule.pattern = r.at("pattern").get<std::string>();
            rule.is_regex = r.value("regex", false);
            const auto mode = r.value("mode", std::string("exclude"));
            if (mode != "include" && mode != "exclude") throw InvalidSpec("command rule mode must be include|exclude");
            rule.mode = mode == "include" ? RuleMode::Include : RuleMode::Exclude;
            if (r.contains("target_classes")) {
                rule.target_classes.clear();
                for (const auto& c : r.at("target_classes")) {
                    auto cls = parse_event_class(c.get<std::string>());
                    if (!cls) throw InvalidSpec("unknown event class " + c.dump());
                    rule.target_classes.insert(*cls);
                }
            }
            spec.command_rules.push_back(std::move(rule));
        }
        for (const auto& r : j.value("game_event_rules", Json::array())) {
            GameEventRule rule;
            auto gt = parse_game_type(r.at("game_type").get<std::string>());
            if (!gt) throw InvalidSpec("unknown game_type " + r.at("game_type").dump());
            rule.game_type = *gt;
            rule.level = r.at("level").get<int>();
            const auto mode = r.value("mode", std::string("require_trainee"));
            if (mode != "require_trainee" && mode != "exclude_trainee") {
                throw InvalidSpec("game event rule mode must be require_trainee|exclude_trainee");
            }
            rule.mode = mode == "require_trainee" ? TraineeRuleMode::RequireTrainee : TraineeRuleMode::ExcludeTrainee;
            spec.game_event_rules.push_back(rule);
        }
    } catch (const Json::exception& ex) {
        throw InvalidSpec(std::string("filter: ") + ex.what());
    }
    return spec;
}

Json to_json(const ValidationReport& r) {
    return {{"valid", r.ok()}, {"errors", r.errors}, {"warnings", r.warnings}};
}

ValidationReport validate_structure(const FilterSpec& spec) {
    ValidationReport report;
    if (spec.included_levels) {
        std::set<int> levels(spec.included_levels->begin(), spec.included_levels->end());
        if (levels.empty()) {
            report.warnings.push_back("no levels selected; the result will be empty");
        } else if (*levels.rbegin() - *levels.begin() + 1 != static_cast<int>(levels.size())) {
            std::string list;
            for (int l : levels) list += (list.empty() ? "" : ",") + std::to_string(l);
            report.errors.push_back("levels {" + list + "} are not contiguous; only subsequent levels can be selected");
        }
    }
    for (const auto& r : spec.command_rules) {
        if (r.pattern.empty()) report.errors.push_back("command rule with empty pattern");
        if (r.target_classes.empty() || r.target_classes.contains(EventClass::Game)) {
            report.errors.push_back("command rule '" + r.pattern + "' must target bash and/or msf events");
        }
        if (r.is_regex) {
            try {
                std::regex re(r.pattern);
            } catch (const std::regex_error& ex) {
                report.errors.push_back("pattern '" + r.pattern + "' does not compile: " + ex.what());
            }
        }
    }
    for (const auto& r : spec.game_event_rules) {
        if (!is_rule_target(r.game_type)) {
            report.errors.push_back(std::string(to_string(r.game_type)) +
                                    " is a mandatory progress event and cannot be a rule target");
        }
        if (!level_included(spec, r.level)) {
            if (r.mode == TraineeRuleMode::RequireTrainee) {
                report.errors.push_back("require rule on level " + std::to_string(r.level) +
                                        " which the level selection excludes");
            } else {
                report.warnings.push_back("exclude rule on level " + std::to_string(r.level) +
                                          " which the level selection excludes");
            }
        }
    }
    return report;
}

ValidationReport validate(const FilterSpec& spec, const ActivityLog& log) {
    ValidationReport report = validate_structure(spec);
    if (spec.included_trainees) {
        for (const auto& t : *spec.included_trainees) {
            if (!log.trainees().contains(t)) report.errors.push_back("unknown trainee '" + t + "'");
        }
    }
    const auto& known = log.levels();
    auto known_level = [&](int l) { return std::find(known.begin(), known.end(), l) != known.end(); };
    if (spec.included_levels) {
        for (int l : *spec.included_levels) {
            if (!known_level(l)) report.warnings.push_back("level " + std::to_string(l) + " has no events");
        }
    }
    for (const auto& r : spec.game_event_rules) {
        if (!known_level(r.level)) {
            report.warnings.push_back("game event rule refers to level " + std::to_string(r.level) +
                                      " which has no events");
        }
    }
    return report;
}

std::set<std::string> surviving_trainees(const FilterSpec& spec, const ActivityLog& log) {
    std::set<std::string> out;
    for (const auto& t : log.trainees()) {
        if (!spec.included_trainees || spec.included_trainees->contains(t)) out.insert(t);
    }
    for (const auto& rule : spec.game_event_rules) {
        std::set<std::string> has_event;
        for (const auto& e : log.events()) {
            if (e.event_class == EventClass::Game && e.game_type == rule.game_type && e.level == rule.level) {
                has_event.insert(e.trainee_id);
            }
        }
        std::erase_if(out, [&](const std::string& t) {
            const bool has = has_event.contains(t);
            return rule.mode == TraineeRuleMode::RequireTrainee ? !has : has;
        });
    }
    return out;
}

ActivityLog apply(const FilterSpec& spec, const ActivityLog& log) {
    const auto report = validate_structure(spec);
    if (!report.ok()) throw InvalidSpec(report.errors.front());

    const auto trainees = surviving_trainees(spec, log);
    const auto rules = compile(spec.command_rules);
    std::vector<Event> events;
    std::vector<Activity> activities;
    for (std::size_t i = 0; i < log.size(); ++i) {
        const auto& e = log.event(i);
        if (!trainees.contains(e.trainee_id) || !level_included(spec, e.level)) continue;
        if (is_command(e.event_class) && !passes(rules, e)) continue;
        events.push_back(e);
        activities.push_back(log.activity(i));
    }
    std::vector<int> levels;
    if (spec.included_levels) {
        std::set<int> s(spec.included_levels->begin(), spec.included_levels->end());
        levels.assign(s.begin(), s.end());
    } else {
        levels = log.levels();
    }
    return ActivityLog::build(log.dataset_id(), std::move(events), std::move(activities), std::move(levels));
}

Json to_json(const std::vector<TraineeVisibility>& list) {
    Json out = Json::array();
    for (const auto& t : list) {
        Json item = {{"trainee_id", t.trainee_id}, {"visible", t.visible}};
        if (t.cluster) item["cluster"] = *t.cluster;
        out.push_back(std::move(item));
    }
    return out;
}

std::vector<TraineeVisibility> suppression_selection(const SuppressionState& state,
                                                     const std::set<std::string>& all_trainees,
                                                     const ClusterResult* clusters,
                                                     SuppressionSort sort) {
    if (sort == SuppressionSort::ByCluster && clusters == nullptr) {
        throw MissingClusters("cluster ordering requested without a clustering result");
    }
    std::vector<TraineeVisibility> out;
    for (const auto& t : all_trainees) {
        TraineeVisibility v{t, state.visible_trainees.contains(t), std::nullopt};
        if (clusters) {
            if (auto it = clusters->assignments.find(t); it != clusters->assignments.end()) v.cluster = it->second;
        }
        out.push_back(std::move(v));
    }
    if (sort == SuppressionSort::ByCluster) {
        std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
            // unclustered trainees go last
            const int ca = a.cluster.value_or(std::numeric_limits<int>::max());
            const int cb = b.cluster.value_or(std::numeric_limits<int>::max());
            return ca < cb;
        });
    }
    return out;
}

SuppressionState toggle_cluster(SuppressionState state, const ClusterResult& clusters, int cluster, bool visible) {
    for (const auto& [trainee, c] : clusters.assignments) {
        if (c != cluster) continue;
        if (visible) {
            state.visible_trainees.insert(trainee);
        } else {
            state.visible_trainees.erase(trainee);
        }
    }
    return state;
}

FilterSpec suppression_to_filter(const SuppressionState& state, FilterSpec base) {
    std::set<std::string> keep = state.visible_trainees;
    if (base.included_trainees) {
        std::erase_if(keep, [&](const std::string& t) { return !base.included_trainees->contains(t); });
    }
    base.included_trainees = std::move(keep);
    return base;
}

}  // namespace ctfminer
