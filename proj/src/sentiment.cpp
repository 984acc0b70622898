#include "ctfminer/sentiment.hpp"

#include "ctfminer/error.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace ctfminer {

namespace {

constexpr double kPctEpsilon = 1e-9;

bool known_kind(const std::string& kind) {
    return kind == "bash" || kind == "msf" || parse_game_type(kind).has_value();
}

bool is_level_exit(const Event& e) {
    return e.game_type == GameType::CorrectAnswerSubmitted || e.game_type == GameType::TrainingFinished;
}

double relative_position(const LevelSpan& span, Timestamp ts) {
    const auto duration = (span.end - span.start).count();
    if (duration <= 0) return ts == span.start ? 0.0 : (ts < span.start ? -1.0 : 2.0);
    return static_cast<double>((ts - span.start).count()) / static_cast<double>(duration);
}

}  // namespace

std::string event_kind(const Event& e) {
    if (e.event_class == EventClass::Game) return std::string(to_string(*e.game_type));
    return std::string(to_string(e.event_class));
}

SentimentConfig SentimentConfig::engagement_defaults() {
    SentimentConfig cfg;
    cfg.weights = {
        {"HintTaken", -5.0}, {"SolutionDisplayed", -20.0}, {"WrongAnswerSubmitted", -1.0},
        {"bash", 1.0},       {"msf", 1.0},
    };
    for (const auto& [k, _] : cfg.weights) cfg.scored_kinds.insert(k);
    return cfg;
}

void SentimentConfig::validate() const {
    if (!(window_pct > 0.0 && window_pct <= 100.0)) throw InvalidConfig("window_pct must be in (0, 100]");
    if (!(step_pct > 0.0 && step_pct <= 100.0)) throw InvalidConfig("step_pct must be in (0, 100]");
    if (!(merge_radius_pct >= 0.0) || !std::isfinite(merge_radius_pct)) {
        throw InvalidConfig("merge_radius_pct must be a non-negative number");
    }
    for (const auto& [kind, w] : weights) {
        if (!known_kind(kind)) throw InvalidConfig("unknown event kind '" + kind + "' in weights");
        if (!std::isfinite(w)) throw InvalidConfig("weight of '" + kind + "' is not finite");
    }
    for (const auto& kind : scored_kinds) {
        if (!weights.contains(kind)) throw InvalidConfig("scored kind '" + kind + "' has no weight");
    }
}

Json to_json(const SentimentConfig& cfg) {
    Json weights = Json::object();
    for (const auto& [k, w] : cfg.weights) weights[k] = w;
    return {{"weights", weights},
            {"window_pct", cfg.window_pct},
            {"step_pct", cfg.step_pct},
            {"scored_kinds", Json(cfg.scored_kinds)},
            {"normalization",
             cfg.normalization == kernels::Normalization::SymmetricMedian ? "symmetric_median" : "literal"},
            {"merge_radius_pct", cfg.merge_radius_pct}};
}

SentimentConfig sentiment_config_from_json(const Json& j) {
    SentimentConfig cfg = SentimentConfig::engagement_defaults();
    if (j.is_null()) return cfg;
    if (!j.is_object()) throw InvalidConfig("sentiment config must be a JSON object");
    try {
        if (j.contains("weights")) {
            cfg.weights = j.at("weights").get<std::map<std::string, double>>();
            cfg.scored_kinds.clear();
            for (const auto& [k, _] : cfg.weights) cfg.scored_kinds.insert(k);
        }
        if (j.contains("scored_kinds")) cfg.scored_kinds = j.at("scored_kinds").get<std::set<std::string>>();
        if (j.contains("window_pct")) cfg.window_pct = j.at("window_pct").get<double>();
        if (j.contains("step_pct")) cfg.step_pct = j.at("step_pct").get<double>();
        if (j.contains("merge_radius_pct")) cfg.merge_radius_pct = j.at("merge_radius_pct").get<double>();
        if (j.contains("normalization")) {
            const auto n = j.at("normalization").get<std::string>();
            if (n == "symmetric_median") {
                cfg.normalization = kernels::Normalization::SymmetricMedian;
            } else if (n == "literal") {
                cfg.normalization = kernels::Normalization::Literal;
            } else {
                throw InvalidConfig("normalization must be symmetric_median or literal");
            }
        }
    } catch (const Json::exception& ex) {
        throw InvalidConfig(std::string("sentiment config: ") + ex.what());
    }
    cfg.validate();
    return cfg;
}

std::optional<std::size_t> WindowGrid::level_slot(int level) const {
    auto it = std::find(levels.begin(), levels.end(), level);
    if (it == levels.end()) return std::nullopt;
    return static_cast<std::size_t>(it - levels.begin());
}

std::optional<std::size_t> WindowGrid::trainee_row(const std::string& trainee) const {
    auto it = std::lower_bound(trainees.begin(), trainees.end(), trainee);
    if (it == trainees.end() || *it != trainee) return std::nullopt;
    return static_cast<std::size_t>(it - trainees.begin());
}

WindowGrid build_window_grid(const ActivityLog& filtered, const SentimentConfig& cfg) {
    cfg.validate();
    WindowGrid grid;
    grid.levels = filtered.levels();
    grid.trainees.assign(filtered.trainees().begin(), filtered.trainees().end());

    for (std::size_t k = 0;; ++k) {
        const double start = static_cast<double>(k) * cfg.step_pct;
        if (start >= 100.0 - kPctEpsilon) break;
        grid.geometry.starts.push_back(start / 100.0);
        grid.geometry.ends.push_back(std::min(start + cfg.window_pct, 100.0) / 100.0);
    }
    std::size_t index = 0;
    for (int level : grid.levels) {
        for (std::size_t k = 0; k < grid.geometry.per_level(); ++k) {
            grid.windows.push_back({index++, level, grid.geometry.starts[k] * 100.0, grid.geometry.ends[k] * 100.0});
        }
    }

    struct Bounds {
        std::optional<Timestamp> start;
        std::optional<Timestamp> exit;
        bool any = false;
    };
    std::map<std::pair<std::string, int>, Bounds> bounds;
    for (const auto& e : filtered.events()) {
        auto& b = bounds[{e.trainee_id, e.level}];
        b.any = true;
        if (e.game_type == GameType::LevelStarted && !b.start) b.start = e.timestamp;
        if (is_level_exit(e)) b.exit = e.timestamp;
    }
    for (const auto& trainee : grid.trainees) {
        for (int level : grid.levels) {
            auto it = bounds.find({trainee, level});
            std::string reason;
            if (it == bounds.end() || !it->second.any) {
                reason = "no events in level";
            } else if (!it->second.start) {
                reason = "no LevelStarted event";
            } else if (!it->second.exit) {
                reason = "level never finished";
            } else if (*it->second.exit < *it->second.start) {
                reason = "level exit precedes LevelStarted";
            }
            if (reason.empty()) {
                grid.spans[{trainee, level}] = {*it->second.start, *it->second.exit};
            } else {
                grid.missing.push_back({trainee, level, reason});
            }
        }
    }
    return grid;
}

WindowGrid build_window_grid(const ActivityLog& log, const SentimentConfig& cfg, const FilterSpec& filter) {
    return build_window_grid(apply(filter, log), cfg);
}

std::vector<std::size_t> event_windows(const WindowGrid& grid, const Event& e) {
    std::vector<std::size_t> out;
    auto span = grid.spans.find({e.trainee_id, e.level});
    if (span == grid.spans.end()) return out;
    const auto slot = grid.level_slot(e.level);
    if (!slot) return out;
    const double pos = relative_position(span->second, e.timestamp);
    const std::size_t per_level = grid.windows_per_level();
    for (std::size_t k = 0; k < per_level; ++k) {
        if (pos >= grid.geometry.starts[k] && pos <= grid.geometry.ends[k]) out.push_back(*slot * per_level + k);
    }
    return out;
}

kernels::Matrix window_score_matrix(const ActivityLog& filtered, const WindowGrid& grid,
                                    const SentimentConfig& cfg, kernels::ExecPolicy policy) {
    std::vector<std::vector<kernels::PositionedEvent>> per_trainee(grid.trainees.size());
    for (const auto& e : filtered.events()) {
        const auto kind = event_kind(e);
        if (!cfg.scored_kinds.contains(kind)) continue;
        auto span = grid.spans.find({e.trainee_id, e.level});
        if (span == grid.spans.end()) continue;
        const auto row = grid.trainee_row(e.trainee_id);
        const auto slot = grid.level_slot(e.level);
        if (!row || !slot) continue;
        per_trainee[*row].push_back({*slot, relative_position(span->second, e.timestamp), cfg.weights.at(kind)});
    }
    return kernels::accumulate_window_scores(per_trainee, grid.geometry, grid.levels.size(), policy);
}

std::vector<WindowScore> window_scores(const ActivityLog& filtered, const WindowGrid& grid,
                                       const SentimentConfig& cfg) {
    const auto raw = window_score_matrix(filtered, grid, cfg);
    std::vector<WindowScore> out;
    for (std::size_t r = 0; r < raw.rows; ++r) {
        for (std::size_t c = 0; c < raw.cols; ++c) out.push_back({grid.trainees[r], c, raw(r, c), 0.0});
    }
    return out;
}

std::vector<double> normalize_window(std::span<const double> raw, kernels::Normalization mode) {
    return kernels::normalize_scores(raw, mode);
}

std::vector<double> cumulative_sum(std::span<const double> normalized) {
    std::vector<double> out(normalized.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < normalized.size(); ++i) {
        acc += normalized[i];
        out[i] = acc;
    }
    return out;
}

std::vector<DisplayPoint> merge_display_points(const std::vector<std::string>& trainees,
                                               const std::vector<std::vector<double>>& cumulative,
                                               double radius_pct) {
    struct Raw {
        double x;
        double y;
        std::size_t row;
    };
    std::vector<Raw> points;
    double ymin = 0.0, ymax = 0.0, xmax = 0.0;
    bool first = true;
    for (std::size_t r = 0; r < cumulative.size(); ++r) {
        for (std::size_t w = 0; w < cumulative[r].size(); ++w) {
            const double y = cumulative[r][w];
            points.push_back({static_cast<double>(w), y, r});
            ymin = first ? y : std::min(ymin, y);
            ymax = first ? y : std::max(ymax, y);
            xmax = std::max(xmax, static_cast<double>(w));
            first = false;
        }
    }
    std::sort(points.begin(), points.end(), [&](const Raw& a, const Raw& b) {
        return std::tie(a.x, a.y, trainees[a.row]) < std::tie(b.x, b.y, trainees[b.row]);
    });
    const double rx = radius_pct / 100.0 * xmax;
    const double ry = radius_pct / 100.0 * (ymax - ymin);

    struct Joint {
        double ax, ay, sx, sy;
        std::vector<DisplayMember> members;
    };
    std::vector<Joint> joints;
    for (const auto& p : points) {
        Joint* target = nullptr;
        for (auto& j : joints) {
            if (std::abs(p.x - j.ax) <= rx && std::abs(p.y - j.ay) <= ry) {
                target = &j;
                break;
            }
        }
        if (!target) {
            joints.push_back({p.x, p.y, 0.0, 0.0, {}});
            target = &joints.back();
        }
        target->sx += p.x;
        target->sy += p.y;
        target->members.push_back({trainees[p.row], static_cast<std::size_t>(p.x)});
    }
    std::vector<DisplayPoint> out;
    out.reserve(joints.size());
    for (auto& j : joints) {
        const auto n = static_cast<double>(j.members.size());
        out.push_back({j.sx / n, j.sy / n, std::move(j.members)});
    }
    return out;
}

double SentimentResult::level_mean(std::size_t trainee_row, std::size_t level_slot) const {
    const std::size_t per_level = grid.windows_per_level();
    if (per_level == 0) return 0.0;
    double s = 0.0;
    for (std::size_t k = 0; k < per_level; ++k) s += normalized(trainee_row, level_slot * per_level + k);
    return s / static_cast<double>(per_level);
}

SentimentResult compute_sentiment(const ActivityLog& filtered, const SentimentConfig& cfg,
                                  kernels::ExecPolicy policy) {
    SentimentResult result;
    result.config = cfg;
    result.grid = build_window_grid(filtered, cfg);
    const auto& grid = result.grid;
    result.raw = window_score_matrix(filtered, grid, cfg, policy);

    std::vector<unsigned char> mask(result.raw.data.size(), 0);
    for (std::size_t r = 0; r < grid.trainees.size(); ++r) {
        for (const auto& w : grid.windows) {
            mask[r * result.raw.cols + w.index] = grid.included(grid.trainees[r], w.level) ? 1 : 0;
        }
    }
    result.normalized = kernels::normalize_windows(result.raw, mask, cfg.normalization, policy);

    std::vector<std::vector<double>> cumulative;
    for (std::size_t r = 0; r < grid.trainees.size(); ++r) {
        cumulative.push_back(cumulative_sum(result.normalized.row(r)));
    }
    result.display_points = merge_display_points(grid.trainees, cumulative, cfg.merge_radius_pct);

    std::map<std::string, std::vector<std::size_t>> joint_of;
    for (std::size_t j = 0; j < result.display_points.size(); ++j) {
        for (const auto& m : result.display_points[j].members) joint_of[m.trainee_id].push_back(j);
    }
    for (std::size_t r = 0; r < grid.trainees.size(); ++r) {
        auto joints = joint_of[grid.trainees[r]];
        std::sort(joints.begin(), joints.end());
        joints.erase(std::unique(joints.begin(), joints.end()), joints.end());
        result.series.push_back({grid.trainees[r], std::move(cumulative[r]), std::move(joints)});
    }
    return result;
}

Json to_json(const SentimentResult& r) {
    const auto& grid = r.grid;
    Json windows = Json::array();
    for (const auto& w : grid.windows) {
        windows.push_back({{"index", w.index}, {"level", w.level}, {"start_pct", w.start_pct}, {"end_pct", w.end_pct}});
    }
    Json missing = Json::array();
    for (const auto& m : grid.missing) {
        missing.push_back({{"trainee_id", m.trainee_id}, {"level", m.level}, {"reason", m.reason}});
    }
    Json spans = Json::array();
    for (const auto& [key, span] : grid.spans) {
        spans.push_back({{"trainee_id", key.first},
                         {"level", key.second},
                         {"start", format_timestamp(span.start)},
                         {"end", format_timestamp(span.end)}});
    }
    Json series = Json::array();
    for (std::size_t row = 0; row < r.series.size(); ++row) {
        const auto& s = r.series[row];
        auto raw = r.raw.row(row);
        auto norm = r.normalized.row(row);
        series.push_back({{"trainee_id", s.trainee_id},
                          {"raw", std::vector<double>(raw.begin(), raw.end())},
                          {"normalized", std::vector<double>(norm.begin(), norm.end())},
                          {"cumulative", s.cumulative},
                          {"display_points", s.display_points}});
    }
    Json points = Json::array();
    for (const auto& p : r.display_points) {
        Json members = Json::array();
        for (const auto& m : p.members) members.push_back({{"trainee_id", m.trainee_id}, {"window", m.window}});
        points.push_back({{"x", p.x}, {"y", p.y}, {"members", members}});
    }
    return {{"config", to_json(r.config)},
            {"grid",
             {{"levels", grid.levels},
              {"windows_per_level", grid.windows_per_level()},
              {"window_count", grid.windows.size()},
              {"windows", windows},
              {"missing_boundaries", missing},
              {"spans", spans}}},
            {"trainees", grid.trainees},
            {"series", series},
            {"display_points", points}};
}

}  // namespace ctfminer
