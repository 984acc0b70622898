#include "ctfminer/discovery.hpp"

#include "ctfminer/error.hpp"
#include "ctfminer/sentiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace ctfminer {

std::vector<Trace> build_traces(const ActivityLog& filtered) {
    std::map<std::string, Trace> by_trainee;
    for (std::size_t i = 0; i < filtered.size(); ++i) {
        const auto& e = filtered.event(i);
        auto& trace = by_trainee[e.trainee_id];
        trace.trainee_id = e.trainee_id;
        trace.steps.push_back({filtered.activity(i), e.timestamp});
    }
    std::vector<Trace> out;
    out.reserve(by_trainee.size());
    for (auto& [_, t] : by_trainee) out.push_back(std::move(t));
    return out;
}

std::vector<Trace> build_traces(const ActivityLog& log, const FilterSpec& filter) {
    return build_traces(apply(filter, log));
}

std::string_view to_string(Transition t) {
    switch (t) {
        case Transition::Within: return "within";
        case Transition::Forward: return "forward";
        case Transition::Skip: return "skip";
        case Transition::Back: return "back";
    }
    return "within";
}

std::optional<std::size_t> ProcessGraph::node_index(const Activity& a) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), a,
                               [](const GraphNode& n, const Activity& x) { return n.activity < x; });
    if (it == nodes.end() || it->activity != a) return std::nullopt;
    return static_cast<std::size_t>(it - nodes.begin());
}

std::optional<std::size_t> ProcessGraph::edge_index(std::size_t from, std::size_t to) const {
    auto key = std::make_pair(from, to);
    auto it = std::lower_bound(edges.begin(), edges.end(), key, [](const GraphEdge& e, const auto& k) {
        return std::make_pair(e.from, e.to) < k;
    });
    if (it == edges.end() || it->from != from || it->to != to) return std::nullopt;
    return static_cast<std::size_t>(it - edges.begin());
}

double dependency_score(std::size_t ab, std::size_t ba, bool self_loop) {
    if (self_loop) return static_cast<double>(ab) / (static_cast<double>(ab) + 1.0);
    const double a = static_cast<double>(ab);
    const double b = static_cast<double>(ba);
    return (a - b) / (a + b + 1.0);
}

ProcessGraph discover(const std::vector<Trace>& traces, double dependency_threshold) {
    ProcessGraph g;
    g.dependency_threshold = dependency_threshold;

    std::set<Activity> activities;
    for (const auto& t : traces) {
        for (const auto& s : t.steps) activities.insert(s.activity);
    }
    for (const auto& a : activities) g.nodes.push_back({a, activity_id(a), 0, {}, false, false, 0});
    for (std::size_t i = 0; i < g.nodes.size(); ++i) g.level_partitions[g.nodes[i].activity.level].push_back(i);

    std::map<std::pair<std::size_t, std::size_t>, GraphEdge> edges;
    std::vector<double> position_sum(g.nodes.size(), 0.0);
    for (const auto& t : traces) {
        if (t.steps.empty()) continue;
        g.trainees.insert(t.trainee_id);
        std::vector<std::size_t> idx;
        idx.reserve(t.steps.size());
        for (const auto& s : t.steps) idx.push_back(*g.node_index(s.activity));

        std::size_t segment_start = 0;
        for (std::size_t i = 0; i < idx.size(); ++i) {
            auto& node = g.nodes[idx[i]];
            ++node.frequency;
            node.trainees.insert(t.trainee_id);
            const bool new_segment = i == 0 || t.steps[i].activity.level != t.steps[i - 1].activity.level;
            if (new_segment) {
                segment_start = i;
                node.entry = true;
            }
            position_sum[idx[i]] += static_cast<double>(i - segment_start);
            const bool segment_end = i + 1 == idx.size() || t.steps[i + 1].activity.level != t.steps[i].activity.level;
            if (segment_end) node.exit = true;

            if (i == 0) continue;
            auto& e = edges[{idx[i - 1], idx[i]}];
            e.from = idx[i - 1];
            e.to = idx[i];
            ++e.frequency;
            e.trainees.insert(t.trainee_id);
            e.durations.push_back(t.steps[i].timestamp - t.steps[i - 1].timestamp);
        }
    }

    for (auto& [key, e] : edges) {
        auto reverse = edges.find({key.second, key.first});
        const std::size_t ba = reverse == edges.end() ? 0 : reverse->second.frequency;
        e.dependency = dependency_score(e.frequency, ba, key.first == key.second);
        const int d = g.nodes[e.to].activity.level - g.nodes[e.from].activity.level;
        e.transition = d == 0 ? Transition::Within : d == 1 ? Transition::Forward : d > 1 ? Transition::Skip
                                                                                           : Transition::Back;
    }

    if (dependency_threshold > 0.0) {
        std::map<std::pair<std::size_t, std::size_t>, GraphEdge> kept;
        for (const auto& [key, e] : edges) {
            if (e.dependency >= dependency_threshold) kept.emplace(key, e);
        }
        auto better = [](const GraphEdge& a, const GraphEdge& b) {
            if (a.dependency != b.dependency) return a.dependency > b.dependency;
            if (a.frequency != b.frequency) return a.frequency > b.frequency;
            return std::make_pair(a.from, a.to) < std::make_pair(b.from, b.to);
        };
        for (std::size_t n = 0; n < g.nodes.size(); ++n) {
            auto restore = [&](bool incoming) {
                const GraphEdge* best = nullptr;
                bool has_kept = false;
                for (const auto& [key, e] : edges) {
                    if ((incoming ? key.second : key.first) != n) continue;
                    if (kept.contains(key)) has_kept = true;
                    if (!best || better(e, *best)) best = &e;
                }
                if (best && !has_kept) kept.emplace(std::make_pair(best->from, best->to), *best);
            };
            if (!g.nodes[n].entry) restore(true);
            if (!g.nodes[n].exit) restore(false);
        }
        edges = std::move(kept);
    }

    for (auto& [_, e] : edges) g.edges.push_back(std::move(e));

    for (auto& [level, members] : g.level_partitions) {
        std::vector<std::size_t> order = members;
        auto mean_pos = [&](std::size_t i) { return position_sum[i] / static_cast<double>(g.nodes[i].frequency); };
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (mean_pos(a) != mean_pos(b)) return mean_pos(a) < mean_pos(b);
            return a < b;
        });
        for (std::size_t r = 0; r < order.size(); ++r) g.nodes[order[r]].rank = static_cast<int>(r);
    }
    return g;
}

std::string_view to_string(PerformanceStat s) {
    switch (s) {
        case PerformanceStat::Mean: return "mean";
        case PerformanceStat::Median: return "median";
        case PerformanceStat::Min: return "min";
        case PerformanceStat::Max: return "max";
    }
    return "mean";
}

std::optional<PerformanceStat> parse_performance_stat(std::string_view s) {
    if (s == "mean") return PerformanceStat::Mean;
    if (s == "median") return PerformanceStat::Median;
    if (s == "min") return PerformanceStat::Min;
    if (s == "max") return PerformanceStat::Max;
    return std::nullopt;
}

double PerformanceStats::get(PerformanceStat s) const {
    switch (s) {
        case PerformanceStat::Mean: return mean;
        case PerformanceStat::Median: return median;
        case PerformanceStat::Min: return min;
        case PerformanceStat::Max: return max;
    }
    return mean;
}

PerformanceStats performance_stats(const std::vector<Millis>& durations) {
    PerformanceStats s;
    if (durations.empty()) return s;
    std::vector<double> sec;
    sec.reserve(durations.size());
    for (auto d : durations) sec.push_back(static_cast<double>(d.count()) / 1000.0);
    std::sort(sec.begin(), sec.end());
    const std::size_t n = sec.size();
    s.min = sec.front();
    s.max = sec.back();
    s.median = n % 2 == 1 ? sec[n / 2] : (sec[n / 2 - 1] + sec[n / 2]) / 2.0;
    // sum in integer milliseconds so the mean is exact before the final division
    long long total_ms = 0;
    for (auto d : durations) total_ms += d.count();
    s.mean = static_cast<double>(total_ms) / 1000.0 / static_cast<double>(n);
    s.mean = std::clamp(s.mean, s.min, s.max);
    return s;
}

std::vector<double> performance_view(const ProcessGraph& graph, PerformanceStat stat) {
    std::vector<double> out;
    out.reserve(graph.edges.size());
    for (const auto& e : graph.edges) out.push_back(performance_stats(e.durations).get(stat));
    return out;
}

Highlight highlight_paths(const ProcessGraph& graph, const std::set<std::string>& trainees) {
    for (const auto& t : trainees) {
        if (!graph.trainees.contains(t)) throw UnknownTrainee("trainee '" + t + "' is not part of the graph");
    }
    auto meets = [&](const std::set<std::string>& s) {
        return std::any_of(trainees.begin(), trainees.end(), [&](const auto& t) { return s.contains(t); });
    };
    Highlight h;
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
        if (meets(graph.nodes[i].trainees)) h.nodes.push_back(i);
    }
    for (std::size_t i = 0; i < graph.edges.size(); ++i) {
        if (meets(graph.edges[i].trainees)) h.edges.push_back(i);
    }
    return h;
}

std::set<Activity> nearby_activities(const ActivityLog& filtered, Timestamp center, Millis span,
                                     const std::set<std::string>& trainees) {
    if (span.count() <= 0) throw InvalidConfig("proximity span must be positive");
    std::set<Activity> out;
    for (std::size_t i = 0; i < filtered.size(); ++i) {
        const auto& e = filtered.event(i);
        if (!trainees.contains(e.trainee_id)) continue;
        const auto offset = (e.timestamp - center).count();
        if (std::llabs(offset) * 2 <= span.count()) out.insert(filtered.activity(i));
    }
    return out;
}

std::set<Activity> nearby_activities(const ActivityLog& filtered, const WindowGrid& grid, std::size_t window,
                                     const std::set<std::string>& trainees) {
    std::set<Activity> out;
    for (std::size_t i = 0; i < filtered.size(); ++i) {
        const auto& e = filtered.event(i);
        if (!trainees.contains(e.trainee_id)) continue;
        const auto windows = event_windows(grid, e);
        if (std::find(windows.begin(), windows.end(), window) != windows.end()) out.insert(filtered.activity(i));
    }
    return out;
}

std::string_view to_string(OverviewMetric m) {
    switch (m) {
        case OverviewMetric::CommandCount: return "command_count";
        case OverviewMetric::RelativeTime: return "relative_time";
        case OverviewMetric::Sentiment: return "sentiment";
    }
    return "command_count";
}

std::optional<OverviewMetric> parse_overview_metric(std::string_view s) {
    if (s == "command_count") return OverviewMetric::CommandCount;
    if (s == "relative_time") return OverviewMetric::RelativeTime;
    if (s == "sentiment") return OverviewMetric::Sentiment;
    return std::nullopt;
}

Histogram make_histogram(const std::vector<double>& values, std::size_t bucket_count) {
    Histogram h;
    h.buckets.assign(bucket_count, 0);
    if (values.empty()) return h;
    h.min = *std::min_element(values.begin(), values.end());
    h.max = *std::max_element(values.begin(), values.end());
    const double width = h.max - h.min;
    for (double v : values) {
        std::size_t b = 0;
        if (width > 0.0) {
            b = static_cast<std::size_t>(std::floor((v - h.min) / width * static_cast<double>(bucket_count)));
            b = std::min(b, bucket_count - 1);
        }
        ++h.buckets[b];
    }
    return h;
}

std::vector<LevelOverview> level_overview(const ActivityLog& filtered, const std::set<OverviewMetric>& metrics,
                                          const SentimentResult* sentiment) {
    struct LevelStats {
        std::size_t commands = 0;
        std::optional<Timestamp> started, exited, first, last;
    };
    struct TraineeStats {
        Timestamp first{}, last{};
        bool any = false;
        std::map<int, LevelStats> levels;
    };
    std::map<std::string, TraineeStats> per_trainee;
    std::set<int> populated;
    for (const auto& e : filtered.events()) {
        auto& t = per_trainee[e.trainee_id];
        if (!t.any) t.first = e.timestamp;
        t.last = e.timestamp;
        t.any = true;
        auto& l = t.levels[e.level];
        populated.insert(e.level);
        if (is_command(e.event_class)) ++l.commands;
        if (!l.first) l.first = e.timestamp;
        l.last = e.timestamp;
        if (e.game_type == GameType::LevelStarted && !l.started) l.started = e.timestamp;
        if (e.game_type == GameType::CorrectAnswerSubmitted || e.game_type == GameType::TrainingFinished) {
            l.exited = e.timestamp;
        }
    }

    auto summarize = [](const std::vector<double>& values) {
        MetricSummary m;
        if (!values.empty()) {
            m.average = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
        }
        m.histogram = make_histogram(values);
        return m;
    };

    std::vector<LevelOverview> out;
    for (int level : filtered.levels()) {
        LevelOverview o;
        o.level = level;
        o.empty = !populated.contains(level);
        o.trainee_count = per_trainee.size();
        if (metrics.contains(OverviewMetric::CommandCount)) {
            std::vector<double> values;
            for (const auto& [_, t] : per_trainee) {
                auto it = t.levels.find(level);
                values.push_back(it == t.levels.end() ? 0.0 : static_cast<double>(it->second.commands));
            }
            o.metrics[OverviewMetric::CommandCount] = summarize(values);
        }
        if (metrics.contains(OverviewMetric::RelativeTime)) {
            std::vector<double> values;
            for (const auto& [_, t] : per_trainee) {
                auto it = t.levels.find(level);
                const auto total = (t.last - t.first).count();
                if (it == t.levels.end() || total <= 0) {
                    values.push_back(0.0);
                    continue;
                }
                const auto& l = it->second;
                const Timestamp start = l.started.value_or(*l.first);
                const Timestamp end = l.exited && *l.exited >= start ? *l.exited : *l.last;
                const auto spent = std::max<long long>(0, (end - start).count());
                values.push_back(static_cast<double>(spent) / static_cast<double>(total));
            }
            o.metrics[OverviewMetric::RelativeTime] = summarize(values);
        }
        if (metrics.contains(OverviewMetric::Sentiment) && sentiment != nullptr) {
            std::vector<double> values;
            if (auto slot = sentiment->grid.level_slot(level)) {
                for (std::size_t r = 0; r < sentiment->grid.trainees.size(); ++r) {
                    if (sentiment->grid.included(sentiment->grid.trainees[r], level)) {
                        values.push_back(sentiment->level_mean(r, *slot));
                    }
                }
            }
            o.metrics[OverviewMetric::Sentiment] = summarize(values);
        }
        out.push_back(std::move(o));
    }
    return out;
}

namespace {

Json trainees_json(const std::set<std::string>& s) { return Json(s); }

}  // namespace

Json to_json(const ProcessGraph& graph, const std::optional<PerformanceStat>& stat) {
    Json nodes = Json::array();
    for (const auto& n : graph.nodes) {
        nodes.push_back({{"id", n.id},
                         {"label", n.activity.label},
                         {"class", std::string(to_string(n.activity.source_class))},
                         {"level", n.activity.level},
                         {"frequency", n.frequency},
                         {"trainees", trainees_json(n.trainees)},
                         {"entry", n.entry},
                         {"exit", n.exit},
                         {"layout", {{"layer", n.activity.level}, {"rank", n.rank}}}});
    }
    Json edges = Json::array();
    for (const auto& e : graph.edges) {
        const auto stats = performance_stats(e.durations);
        std::vector<long long> durations;
        for (auto d : e.durations) durations.push_back(d.count());
        Json item = {{"from", graph.nodes[e.from].id},
                     {"to", graph.nodes[e.to].id},
                     {"frequency", e.frequency},
                     {"trainees", trainees_json(e.trainees)},
                     {"durations_ms", durations},
                     {"stats_seconds",
                      {{"mean", stats.mean}, {"median", stats.median}, {"min", stats.min}, {"max", stats.max}}},
                     {"dependency", e.dependency},
                     {"transition", std::string(to_string(e.transition))},
                     {"back_edge", e.transition == Transition::Back}};
        if (stat) item["value_seconds"] = stats.get(*stat);
        edges.push_back(std::move(item));
    }
    Json levels = Json::array();
    for (const auto& [level, members] : graph.level_partitions) {
        Json ids = Json::array(), entries = Json::array(), exits = Json::array();
        for (auto i : members) {
            ids.push_back(graph.nodes[i].id);
            if (graph.nodes[i].entry) entries.push_back(graph.nodes[i].id);
            if (graph.nodes[i].exit) exits.push_back(graph.nodes[i].id);
        }
        levels.push_back({{"level", level}, {"nodes", ids}, {"entries", entries}, {"exits", exits}});
    }
    Json j = {{"nodes", nodes},
              {"edges", edges},
              {"levels", levels},
              {"trainees", trainees_json(graph.trainees)},
              {"dependency_threshold", graph.dependency_threshold},
              {"mode", stat ? "performance" : "frequency"}};
    if (stat) j["stat"] = std::string(to_string(*stat));
    return j;
}

namespace {

std::string dot_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        if (c == '\n') {
            out += "\\n";
            continue;
        }
        out.push_back(c);
    }
    return out;
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

std::string to_dot(const ProcessGraph& graph, const std::optional<PerformanceStat>& stat) {
    std::string out = "digraph process {\n";
    if (graph.nodes.empty()) return out + "}\n";
    out += "  rankdir=TB;\n  node [shape=box];\n";
    std::size_t max_freq = 1;
    for (const auto& e : graph.edges) max_freq = std::max(max_freq, e.frequency);
    for (const auto& [level, members] : graph.level_partitions) {
        out += "  subgraph \"cluster_level_" + std::to_string(level) + "\" {\n";
        out += "    label=\"level " + std::to_string(level) + "\";\n";
        for (auto i : members) {
            const auto& n = graph.nodes[i];
            out += "    \"" + n.id + "\" [label=\"" + dot_escape(n.activity.label) + "\\n(" +
                   std::string(to_string(n.activity.source_class)) + ", " + std::to_string(n.frequency) + ")\"];\n";
        }
        out += "  }\n";
    }
    for (const auto& e : graph.edges) {
        const double width = 1.0 + 4.0 * static_cast<double>(e.frequency) / static_cast<double>(max_freq);
        const std::string label =
            stat ? fixed(performance_stats(e.durations).get(*stat), 1) + "s" : std::to_string(e.frequency);
        out += "  \"" + graph.nodes[e.from].id + "\" -> \"" + graph.nodes[e.to].id + "\" [label=\"" + label +
               "\", penwidth=" + fixed(width, 2);
        if (e.transition == Transition::Back) out += ", style=dashed";
        out += "];\n";
    }
    return out + "}\n";
}

Json to_json(const std::vector<LevelOverview>& overview) {
    Json out = Json::array();
    for (const auto& o : overview) {
        Json metrics = Json::object();
        for (const auto& [m, s] : o.metrics) {
            metrics[std::string(to_string(m))] = {
                {"average", s.average},
                {"histogram", {{"min", s.histogram.min}, {"max", s.histogram.max}, {"buckets", s.histogram.buckets}}}};
        }
        out.push_back({{"level", o.level}, {"empty", o.empty}, {"trainee_count", o.trainee_count}, {"metrics", metrics}});
    }
    return out;
}

}  // namespace ctfminer
