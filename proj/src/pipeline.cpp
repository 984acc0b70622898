#include "ctfminer/pipeline.hpp"

#include "ctfminer/error.hpp"

#include <algorithm>

namespace ctfminer {

namespace {

void reject_unknown(const Json& j, const std::set<std::string>& known, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.contains(it.key())) throw InvalidSpec("unknown " + where + " field '" + it.key() + "'");
    }
}

template <typename T, typename F>
T section(const Json& j, const char* key, F parse) {
    return j.contains(key) ? parse(j.at(key)) : parse(Json());
}

GraphOptions graph_options_from_json(const Json& j) {
    GraphOptions g;
    if (j.is_null()) return g;
    if (!j.is_object()) throw InvalidSpec("graph options must be a JSON object");
    reject_unknown(j, {"mode", "stat", "dependency_threshold", "highlight_trainees", "include_dot"}, "graph");
    const auto mode = j.value("mode", std::string("frequency"));
    if (mode == "performance") {
        const auto stat = j.value("stat", std::string("mean"));
        g.stat = parse_performance_stat(stat);
        if (!g.stat) throw InvalidSpec("unknown performance statistic '" + stat + "'");
    } else if (mode != "frequency") {
        throw InvalidSpec("graph mode must be frequency or performance");
    } else if (j.contains("stat") && !j.at("stat").is_null()) {
        throw InvalidSpec("stat only applies to the performance mode");
    }
    g.dependency_threshold = j.value("dependency_threshold", 0.0);
    if (!(g.dependency_threshold >= 0.0 && g.dependency_threshold <= 1.0)) {
        throw InvalidSpec("dependency_threshold must lie in [0, 1]");
    }
    if (j.contains("highlight_trainees") && !j.at("highlight_trainees").is_null()) {
        g.highlight = j.at("highlight_trainees").get<std::set<std::string>>();
    }
    g.include_dot = j.value("include_dot", false);
    return g;
}

Json to_json(const GraphOptions& g) {
    Json j = {{"mode", g.stat ? "performance" : "frequency"},
              {"stat", g.stat ? Json(std::string(to_string(*g.stat))) : Json()},
              {"dependency_threshold", g.dependency_threshold},
              {"highlight_trainees", g.highlight ? Json(*g.highlight) : Json()},
              {"include_dot", g.include_dot}};
    return j;
}

ProximityOptions proximity_from_json(const Json& j) {
    ProximityOptions p;
    if (j.is_null()) return p;
    if (!j.is_object()) throw InvalidSpec("proximity options must be a JSON object");
    reject_unknown(j, {"window", "center", "span_ms", "trainees"}, "proximity");
    if (j.contains("window") && !j.at("window").is_null()) p.window = j.at("window").get<std::size_t>();
    if (j.contains("center") && !j.at("center").is_null()) {
        const auto text = j.at("center").get<std::string>();
        p.center = parse_timestamp(text);
        if (!p.center) throw InvalidSpec("proximity center '" + text + "' is not an ISO-8601 instant");
    }
    p.span = Millis(j.value("span_ms", static_cast<long long>(0)));
    if (j.contains("trainees") && !j.at("trainees").is_null()) {
        p.trainees = j.at("trainees").get<std::set<std::string>>();
    }
    if (p.window && p.center) throw InvalidSpec("proximity takes either a window or a center, not both");
    return p;
}

Json to_json(const ProximityOptions& p) {
    return {{"window", p.window ? Json(*p.window) : Json()},
            {"center", p.center ? Json(format_timestamp(*p.center)) : Json()},
            {"span_ms", p.span.count()},
            {"trainees", p.trainees ? Json(*p.trainees) : Json()}};
}

Json activity_json(const Activity& a) {
    return {{"id", activity_id(a)},
            {"label", a.label},
            {"class", std::string(to_string(a.source_class))},
            {"level", a.level}};
}

Json with_config(const QueryRequest& q, const char* key, Json body) {
    return {{"config", to_json(q)}, {key, std::move(body)}};
}

}  // namespace

QueryRequest query_from_json(const Json& j) {
    QueryRequest q;
    if (j.is_null()) return q;
    if (!j.is_object()) throw InvalidSpec("request must be a JSON object");
    reject_unknown(j, {"filter", "mapping", "sentiment", "clustering", "graph", "proximity", "metrics", "k_max"},
                   "request");
    try {
        q.filter = section<FilterSpec>(j, "filter", filter_spec_from_json);
        q.mapping = section<ActivityMappingConfig>(j, "mapping", mapping_config_from_json);
        q.sentiment = section<SentimentConfig>(j, "sentiment", sentiment_config_from_json);
        q.clustering = section<KMeansParams>(j, "clustering", kmeans_params_from_json);
        q.graph = section<GraphOptions>(j, "graph", graph_options_from_json);
        q.proximity = section<ProximityOptions>(j, "proximity", proximity_from_json);
        if (j.contains("metrics") && !j.at("metrics").is_null()) {
            q.metrics.clear();
            for (const auto& m : j.at("metrics")) {
                const auto name = m.get<std::string>();
                auto parsed = parse_overview_metric(name);
                if (!parsed) throw InvalidSpec("unknown overview metric '" + name + "'");
                q.metrics.insert(*parsed);
            }
        }
        q.k_max = j.value("k_max", 0);
    } catch (const Json::exception& ex) {
        throw InvalidSpec(std::string("malformed request: ") + ex.what());
    }
    if (q.k_max < 0) throw InvalidSpec("k_max must not be negative");
    return q;
}

Json to_json(const QueryRequest& q) {
    Json metrics = Json::array();
    for (auto m : q.metrics) metrics.push_back(std::string(to_string(m)));
    return {{"filter", to_json(q.filter)},
            {"mapping", to_json(q.mapping)},
            {"sentiment", to_json(q.sentiment)},
            {"clustering", to_json(q.clustering)},
            {"graph", to_json(q.graph)},
            {"proximity", to_json(q.proximity)},
            {"metrics", metrics},
            {"k_max", q.k_max}};
}

ActivityLog prepare(const EventLog& log, const QueryRequest& q) {
    q.mapping.validate();
    auto activities = map_activities(log, q.mapping);
    const auto report = validate(q.filter, activities);
    if (!report.ok()) throw InvalidSpec(report.errors.front());
    return apply(q.filter, activities);
}

namespace {

ProcessGraph build_graph(const ActivityLog& filtered, const QueryRequest& q) {
    return discover(build_traces(filtered), q.graph.dependency_threshold);
}

}  // namespace

Json graph_query(const EventLog& log, const QueryRequest& q) {
    const auto filtered = prepare(log, q);
    const auto graph = build_graph(filtered, q);
    Json body = to_json(graph, q.graph.stat);
    if (q.graph.highlight) {
        const auto h = highlight_paths(graph, *q.graph.highlight);
        Json nodes = Json::array(), edges = Json::array();
        for (auto i : h.nodes) nodes.push_back(graph.nodes[i].id);
        for (auto i : h.edges) {
            edges.push_back(Json::array({graph.nodes[graph.edges[i].from].id, graph.nodes[graph.edges[i].to].id}));
        }
        body["highlight"] = {{"nodes", nodes}, {"edges", edges}};
    }
    if (q.graph.include_dot) body["dot"] = to_dot(graph, q.graph.stat);
    Json out = with_config(q, "graph", std::move(body));
    out["warnings"] = graph.nodes.empty() ? Json::array({"the filter left no events; the graph is empty"})
                                          : Json::array();
    return out;
}

std::string graph_dot(const EventLog& log, const QueryRequest& q) {
    return to_dot(build_graph(prepare(log, q), q), q.graph.stat);
}

Json sentiment_query(const EventLog& log, const QueryRequest& q) {
    q.sentiment.validate();
    return with_config(q, "sentiment", to_json(compute_sentiment(prepare(log, q), q.sentiment)));
}

Json clusters_query(const EventLog& log, const QueryRequest& q) {
    q.sentiment.validate();
    const auto s = compute_sentiment(prepare(log, q), q.sentiment);
    const auto result = kmeans(extract_features(s), q.clustering);
    Json out = with_config(q, "clusters", to_json(result));
    out["views"] = to_json(cluster_views(result), s.grid.levels);
    return out;
}

Json elbow_query(const EventLog& log, const QueryRequest& q) {
    q.sentiment.validate();
    const auto s = compute_sentiment(prepare(log, q), q.sentiment);
    const auto features = extract_features(s);
    const int k_max = q.k_max > 0 ? q.k_max : static_cast<int>(std::min<std::size_t>(10, features.size()));
    return with_config(q, "elbow", to_json(elbow(features, k_max, q.clustering)));
}

Json matrix_query(const EventLog& log, const QueryRequest& q) {
    const auto filtered = prepare(log, q);
    std::map<Activity, Timestamp> first_seen;
    for (std::size_t i = 0; i < filtered.size(); ++i) first_seen.try_emplace(filtered.activity(i), filtered.event(i).timestamp);
    std::vector<Activity> columns;
    for (const auto& [a, _] : first_seen) columns.push_back(a);
    std::stable_sort(columns.begin(), columns.end(),
                     [&](const Activity& a, const Activity& b) { return first_seen.at(a) < first_seen.at(b); });
    std::map<Activity, std::size_t> column_of;
    for (std::size_t c = 0; c < columns.size(); ++c) column_of[columns[c]] = c;

    const std::vector<std::string> rows(filtered.trainees().begin(), filtered.trainees().end());
    std::map<std::string, std::size_t> row_of;
    for (std::size_t r = 0; r < rows.size(); ++r) row_of[rows[r]] = r;

    std::vector<std::vector<Json>> cells(rows.size(), std::vector<Json>(columns.size(), Json::array()));
    for (std::size_t i = 0; i < filtered.size(); ++i) {
        const auto& e = filtered.event(i);
        Json detail = {{"timestamp", format_timestamp(e.timestamp)}, {"content", e.content}};
        if (e.game_type) detail["game_type"] = std::string(to_string(*e.game_type));
        cells[row_of.at(e.trainee_id)][column_of.at(filtered.activity(i))].push_back(std::move(detail));
    }
    Json col_json = Json::array();
    for (const auto& a : columns) {
        Json c = activity_json(a);
        c["first_seen"] = format_timestamp(first_seen.at(a));
        col_json.push_back(std::move(c));
    }
    Json cell_json = Json::array();
    for (auto& row : cells) {
        Json r = Json::array();
        for (auto& events : row) {
            const auto count = events.size();
            r.push_back({{"count", count}, {"present", count > 0}, {"events", std::move(events)}});
        }
        cell_json.push_back(std::move(r));
    }
    return with_config(q, "matrix", {{"rows", rows}, {"columns", col_json}, {"cells", cell_json}});
}

Json proximity_query(const EventLog& log, const QueryRequest& q) {
    const auto filtered = prepare(log, q);
    const auto trainees = q.proximity.trainees.value_or(filtered.trainees());
    std::set<Activity> found;
    if (q.proximity.window) {
        q.sentiment.validate();
        const auto grid = build_window_grid(filtered, q.sentiment);
        if (*q.proximity.window >= grid.windows.size()) {
            throw InvalidSpec("window " + std::to_string(*q.proximity.window) + " is outside the grid (" +
                              std::to_string(grid.windows.size()) + " windows)");
        }
        found = nearby_activities(filtered, grid, *q.proximity.window, trainees);
    } else if (q.proximity.center) {
        if (q.proximity.span.count() <= 0) throw InvalidSpec("proximity span_ms must be positive");
        found = nearby_activities(filtered, *q.proximity.center, q.proximity.span, trainees);
    } else {
        throw InvalidSpec("proximity needs a window index or a center timestamp");
    }
    Json ids = Json::array(), activities = Json::array();
    for (const auto& a : found) {
        ids.push_back(activity_id(a));
        activities.push_back(activity_json(a));
    }
    return with_config(q, "proximity", {{"node_ids", ids}, {"activities", activities}});
}

Json overview_query(const EventLog& log, const QueryRequest& q) {
    const auto filtered = prepare(log, q);
    std::optional<SentimentResult> s;
    if (q.metrics.contains(OverviewMetric::Sentiment)) {
        q.sentiment.validate();
        s = compute_sentiment(filtered, q.sentiment);
    }
    return with_config(q, "overview", to_json(level_overview(filtered, q.metrics, s ? &*s : nullptr)));
}

Json validate_query(const EventLog& log, const QueryRequest& q) {
    q.mapping.validate();
    const auto report = validate(q.filter, map_activities(log, q.mapping));
    return with_config(q, "report", to_json(report));
}

std::string render(const Json& response) { return canonical_dump(response) + "\n"; }

}  // namespace ctfminer
