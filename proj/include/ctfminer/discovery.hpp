#pragma once

#include "ctfminer/canonical_json.hpp"
#include "ctfminer/event.hpp"
#include "ctfminer/filter.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace ctfminer {

struct SentimentResult;
struct WindowGrid;

struct TraceStep {
    Activity activity;
    Timestamp timestamp{};
};

struct Trace {
    std::string trainee_id;
    std::vector<TraceStep> steps;
};

/// One trace per trainee left by the filter, ordered by trainee id.
std::vector<Trace> build_traces(const ActivityLog& filtered);
std::vector<Trace> build_traces(const ActivityLog& log, const FilterSpec& filter);

enum class Transition {
    Within,   ///< both ends in the same level
    Forward,  ///< level n to level n+1
    Skip,     ///< forward over at least one level
    Back,     ///< revisit of an earlier level
};

std::string_view to_string(Transition t);

struct GraphNode {
    Activity activity;
    std::string id;
    std::size_t frequency = 0;  ///< occurrences over all traces
    std::set<std::string> trainees;
    bool entry = false;  ///< first activity of some trainee's stay in the level
    bool exit = false;   ///< last activity of some trainee's stay in the level
    int rank = 0;        ///< layout hint: order within the level's layer
};

struct GraphEdge {
    std::size_t from = 0;  ///< node index
    std::size_t to = 0;
    std::size_t frequency = 0;
    std::set<std::string> trainees;
    std::vector<Millis> durations;
    double dependency = 0.0;
    Transition transition = Transition::Within;
};

struct ProcessGraph {
    std::vector<GraphNode> nodes;  ///< sorted by Activity
    std::vector<GraphEdge> edges;  ///< sorted by (from, to)
    std::map<int, std::vector<std::size_t>> level_partitions;
    std::set<std::string> trainees;
    double dependency_threshold = 0.0;

    std::optional<std::size_t> node_index(const Activity& a) const;
    std::optional<std::size_t> edge_index(std::size_t from, std::size_t to) const;
};

/// Heuristic-miner dependency: (|a>b| - |b>a|) / (|a>b| + |b>a| + 1), and
/// |a>a| / (|a>a| + 1) for self-loops.
double dependency_score(std::size_t ab, std::size_t ba, bool self_loop);

/// Directly-follows aggregation over all traces. With a positive threshold,
/// edges scoring below it are dropped, except that a node never loses its last
/// incoming edge (unless it is an entry) or its last outgoing edge (unless it
/// is an exit): the best-scoring one is kept. Threshold <= 0 keeps every edge.
ProcessGraph discover(const std::vector<Trace>& traces, double dependency_threshold = 0.0);

enum class PerformanceStat { Mean, Median, Min, Max };

std::string_view to_string(PerformanceStat s);
std::optional<PerformanceStat> parse_performance_stat(std::string_view s);

struct PerformanceStats {
    double mean = 0.0;
    double median = 0.0;
    double min = 0.0;
    double max = 0.0;

    double get(PerformanceStat s) const;
};

/// Seconds; all zero for an empty multiset.
PerformanceStats performance_stats(const std::vector<Millis>& durations);

/// Selected statistic per edge, aligned with graph.edges, in seconds.
std::vector<double> performance_view(const ProcessGraph& graph, PerformanceStat stat);

struct Highlight {
    std::vector<std::size_t> nodes;
    std::vector<std::size_t> edges;
};

/// Nodes/edges whose trainee sets meet `trainees`. Throws UnknownTrainee.
Highlight highlight_paths(const ProcessGraph& graph, const std::set<std::string>& trainees);

/// Activities with an event of the selected trainees inside
/// [center - span/2, center + span/2].
std::set<Activity> nearby_activities(const ActivityLog& filtered, Timestamp center, Millis span,
                                     const std::set<std::string>& trainees);

/// Activities of the selected trainees' events that fall in sliding window
/// `window` of the grid.
std::set<Activity> nearby_activities(const ActivityLog& filtered, const WindowGrid& grid, std::size_t window,
                                     const std::set<std::string>& trainees);

enum class OverviewMetric { CommandCount, RelativeTime, Sentiment };

std::string_view to_string(OverviewMetric m);
std::optional<OverviewMetric> parse_overview_metric(std::string_view s);

struct Histogram {
    double min = 0.0;
    double max = 0.0;
    std::vector<std::size_t> buckets;  ///< 10 equal-width buckets over [min, max]
};

Histogram make_histogram(const std::vector<double>& values, std::size_t bucket_count = 10);

struct MetricSummary {
    double average = 0.0;
    Histogram histogram;
};

struct LevelOverview {
    int level = 0;
    bool empty = true;
    std::size_t trainee_count = 0;
    std::map<OverviewMetric, MetricSummary> metrics;
};

/// One overview per level of the filtered log, averaged over its trainees.
/// The sentiment metric needs `sentiment`; it is skipped when that is null.
std::vector<LevelOverview> level_overview(const ActivityLog& filtered, const std::set<OverviewMetric>& metrics,
                                          const SentimentResult* sentiment = nullptr);

Json to_json(const ProcessGraph& graph, const std::optional<PerformanceStat>& stat = std::nullopt);
std::string to_dot(const ProcessGraph& graph, const std::optional<PerformanceStat>& stat = std::nullopt);
Json to_json(const std::vector<LevelOverview>& overview);

}  // namespace ctfminer
