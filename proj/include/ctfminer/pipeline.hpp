#pragma once

#include "ctfminer/canonical_json.hpp"
#include "ctfminer/clustering.hpp"
#include "ctfminer/discovery.hpp"
#include "ctfminer/event.hpp"
#include "ctfminer/filter.hpp"
#include "ctfminer/mapping.hpp"
#include "ctfminer/sentiment.hpp"

#include <optional>
#include <set>
#include <string>

namespace ctfminer {

struct GraphOptions {
    std::optional<PerformanceStat> stat;  ///< nullopt = frequency mode
    double dependency_threshold = 0.0;
    std::optional<std::set<std::string>> highlight;
    bool include_dot = false;
};

struct ProximityOptions {
    std::optional<std::size_t> window;  ///< sliding-window mode
    std::optional<Timestamp> center;    ///< time-span mode
    Millis span{0};
    std::optional<std::set<std::string>> trainees;  ///< nullopt = every trainee left by the filter
};

/// Everything one analytic query depends on besides the dataset. Serialized
/// back into every response so the query can be replayed verbatim.
struct QueryRequest {
    FilterSpec filter;
    ActivityMappingConfig mapping;
    SentimentConfig sentiment = SentimentConfig::engagement_defaults();
    KMeansParams clustering;
    GraphOptions graph;
    ProximityOptions proximity;
    std::set<OverviewMetric> metrics{OverviewMetric::CommandCount, OverviewMetric::RelativeTime,
                                     OverviewMetric::Sentiment};
    int k_max = 0;  ///< elbow range; 0 = min(10, trainees)
};

/// Throws InvalidSpec / InvalidConfig. Null means all defaults.
QueryRequest query_from_json(const Json& j);
Json to_json(const QueryRequest& q);

/// Mapping followed by the filter; both validated first.
ActivityLog prepare(const EventLog& log, const QueryRequest& q);

Json graph_query(const EventLog& log, const QueryRequest& q);
std::string graph_dot(const EventLog& log, const QueryRequest& q);
Json sentiment_query(const EventLog& log, const QueryRequest& q);
Json clusters_query(const EventLog& log, const QueryRequest& q);
Json elbow_query(const EventLog& log, const QueryRequest& q);
Json matrix_query(const EventLog& log, const QueryRequest& q);
Json proximity_query(const EventLog& log, const QueryRequest& q);
Json overview_query(const EventLog& log, const QueryRequest& q);
/// Validation report for the request's filter; never throws on a bad spec.
Json validate_query(const EventLog& log, const QueryRequest& q);

/// Canonical text form shared by every frontend (trailing newline included).
std::string render(const Json& response);

}  // namespace ctfminer
