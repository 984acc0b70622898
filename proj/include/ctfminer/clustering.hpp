#pragma once

#include "ctfminer/canonical_json.hpp"
#include "ctfminer/kernels.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace ctfminer {

struct SentimentResult;

struct FeatureVector {
    std::string trainee_id;
    std::vector<double> values;            ///< cumulative sentiment per window
    std::vector<double> level_aggregates;  ///< mean normalized score per level

    bool operator==(const FeatureVector&) const = default;
};

/// Rows of `cumulative` and `normalized` follow `trainees`; every row must have
/// the same length, a multiple of `windows_per_level`. Throws LengthMismatch.
std::vector<FeatureVector> extract_features(const std::vector<std::string>& trainees,
                                            const std::vector<std::vector<double>>& cumulative,
                                            const std::vector<std::vector<double>>& normalized,
                                            std::size_t windows_per_level);
std::vector<FeatureVector> extract_features(const SentimentResult& sentiment);

enum class FeatureSpace { Series, LevelAggregates };

std::string_view to_string(FeatureSpace s);

struct KMeansParams {
    int k = 3;
    std::uint64_t seed = 0;
    int restarts = 10;
    int max_iter = 100;
    double tol = 1e-6;
    FeatureSpace space = FeatureSpace::Series;

    /// Throws InvalidConfig.
    void validate() const;

    bool operator==(const KMeansParams&) const = default;
};

Json to_json(const KMeansParams& p);
/// Missing keys keep their defaults.
KMeansParams kmeans_params_from_json(const Json& j);

/// One Lloyd run (or the best of several) over a row-major point matrix.
struct KMeansRun {
    std::vector<int> assignment;
    std::vector<double> centroids;  ///< k x dims, row-major
    double wcss = 0.0;
    std::vector<double> iteration_wcss;  ///< after every iteration, first entry = seeding
    int iterations = 0;
    bool converged = false;
};

/// Lloyd iterations from the given centroids. Empty clusters take the point
/// farthest from its centroid among clusters with more than one member.
KMeansRun lloyd(std::span<const double> points, std::size_t dims, std::vector<double> centroids, int max_iter,
                double tol, kernels::ExecPolicy policy = kernels::kDefaultPolicy);

/// k-means++ seeding then Lloyd, best of `restarts` by wcss (ties: lowest restart).
KMeansRun kmeans_points(std::span<const double> points, std::size_t dims, int k, std::uint64_t seed, int restarts,
                        int max_iter, double tol, kernels::ExecPolicy policy = kernels::kDefaultPolicy);

struct ClusterResult {
    int k = 0;
    std::uint64_t seed = 0;
    KMeansParams params;
    std::map<std::string, int> assignments;
    std::vector<std::vector<double>> centroids;
    double wcss = 0.0;
    std::vector<double> iteration_wcss;
    std::vector<FeatureVector> features;  ///< input, kept for the views
};

/// Throws EmptyInput, KTooLarge, InvalidConfig.
ClusterResult kmeans(const std::vector<FeatureVector>& features, const KMeansParams& params,
                     kernels::ExecPolicy policy = kernels::kDefaultPolicy);

struct ElbowPoint {
    int k = 0;
    double wcss = 0.0;
};

struct ElbowSeries {
    std::vector<ElbowPoint> points;
    int suggested_k = 1;
};

/// Knee = largest distance below the chord from the first to the last point;
/// 1 when no point lies below it.
int suggest_k(const std::vector<ElbowPoint>& points);

/// k = 1..k_max with `params` except k. Each k also tries the previous
/// solution plus its farthest point as a warm start, so wcss never increases.
ElbowSeries elbow(const std::vector<FeatureVector>& features, int k_max, const KMeansParams& params,
                  kernels::ExecPolicy policy = kernels::kDefaultPolicy);

struct LineCluster {
    int cluster = 0;
    std::vector<std::string> members;
    std::vector<std::vector<double>> series;
};

struct SpiderCluster {
    int cluster = 0;
    std::vector<double> polygon;  ///< mean level aggregates of the members
};

struct ClusterViews {
    std::vector<LineCluster> line;
    std::vector<std::size_t> bars;
    std::vector<SpiderCluster> spider;
};

ClusterViews cluster_views(const ClusterResult& result);

Json to_json(const ClusterResult& r);
Json to_json(const ClusterViews& v, const std::vector<int>& levels);
Json to_json(const ElbowSeries& e);

}  // namespace ctfminer
