#include "ctfminer/clustering.hpp"

#include "ctfminer/error.hpp"
#include "ctfminer/sentiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

namespace ctfminer {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Same stream on every platform, unlike std::uniform_real_distribution.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t point_count(std::span<const double> points, std::size_t dims) { return points.size() / dims; }

double total_wcss(std::span<const double> points, std::size_t dims, const std::vector<double>& centroids,
                  const std::vector<int>& assignment) {
    double s = 0.0;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        s += kernels::squared_distance(points.subspan(i * dims, dims),
                                       std::span<const double>(centroids).subspan(assignment[i] * dims, dims));
    }
    return s;
}

std::vector<double> seed_plus_plus(std::span<const double> points, std::size_t dims, int k, std::mt19937_64& rng) {
    const std::size_t n = point_count(points, dims);
    std::vector<std::size_t> chosen;
    std::vector<char> taken(n, 0);
    auto pick = [&](std::size_t i) {
        chosen.push_back(i);
        taken[i] = 1;
    };
    pick(std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n))));

    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    while (chosen.size() < static_cast<std::size_t>(k)) {
        const auto last = points.subspan(chosen.back() * dims, dims);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], kernels::squared_distance(points.subspan(i * dims, dims), last));
            total += d2[i];
        }
        const double u = uniform01(rng);
        std::size_t next = n;
        if (total > 0.0) {
            const double target = u * total;
            double cum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (d2[i] <= 0.0) continue;
                cum += d2[i];
                next = i;
                if (cum > target) break;
            }
        } else {
            for (std::size_t i = 0; i < n && next == n; ++i) {
                if (!taken[i]) next = i;
            }
        }
        pick(next);
    }
    std::vector<double> centroids;
    centroids.reserve(static_cast<std::size_t>(k) * dims);
    for (auto i : chosen) centroids.insert(centroids.end(), points.begin() + i * dims, points.begin() + (i + 1) * dims);
    return centroids;
}

// Gives every empty cluster the point farthest from its centroid, taken from a
// cluster that can spare one.
void repair_empty(std::span<const double> points, std::size_t dims, std::vector<double>& centroids,
                  std::vector<int>& assignment, std::vector<double>& d2) {
    const std::size_t k = centroids.size() / dims;
    std::vector<std::size_t> counts(k, 0);
    for (int a : assignment) ++counts[a];
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] > 0) continue;
        std::size_t best = assignment.size();
        for (std::size_t i = 0; i < assignment.size(); ++i) {
            if (counts[assignment[i]] < 2) continue;
            if (best == assignment.size() || d2[i] > d2[best]) best = i;
        }
        if (best == assignment.size()) continue;
        --counts[assignment[best]];
        assignment[best] = static_cast<int>(c);
        ++counts[c];
        d2[best] = 0.0;
        std::copy_n(points.begin() + best * dims, dims, centroids.begin() + c * dims);
    }
}

std::vector<double> pad_points(std::span<const double> points, std::size_t& dims, std::size_t n) {
    if (dims > 0) return {points.begin(), points.end()};
    dims = 1;
    return std::vector<double>(n, 0.0);
}

}  // namespace

std::vector<FeatureVector> extract_features(const std::vector<std::string>& trainees,
                                            const std::vector<std::vector<double>>& cumulative,
                                            const std::vector<std::vector<double>>& normalized,
                                            std::size_t windows_per_level) {
    if (cumulative.size() != trainees.size() || normalized.size() != trainees.size()) {
        throw LengthMismatch("feature rows do not match the trainee list");
    }
    std::vector<FeatureVector> out;
    if (trainees.empty()) return out;
    const std::size_t len = cumulative.front().size();
    for (std::size_t r = 0; r < trainees.size(); ++r) {
        if (cumulative[r].size() != len || normalized[r].size() != len) {
            throw LengthMismatch("sentiment series of '" + trainees[r] + "' has length " +
                                 std::to_string(cumulative[r].size()) + ", expected " + std::to_string(len));
        }
        for (double v : cumulative[r]) {
            if (!std::isfinite(v)) throw InvalidConfig("non-finite sentiment value for '" + trainees[r] + "'");
        }
    }
    if (len > 0 && (windows_per_level == 0 || len % windows_per_level != 0)) {
        throw LengthMismatch("series length is not a whole number of levels");
    }
    const std::size_t levels = len == 0 ? 0 : len / windows_per_level;
    for (std::size_t r = 0; r < trainees.size(); ++r) {
        FeatureVector f{trainees[r], cumulative[r], std::vector<double>(levels, 0.0)};
        for (std::size_t l = 0; l < levels; ++l) {
            double s = 0.0;
            for (std::size_t w = 0; w < windows_per_level; ++w) s += normalized[r][l * windows_per_level + w];
            f.level_aggregates[l] = s / static_cast<double>(windows_per_level);
        }
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<FeatureVector> extract_features(const SentimentResult& sentiment) {
    std::vector<std::vector<double>> cumulative, normalized;
    for (std::size_t r = 0; r < sentiment.grid.trainees.size(); ++r) {
        cumulative.push_back(sentiment.series[r].cumulative);
        const auto row = sentiment.normalized.row(r);
        normalized.emplace_back(row.begin(), row.end());
    }
    return extract_features(sentiment.grid.trainees, cumulative, normalized, sentiment.grid.windows_per_level());
}

std::string_view to_string(FeatureSpace s) { return s == FeatureSpace::Series ? "series" : "level_aggregates"; }

void KMeansParams::validate() const {
    if (k < 1) throw InvalidConfig("k must be at least 1");
    if (restarts < 1) throw InvalidConfig("restarts must be at least 1");
    if (max_iter < 1) throw InvalidConfig("max_iter must be at least 1");
    if (!(tol >= 0.0) || !std::isfinite(tol)) throw InvalidConfig("tol must be a finite non-negative number");
}

Json to_json(const KMeansParams& p) {
    return {{"k", p.k},
            {"seed", p.seed},
            {"restarts", p.restarts},
            {"max_iter", p.max_iter},
            {"tol", p.tol},
            {"feature_space", std::string(to_string(p.space))}};
}

KMeansParams kmeans_params_from_json(const Json& j) {
    KMeansParams p;
    if (j.is_null()) return p;
    if (!j.is_object()) throw InvalidConfig("clustering params must be a JSON object");
    static const std::set<std::string> known{"k", "seed", "restarts", "max_iter", "tol", "feature_space"};
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) throw InvalidConfig("unknown clustering key '" + key + "'");
    }
    try {
        if (j.contains("k")) p.k = j.at("k").get<int>();
        if (j.contains("seed")) p.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("restarts")) p.restarts = j.at("restarts").get<int>();
        if (j.contains("max_iter")) p.max_iter = j.at("max_iter").get<int>();
        if (j.contains("tol")) p.tol = j.at("tol").get<double>();
        if (j.contains("feature_space")) {
            const auto s = j.at("feature_space").get<std::string>();
            if (s == "series") {
                p.space = FeatureSpace::Series;
            } else if (s == "level_aggregates") {
                p.space = FeatureSpace::LevelAggregates;
            } else {
                throw InvalidConfig("feature_space must be series or level_aggregates");
            }
        }
    } catch (const Json::exception& ex) {
        throw InvalidConfig(std::string("clustering params: ") + ex.what());
    }
    p.validate();
    return p;
}

KMeansRun lloyd(std::span<const double> points, std::size_t dims, std::vector<double> centroids, int max_iter,
                double tol, kernels::ExecPolicy policy) {
    const std::size_t n = point_count(points, dims);
    const std::size_t k = centroids.size() / dims;
    KMeansRun run;
    run.assignment.assign(n, -1);
    std::vector<int> assignment(n, 0);
    std::vector<double> d2(n, 0.0);

    for (int iter = 0; iter < max_iter; ++iter) {
        kernels::assign_nearest(points, centroids, dims, assignment, d2, policy);
        repair_empty(points, dims, centroids, assignment, d2);
        if (iter == 0) {
            double w = 0.0;
            for (double d : d2) w += d;
            run.iteration_wcss.push_back(w);
        }
        const bool unchanged = assignment == run.assignment;
        run.assignment = assignment;

        std::vector<double> next(k * dims, 0.0);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[assignment[i]];
            for (std::size_t d = 0; d < dims; ++d) next[assignment[i] * dims + d] += points[i * dims + d];
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                std::copy_n(centroids.begin() + c * dims, dims, next.begin() + c * dims);
                continue;
            }
            for (std::size_t d = 0; d < dims; ++d) next[c * dims + d] /= static_cast<double>(counts[c]);
            shift = std::max(shift, std::sqrt(kernels::squared_distance(
                                        std::span<const double>(next).subspan(c * dims, dims),
                                        std::span<const double>(centroids).subspan(c * dims, dims))));
        }
        centroids = std::move(next);
        run.iterations = iter + 1;
        run.iteration_wcss.push_back(total_wcss(points, dims, centroids, run.assignment));
        if (unchanged || shift < tol) {
            run.converged = true;
            break;
        }
    }
    run.centroids = std::move(centroids);
    run.wcss = run.iteration_wcss.back();
    return run;
}

KMeansRun kmeans_points(std::span<const double> points, std::size_t dims, int k, std::uint64_t seed, int restarts,
                        int max_iter, double tol, kernels::ExecPolicy policy) {
    const std::size_t n = dims == 0 ? 0 : point_count(points, dims);
    if (n == 0) throw EmptyInput("nothing to cluster");
    if (k < 1) throw InvalidConfig("k must be at least 1");
    if (static_cast<std::size_t>(k) > n) {
        throw KTooLarge("k = " + std::to_string(k) + " exceeds the number of points (" + std::to_string(n) + ")");
    }
    KMeansRun best;
    for (int r = 0; r < restarts; ++r) {
        std::mt19937_64 rng(splitmix64(seed ^ static_cast<std::uint64_t>(r)));
        auto run = lloyd(points, dims, seed_plus_plus(points, dims, k, rng), max_iter, tol, policy);
        if (r == 0 || run.wcss < best.wcss) best = std::move(run);
    }
    return best;
}

namespace {

std::vector<double> feature_matrix(const std::vector<FeatureVector>& features, FeatureSpace space,
                                   std::size_t& dims) {
    if (features.empty()) throw EmptyInput("no feature vectors to cluster");
    auto pick = [&](const FeatureVector& f) -> const std::vector<double>& {
        return space == FeatureSpace::Series ? f.values : f.level_aggregates;
    };
    dims = pick(features.front()).size();
    std::vector<double> points;
    points.reserve(features.size() * dims);
    for (const auto& f : features) {
        const auto& v = pick(f);
        if (v.size() != dims) throw LengthMismatch("feature vector of '" + f.trainee_id + "' has a different length");
        for (double x : v) {
            if (!std::isfinite(x)) throw InvalidConfig("non-finite feature for '" + f.trainee_id + "'");
        }
        points.insert(points.end(), v.begin(), v.end());
    }
    return pad_points(points, dims, features.size());
}

}  // namespace

ClusterResult kmeans(const std::vector<FeatureVector>& features, const KMeansParams& params,
                     kernels::ExecPolicy policy) {
    params.validate();
    std::size_t dims = 0;
    const auto points = feature_matrix(features, params.space, dims);
    const auto run =
        kmeans_points(points, dims, params.k, params.seed, params.restarts, params.max_iter, params.tol, policy);

    ClusterResult r;
    r.k = params.k;
    r.seed = params.seed;
    r.params = params;
    r.wcss = run.wcss;
    r.iteration_wcss = run.iteration_wcss;
    r.features = features;
    const std::size_t real_dims =
        params.space == FeatureSpace::Series ? features.front().values.size() : features.front().level_aggregates.size();
    for (int c = 0; c < params.k; ++c) {
        r.centroids.emplace_back(run.centroids.begin() + c * dims, run.centroids.begin() + c * dims + real_dims);
    }
    for (std::size_t i = 0; i < features.size(); ++i) r.assignments[features[i].trainee_id] = run.assignment[i];
    return r;
}

int suggest_k(const std::vector<ElbowPoint>& points) {
    if (points.size() < 3) return points.empty() ? 1 : points.front().k;
    const auto& a = points.front();
    const auto& b = points.back();
    const double dx = b.k - a.k;
    const double dy = b.wcss - a.wcss;
    const double norm = std::hypot(dx, dy);
    if (norm == 0.0) return a.k;
    int best_k = a.k;
    double best = 0.0;
    for (std::size_t i = 1; i + 1 < points.size(); ++i) {
        // signed distance, positive below the chord
        const double below = (dy * (points[i].k - a.k) - dx * (points[i].wcss - a.wcss)) / norm;
        if (below > best) {
            best = below;
            best_k = points[i].k;
        }
    }
    return best_k;
}

ElbowSeries elbow(const std::vector<FeatureVector>& features, int k_max, const KMeansParams& params,
                  kernels::ExecPolicy policy) {
    KMeansParams p = params;
    p.k = 1;
    p.validate();
    if (k_max < 1) throw InvalidConfig("k_max must be at least 1");
    std::size_t dims = 0;
    const auto points = feature_matrix(features, p.space, dims);
    const std::size_t n = features.size();
    if (static_cast<std::size_t>(k_max) > n) {
        throw KTooLarge("k_max = " + std::to_string(k_max) + " exceeds the number of trainees (" +
                        std::to_string(n) + ")");
    }
    ElbowSeries out;
    KMeansRun prev;
    for (int k = 1; k <= k_max; ++k) {
        auto run = kmeans_points(points, dims, k, p.seed, p.restarts, p.max_iter, p.tol, policy);
        if (k > 1) {
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = kernels::squared_distance(
                    std::span<const double>(points).subspan(i * dims, dims),
                    std::span<const double>(prev.centroids).subspan(prev.assignment[i] * dims, dims));
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            auto warm = prev.centroids;
            warm.insert(warm.end(), points.begin() + far * dims, points.begin() + (far + 1) * dims);
            auto grown = lloyd(points, dims, std::move(warm), p.max_iter, p.tol, policy);
            if (grown.wcss < run.wcss) run = std::move(grown);
        }
        out.points.push_back({k, run.wcss});
        prev = std::move(run);
    }
    out.suggested_k = suggest_k(out.points);
    return out;
}

ClusterViews cluster_views(const ClusterResult& result) {
    ClusterViews v;
    v.bars.assign(result.k, 0);
    for (int c = 0; c < result.k; ++c) {
        v.line.push_back({c, {}, {}});
        v.spider.push_back({c, {}});
    }
    std::vector<const FeatureVector*> by_id;
    for (const auto& f : result.features) by_id.push_back(&f);
    std::sort(by_id.begin(), by_id.end(), [](auto* a, auto* b) { return a->trainee_id < b->trainee_id; });
    for (const auto* f : by_id) {
        const int c = result.assignments.at(f->trainee_id);
        ++v.bars[c];
        v.line[c].members.push_back(f->trainee_id);
        v.line[c].series.push_back(f->values);
        auto& poly = v.spider[c].polygon;
        if (poly.empty()) poly.assign(f->level_aggregates.size(), 0.0);
        for (std::size_t l = 0; l < poly.size(); ++l) poly[l] += f->level_aggregates[l];
    }
    for (int c = 0; c < result.k; ++c) {
        for (auto& x : v.spider[c].polygon) x /= static_cast<double>(v.bars[c]);
    }
    return v;
}

Json to_json(const ClusterResult& r) {
    Json centroids = Json::array();
    for (const auto& c : r.centroids) centroids.push_back(c);
    return {{"k", r.k},
            {"seed", r.seed},
            {"config", to_json(r.params)},
            {"assignments", r.assignments},
            {"centroids", centroids},
            {"wcss", r.wcss},
            {"iteration_wcss", r.iteration_wcss}};
}

Json to_json(const ClusterViews& v, const std::vector<int>& levels) {
    Json line = Json::array();
    for (const auto& c : v.line) line.push_back({{"cluster", c.cluster}, {"members", c.members}, {"series", c.series}});
    Json spider = Json::array();
    for (const auto& c : v.spider) spider.push_back({{"cluster", c.cluster}, {"polygon", c.polygon}});
    return {{"line_view", {{"clusters", line}, {"bars", v.bars}}},
            {"spider_view", {{"axes", levels}, {"clusters", spider}}}};
}

Json to_json(const ElbowSeries& e) {
    Json pts = Json::array();
    for (const auto& p : e.points) pts.push_back({{"k", p.k}, {"wcss", p.wcss}});
    return {{"points", pts}, {"suggested_k", e.suggested_k}};
}

}  // namespace ctfminer
