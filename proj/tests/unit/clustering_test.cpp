#include "ctfminer/clustering.hpp"
#include "ctfminer/error.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace ctfminer;
using namespace testsupport;

namespace {

FeatureVector fv(const std::string& id, std::vector<double> values, std::vector<double> aggs = {}) {
    return {id, std::move(values), std::move(aggs)};
}

std::vector<FeatureVector> from_points(const std::vector<std::vector<double>>& pts) {
    std::vector<FeatureVector> out;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        out.push_back(fv("p" + std::to_string(10 + i), pts[i], pts[i]));
    }
    return out;
}

std::vector<std::vector<double>> blobs(Gen& gen, std::size_t n, std::size_t dims) {
    std::vector<std::vector<double>> pts;
    for (std::size_t i = 0; i < n; ++i) {
        const double shift = i % 2 == 0 ? 0.0 : 50.0;
        std::vector<double> p(dims);
        for (auto& x : p) x = shift + gen.real(-1.0, 1.0);
        pts.push_back(std::move(p));
    }
    return pts;
}

double direct_wcss(const std::vector<std::vector<double>>& pts, const std::vector<int>& assign, int k) {
    double total = 0.0;
    for (int c = 0; c < k; ++c) {
        std::vector<double> mean(pts.front().size(), 0.0);
        int count = 0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (assign[i] != c) continue;
            ++count;
            for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += pts[i][d];
        }
        if (count == 0) continue;
        for (auto& m : mean) m /= count;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (assign[i] != c) continue;
            for (std::size_t d = 0; d < mean.size(); ++d) total += (pts[i][d] - mean[d]) * (pts[i][d] - mean[d]);
        }
    }
    return total;
}

KMeansParams params(int k, std::uint64_t seed = 0) {
    KMeansParams p;
    p.k = k;
    p.seed = seed;
    return p;
}

}  // namespace

TEST(KMeans, SingleClusterIsTheMean) {
    Gen gen(1);
    for (int round = 0; round < 50; ++round) {
        std::vector<std::vector<double>> pts(static_cast<std::size_t>(gen.uniform(1, 12)), std::vector<double>(3));
        for (auto& p : pts) {
            for (auto& x : p) x = gen.real(-5, 5);
        }
        auto r = kmeans(from_points(pts), params(1));
        std::vector<double> mean(3, 0.0);
        for (const auto& p : pts) {
            for (int d = 0; d < 3; ++d) mean[d] += p[d];
        }
        for (auto& m : mean) m /= static_cast<double>(pts.size());
        for (int d = 0; d < 3; ++d) EXPECT_NEAR(r.centroids[0][d], mean[d], 1e-9);
        EXPECT_NEAR(r.wcss, direct_wcss(pts, std::vector<int>(pts.size(), 0), 1), 1e-9);
    }
}

TEST(KMeans, KEqualsNHasZeroWcss) {
    Gen gen(2);
    for (int round = 0; round < 30; ++round) {
        const auto n = static_cast<std::size_t>(gen.uniform(1, 9));
        std::vector<std::vector<double>> pts;
        for (std::size_t i = 0; i < n; ++i) pts.push_back({static_cast<double>(i) * 3.0, gen.real(0, 1)});
        auto r = kmeans(from_points(pts), params(static_cast<int>(n), round));
        EXPECT_DOUBLE_EQ(r.wcss, 0.0);
        std::set<int> used;
        for (const auto& [_, c] : r.assignments) used.insert(c);
        EXPECT_EQ(used.size(), n);
    }
}

TEST(KMeans, TwoBlobsMatchExhaustivePartition) {
    Gen gen(3);
    for (int round = 0; round < 40; ++round) {
        auto pts = blobs(gen, static_cast<std::size_t>(gen.uniform(4, 12)), 2);
        auto r = kmeans(from_points(pts), params(2, round));
        const auto [best, mask] = best_two_partition(pts);
        EXPECT_NEAR(r.wcss, best, 1e-9);
        std::vector<int> assign;
        for (std::size_t i = 0; i < pts.size(); ++i) assign.push_back(r.assignments.at("p" + std::to_string(10 + i)));
        for (std::size_t i = 0; i < pts.size(); ++i) {
            EXPECT_EQ(assign[i] == assign[0], ((mask >> i) & 1u) == 0);
        }
        EXPECT_NEAR(direct_wcss(pts, assign, 2), r.wcss, 1e-9);
    }
}

TEST(KMeans, DeterministicForSeed) {
    Gen gen(4);
    auto feats = from_points(blobs(gen, 20, 4));
    const auto first = canonical_dump(to_json(kmeans(feats, params(3, 7))));
    for (int i = 0; i < 5; ++i) EXPECT_EQ(canonical_dump(to_json(kmeans(feats, params(3, 7)))), first);
}

TEST(KMeans, SerialAndParallelIdentical) {
    Gen gen(5);
    auto feats = from_points(blobs(gen, 40, 6));
    auto s = kmeans(feats, params(4, 9), kernels::ExecPolicy::Serial);
    auto p = kmeans(feats, params(4, 9), kernels::ExecPolicy::Parallel);
    EXPECT_EQ(canonical_dump(to_json(s)), canonical_dump(to_json(p)));
}

TEST(KMeans, IterationWcssNonIncreasing) {
    Gen gen(6);
    for (int round = 0; round < 100; ++round) {
        const std::size_t n = static_cast<std::size_t>(gen.uniform(2, 25));
        const std::size_t dims = static_cast<std::size_t>(gen.uniform(1, 4));
        std::vector<double> pts(n * dims);
        for (auto& x : pts) x = gen.real(-10, 10);
        const int k = gen.uniform(1, static_cast<int>(n));
        auto run = kmeans_points(pts, dims, k, static_cast<std::uint64_t>(round), 3, 100, 0.0);
        ASSERT_FALSE(run.iteration_wcss.empty());
        for (std::size_t i = 1; i < run.iteration_wcss.size(); ++i) {
            EXPECT_LE(run.iteration_wcss[i], run.iteration_wcss[i - 1] + 1e-9);
        }
        EXPECT_NEAR(run.iteration_wcss.back(), run.wcss, 1e-9);
    }
}

TEST(KMeans, LloydRepairsEmptyCluster) {
    // the first centroid starts far away and captures nothing
    std::vector<double> pts{0.0, 1.0, 10.0, 11.0};
    auto run = lloyd(pts, 1, {-100.0, 0.5}, 50, 0.0);
    EXPECT_NEAR(run.wcss, 1.0, 1e-12);
    EXPECT_NE(run.assignment[0], run.assignment[3]);
}

TEST(KMeans, Errors) {
    EXPECT_THROW(kmeans({}, params(1)), EmptyInput);
    EXPECT_THROW(kmeans(from_points({{1.0}, {2.0}}), params(3)), KTooLarge);
    EXPECT_THROW(kmeans(from_points({{1.0}}), params(0)), InvalidConfig);
    EXPECT_THROW(kmeans_params_from_json(Json{{"clusters", 3}}), InvalidConfig);
}

TEST(KMeans, ParamsJsonRoundTrip) {
    KMeansParams p = params(4, 99);
    p.restarts = 3;
    p.space = FeatureSpace::LevelAggregates;
    EXPECT_EQ(kmeans_params_from_json(to_json(p)), p);
    EXPECT_EQ(kmeans_params_from_json(Json::object()), KMeansParams{});
}

TEST(KMeans, LevelAggregateSpace) {
    std::vector<FeatureVector> feats{fv("a", {0, 0}, {1.0}), fv("b", {0, 0}, {1.2}), fv("c", {0, 0}, {-1.0})};
    auto p = params(2);
    p.space = FeatureSpace::LevelAggregates;
    auto r = kmeans(feats, p);
    EXPECT_EQ(r.assignments.at("a"), r.assignments.at("b"));
    EXPECT_NE(r.assignments.at("a"), r.assignments.at("c"));
    EXPECT_NEAR(r.wcss, 0.02, 1e-12);
}

TEST(Elbow, MonotoneProperty) {
    Gen gen(7);
    for (int round = 0; round < 30; ++round) {
        std::vector<std::vector<double>> pts(static_cast<std::size_t>(gen.uniform(1, 15)), std::vector<double>(2));
        for (auto& p : pts) {
            for (auto& x : p) x = gen.real(-3, 3);
        }
        const int kmax = gen.uniform(1, static_cast<int>(pts.size()));
        auto e = elbow(from_points(pts), kmax, params(1, round));
        ASSERT_EQ(e.points.size(), static_cast<std::size_t>(kmax));
        for (std::size_t i = 1; i < e.points.size(); ++i) EXPECT_LE(e.points[i].wcss, e.points[i - 1].wcss + 1e-9);
        EXPECT_GE(e.suggested_k, 1);
        EXPECT_LE(e.suggested_k, kmax);
    }
}

TEST(Elbow, SuggestedK) {
    EXPECT_EQ(elbow(from_points({{1.0}, {1.0}, {1.0}, {1.0}}), 4, params(1)).suggested_k, 1);
    Gen gen(8);
    EXPECT_EQ(elbow(from_points(blobs(gen, 12, 2)), 6, params(1)).suggested_k, 2);
    EXPECT_EQ(elbow(from_points({{0.0}, {5.0}}), 1, params(1)).suggested_k, 1);
    EXPECT_EQ(suggest_k({{1, 100}, {2, 10}, {3, 8}, {4, 7}}), 2);
    EXPECT_EQ(suggest_k({{1, 10}, {2, 9}, {3, 1}}), 1);
}

TEST(Views, BarsLinesAndPolygons) {
    ClusterResult r;
    r.k = 3;
    const std::vector<int> assign{0, 1, 0, 2, 0, 1, 0, 2, 0, 1};
    for (std::size_t i = 0; i < assign.size(); ++i) {
        const std::string id = "t" + std::to_string(i);
        r.assignments[id] = assign[i];
        r.features.push_back(fv(id, {static_cast<double>(i)}, {static_cast<double>(i), 0.0}));
    }
    auto v = cluster_views(r);
    EXPECT_EQ(v.bars, (std::vector<std::size_t>{5, 3, 2}));
    EXPECT_EQ(v.line[2].members, (std::vector<std::string>{"t3", "t7"}));
    EXPECT_EQ(v.line[2].series, (std::vector<std::vector<double>>{{3.0}, {7.0}}));
    EXPECT_EQ(v.spider[2].polygon, (std::vector<double>{5.0, 0.0}));
    EXPECT_EQ(v.spider[0].polygon, (std::vector<double>{4.0, 0.0}));
}

TEST(Views, SingletonAndMirroredPolygons) {
    ClusterResult r;
    r.k = 2;
    r.assignments = {{"a", 0}, {"b", 1}};
    r.features = {fv("a", {0.0}, {0.3, -0.6, 0.9}), fv("b", {0.0}, {-0.3, 0.6, -0.9})};
    auto v = cluster_views(r);
    EXPECT_EQ(v.spider[0].polygon, r.features[0].level_aggregates);
    for (std::size_t l = 0; l < 3; ++l) EXPECT_EQ(v.spider[0].polygon[l], -v.spider[1].polygon[l]);
}

TEST(Features, Extraction) {
    auto f = extract_features({"a", "b"}, {{1, 2, 0, 0}, {0, 0, 0, 0}}, {{1, 1, -2, 0}, {0, 0, 0, 0}}, 2);
    ASSERT_EQ(f.size(), 2u);
    EXPECT_EQ(f[0].values, (std::vector<double>{1, 2, 0, 0}));
    EXPECT_EQ(f[0].level_aggregates, (std::vector<double>{1.0, -1.0}));
    EXPECT_EQ(f[1].level_aggregates, (std::vector<double>{0.0, 0.0}));
}

TEST(Features, LengthMismatch) {
    EXPECT_THROW(extract_features({"a", "b"}, {{1, 2}, {1}}, {{1, 2}, {1}}, 1), LengthMismatch);
    EXPECT_THROW(extract_features({"a"}, {{1, 2, 3}}, {{1, 2, 3}}, 2), LengthMismatch);
    EXPECT_THROW(extract_features({"a", "b"}, {{1}}, {{1}}, 1), LengthMismatch);
}
