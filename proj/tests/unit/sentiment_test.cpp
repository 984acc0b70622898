#include "ctfminer/error.hpp"
#include "ctfminer/sentiment.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace ctfminer;
using namespace testsupport;

namespace {

// One level of `span_ms`, body events given as (kind, fraction of span).
std::vector<Event> level_run(const std::string& t, int level, long long offset, long long span_ms,
                             const std::vector<std::pair<std::string, double>>& body) {
    std::vector<Event> out{game(t, level, GameType::LevelStarted, offset)};
    for (const auto& [kind, frac] : body) {
        const long long ms = offset + static_cast<long long>(std::llround(frac * static_cast<double>(span_ms)));
        if (kind == "bash") {
            out.push_back(bash(t, level, "ls", ms));
        } else if (kind == "msf") {
            out.push_back(msf(t, level, "use x", ms));
        } else {
            out.push_back(game(t, level, *parse_game_type(kind), ms));
        }
    }
    out.push_back(game(t, level, GameType::CorrectAnswerSubmitted, offset + span_ms));
    return out;
}

std::vector<Event> concat(std::vector<std::vector<Event>> parts) {
    std::vector<Event> out;
    for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
}

const SentimentConfig kDefaults = SentimentConfig::engagement_defaults();

}  // namespace

TEST(Grid, DefaultGeometry) {
    auto log = mapped(level_run("t", 1, 0, 100'000, {}));
    auto grid = build_window_grid(log, kDefaults);
    ASSERT_EQ(grid.windows_per_level(), 3u);
    EXPECT_DOUBLE_EQ(grid.windows[0].start_pct, 0.0);
    EXPECT_DOUBLE_EQ(grid.windows[0].end_pct, 50.0);
    EXPECT_DOUBLE_EQ(grid.windows[1].start_pct, 40.0);
    EXPECT_DOUBLE_EQ(grid.windows[1].end_pct, 90.0);
    EXPECT_DOUBLE_EQ(grid.windows[2].start_pct, 80.0);
    EXPECT_DOUBLE_EQ(grid.windows[2].end_pct, 100.0);
}

TEST(Grid, WindowCountProperty) {
    Gen gen(11);
    for (int round = 0; round < 300; ++round) {
        SentimentConfig cfg = kDefaults;
        cfg.step_pct = gen.real(0.5, 100.0);
        cfg.window_pct = gen.real(0.5, 100.0);
        auto grid = build_window_grid(mapped(level_run("t", 1, 0, 1000, {})), cfg);
        std::size_t expected = 0;
        while (static_cast<double>(expected) * cfg.step_pct < 100.0 - 1e-9) ++expected;
        ASSERT_EQ(grid.windows_per_level(), expected);
        for (std::size_t k = 0; k < expected; ++k) {
            EXPECT_LE(grid.geometry.ends[k], 1.0);
            EXPECT_GT(grid.geometry.ends[k], grid.geometry.starts[k]);
        }
    }
}

TEST(Grid, FixtureHasNineWindowsAndMissingBoundary) {
    auto log = map_activities(fixture_log(), {});
    auto grid = build_window_grid(log, kDefaults);
    EXPECT_EQ(grid.windows_per_level(), 3u);
    EXPECT_EQ(grid.windows.size(), 9u);
    bool t10_level3 = false;
    for (const auto& m : grid.missing) t10_level3 |= (m.trainee_id == "t10" && m.level == 3);
    EXPECT_TRUE(t10_level3);
    EXPECT_FALSE(grid.included("t10", 3));
}

TEST(Grid, InvalidConfig) {
    SentimentConfig cfg = kDefaults;
    cfg.step_pct = 0.0;
    EXPECT_THROW(cfg.validate(), InvalidConfig);
    cfg = kDefaults;
    cfg.weights["Bogus"] = 1.0;
    EXPECT_THROW(cfg.validate(), InvalidConfig);
    EXPECT_THROW(sentiment_config_from_json(Json{{"window_pct", -3}}), InvalidConfig);
}

TEST(Scores, HandComputedWindow) {
    // two hints and three commands early in the level: 2*(-5) + 3*1
    auto log = mapped(level_run("t", 1, 0, 100'000,
                                {{"HintTaken", 0.05}, {"HintTaken", 0.1}, {"bash", 0.12}, {"bash", 0.2}, {"msf", 0.3}}));
    auto grid = build_window_grid(log, kDefaults);
    auto raw = window_score_matrix(log, grid, kDefaults);
    ASSERT_EQ(raw.cols, 3u);
    EXPECT_DOUBLE_EQ(raw(0, 0), -7.0);
    EXPECT_DOUBLE_EQ(raw(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(raw(0, 2), 0.0);
}

TEST(Scores, OverlapCountsInBothWindows) {
    auto log = mapped(level_run("t", 1, 0, 100'000, {{"SolutionDisplayed", 0.45}}));
    auto grid = build_window_grid(log, kDefaults);
    auto raw = window_score_matrix(log, grid, kDefaults);
    EXPECT_DOUBLE_EQ(raw(0, 0), -20.0);
    EXPECT_DOUBLE_EQ(raw(0, 1), -20.0);
    EXPECT_DOUBLE_EQ(raw(0, 2), 0.0);
}

TEST(Scores, UnscoredKindsIgnored) {
    SentimentConfig cfg = kDefaults;
    cfg.scored_kinds = {"bash"};
    auto log = mapped(level_run("t", 1, 0, 100'000, {{"HintTaken", 0.1}, {"bash", 0.1}}));
    auto raw = window_score_matrix(log, build_window_grid(log, cfg), cfg);
    EXPECT_DOUBLE_EQ(raw(0, 0), 1.0);
}

TEST(Normalize, RangeProperty) {
    Gen gen(5);
    for (int round = 0; round < 1000; ++round) {
        std::vector<double> raw(static_cast<std::size_t>(gen.uniform(1, 20)));
        for (auto& x : raw) x = static_cast<double>(gen.uniform(-60, 40));
        for (auto mode : {kernels::Normalization::SymmetricMedian, kernels::Normalization::Literal}) {
            for (double v : normalize_window(raw, mode)) {
                ASSERT_GE(v, -1.0 - 1e-12);
                ASSERT_LE(v, 1.0 + 1e-12);
            }
        }
    }
}

TEST(Normalize, MedianMapsToZeroAndExtremeToUnit) {
    Gen gen(6);
    for (int round = 0; round < 500; ++round) {
        std::vector<double> raw(static_cast<std::size_t>(gen.uniform(1, 15)));
        for (auto& x : raw) x = gen.real(-50.0, 50.0);
        std::vector<double> sorted = raw;
        std::sort(sorted.begin(), sorted.end());
        const double median = sorted[(sorted.size() - 1) / 2];
        double scale = 0.0;
        for (double x : raw) scale = std::max(scale, std::abs(x - median));
        auto norm = normalize_window(raw);
        for (std::size_t i = 0; i < raw.size(); ++i) {
            const double expected = scale > 0.0 ? (raw[i] - median) / scale : 0.0;
            ASSERT_DOUBLE_EQ(norm[i], expected);
            if (raw[i] == median) ASSERT_EQ(norm[i], 0.0);
        }
        if (scale > 0.0) {
            double extreme = 0.0;
            for (double v : norm) extreme = std::max(extreme, std::abs(v));
            ASSERT_DOUBLE_EQ(extreme, 1.0);
        }
    }
}

TEST(Normalize, DegenerateWindowIsZero) {
    EXPECT_EQ(normalize_window(std::vector<double>{3, 3, 3}), (std::vector<double>{0, 0, 0}));
    EXPECT_EQ(normalize_window(std::vector<double>{-2, -5}, kernels::Normalization::Literal),
              (std::vector<double>{0, 0}));
}

TEST(Sentiment, DoublingCountsDoublesRawKeepsNormalized) {
    Gen gen(21);
    std::vector<std::string> kinds{"HintTaken", "SolutionDisplayed", "WrongAnswerSubmitted", "bash", "msf"};
    for (int round = 0; round < 50; ++round) {
        std::vector<std::vector<Event>> once, twice;
        for (int t = 0; t < gen.uniform(2, 6); ++t) {
            std::vector<std::pair<std::string, double>> body;
            for (int i = 0; i < gen.uniform(0, 12); ++i) body.push_back({gen.pick(kinds), gen.real(0.0, 1.0)});
            auto doubled = body;
            doubled.insert(doubled.end(), body.begin(), body.end());
            const std::string id = "t" + std::to_string(t);
            once.push_back(level_run(id, 1, 0, 60'000, body));
            twice.push_back(level_run(id, 1, 0, 60'000, doubled));
        }
        auto a = compute_sentiment(mapped(concat(once)), kDefaults);
        auto b = compute_sentiment(mapped(concat(twice)), kDefaults);
        ASSERT_EQ(a.raw.data.size(), b.raw.data.size());
        for (std::size_t i = 0; i < a.raw.data.size(); ++i) ASSERT_EQ(2.0 * a.raw.data[i], b.raw.data[i]);
        for (std::size_t i = 0; i < a.normalized.data.size(); ++i) {
            ASSERT_NEAR(a.normalized.data[i], b.normalized.data[i], 1e-12);
        }
    }
}

TEST(Sentiment, TimeDilationInvariance) {
    Gen gen(22);
    std::vector<std::string> kinds{"HintTaken", "WrongAnswerSubmitted", "bash"};
    for (int round = 0; round < 50; ++round) {
        std::vector<std::pair<std::string, double>> body;
        for (int i = 0; i < gen.uniform(1, 10); ++i) body.push_back({gen.pick(kinds), gen.uniform(0, 100) / 100.0});
        auto fast = mapped(level_run("a", 1, 0, 10'000, body));
        auto slow = mapped(level_run("a", 1, 5'000, 70'000, body));
        auto ra = window_score_matrix(fast, build_window_grid(fast, kDefaults), kDefaults);
        auto rb = window_score_matrix(slow, build_window_grid(slow, kDefaults), kDefaults);
        ASSERT_EQ(ra, rb);
    }
}

TEST(Sentiment, ExcludedTraineeScoresZeroAndSkipsMedian) {
    // "c" never finishes the level
    auto events = concat({level_run("a", 1, 0, 100, {{"HintTaken", 0.1}}), level_run("b", 1, 0, 100, {{"bash", 0.1}})});
    events.push_back(game("c", 1, GameType::LevelStarted, 0));
    events.push_back(game("c", 1, GameType::HintTaken, 5));
    auto r = compute_sentiment(mapped(events), kDefaults);
    ASSERT_EQ(r.grid.trainees, (std::vector<std::string>{"a", "b", "c"}));
    // lower median of {-5, 1} is -5
    EXPECT_DOUBLE_EQ(r.normalized(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(r.normalized(1, 0), 1.0);
    EXPECT_DOUBLE_EQ(r.normalized(2, 0), 0.0);
    EXPECT_DOUBLE_EQ(r.raw(2, 0), 0.0);
}

TEST(Sentiment, CumulativeCarriesForward) {
    auto events = concat({level_run("a", 1, 0, 100, {{"HintTaken", 0.1}}), level_run("a", 2, 200, 100, {}),
                          level_run("b", 1, 0, 100, {{"bash", 0.1}}), level_run("b", 2, 200, 100, {})});
    auto r = compute_sentiment(mapped(events), kDefaults);
    for (const auto& s : r.series) {
        const auto row = *r.grid.trainee_row(s.trainee_id);
        double acc = 0.0;
        for (std::size_t w = 0; w < s.cumulative.size(); ++w) {
            acc += r.normalized(row, w);
            EXPECT_DOUBLE_EQ(s.cumulative[w], acc);
        }
    }
    EXPECT_EQ(cumulative_sum(std::vector<double>{0.5, 0.0, -1.0}), (std::vector<double>{0.5, 0.5, -0.5}));
}

TEST(Sentiment, SerialAndParallelIdentical) {
    auto log = map_activities(fixture_log(), {});
    auto s = compute_sentiment(log, kDefaults, kernels::ExecPolicy::Serial);
    auto p = compute_sentiment(log, kDefaults, kernels::ExecPolicy::Parallel);
    EXPECT_EQ(s.raw, p.raw);
    EXPECT_EQ(s.normalized, p.normalized);
    EXPECT_EQ(canonical_dump(to_json(s)), canonical_dump(to_json(p)));
}

TEST(Display, CoincidentPointsMerge) {
    std::vector<std::string> ids{"a", "b", "c"};
    std::vector<std::vector<double>> cum{{0.0, 1.0, 2.0}, {0.0, 1.0, 2.0}, {0.0, -1.0, -2.0}};
    auto points = merge_display_points(ids, cum, 1.0);
    // x=0 joins all three; x=1 and x=2 each hold one joint for a+b and one for c
    ASSERT_EQ(points.size(), 5u);
    std::size_t members = 0;
    for (const auto& p : points) members += p.members.size();
    EXPECT_EQ(members, 9u);
    EXPECT_EQ(points[0].members.size(), 3u);
}

TEST(Display, ZeroRadiusMergesOnlyExactDuplicates) {
    std::vector<std::string> ids{"a", "b"};
    auto points = merge_display_points(ids, {{0.0, 0.5}, {0.0, 0.5000001}}, 0.0);
    EXPECT_EQ(points.size(), 3u);
}

TEST(Sentiment, ConfigJsonRoundTrip) {
    SentimentConfig cfg = kDefaults;
    cfg.window_pct = 30;
    cfg.step_pct = 20;
    cfg.weights["HintTaken"] = -7.5;
    EXPECT_EQ(sentiment_config_from_json(to_json(cfg)), cfg);
}

TEST(Sentiment, FixtureLowEngagementTraineesStayBelowMedian) {
    const auto r = compute_sentiment(map_activities(fixture_log(), {}), kDefaults);
    const auto low = persistently_low(r, 0.8);
    EXPECT_TRUE(std::find(low.begin(), low.end(), "t03") != low.end() ||
                std::find(low.begin(), low.end(), "t08") != low.end());
}
