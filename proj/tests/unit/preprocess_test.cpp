#include "ctfminer/error.hpp"
#include "ctfminer/preprocess.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace ctfminer;
using namespace testsupport;

namespace {

std::vector<std::string> contents(const EventLog& log) {
    std::vector<std::string> out;
    for (const auto& e : log.events()) out.push_back(e.content);
    return out;
}

}  // namespace

TEST(Preprocess, RemovesDuplicatesInsideWindowOnly) {
    auto log = EventLog::build("d", {bash("a", 1, "ls -la", 0), bash("a", 1, "ls   -la", 400), bash("a", 1, "ls -la", 1400),
                                     bash("b", 1, "ls -la", 500), msf("a", 1, "ls -la", 600)});
    auto [out, report] = preprocess(log, {});
    EXPECT_EQ(report.duplicates, 1u);
    EXPECT_EQ(out.size(), 4u);
    EXPECT_EQ(report.removed.at(0).event.timestamp, at(400));
}

TEST(Preprocess, DedupWindowIsInclusive) {
    auto log = EventLog::build("d", {bash("a", 1, "ls", 0), bash("a", 1, "ls", 1000), bash("a", 1, "ls", 2001)});
    auto [out, report] = preprocess(log, {});
    EXPECT_EQ(report.duplicates, 1u);
    EXPECT_EQ(out.size(), 2u);
}

TEST(Preprocess, GarbagePatterns) {
    PreprocessConfig cfg;
    cfg.garbage_patterns = {"^\\^\\[", "^q+$"};
    auto log = EventLog::build("d", {bash("a", 1, "^[[A", 0), bash("a", 1, "qqq", 5000), bash("a", 1, "quit", 9000),
                                     game("a", 1, GameType::HintTaken, 10000, "qqq")});
    auto [out, report] = preprocess(log, cfg);
    EXPECT_EQ(report.garbage, 2u);
    EXPECT_EQ(contents(out), (std::vector<std::string>{"quit", "qqq"}));
}

TEST(Preprocess, PasteBurstNeedsThresholdAndTightGaps) {
    std::vector<Event> ev;
    // five pasted non-commands within 2 s of each other
    for (int i = 0; i < 5; ++i) ev.push_back(bash("a", 1, "line" + std::to_string(i), 100 * i));
    // four unknown words: below the threshold
    for (int i = 0; i < 4; ++i) ev.push_back(bash("b", 1, "word" + std::to_string(i), 100 * i));
    // a vocabulary command breaks the run
    for (int i = 0; i < 6; ++i) ev.push_back(bash("c", 1, i == 3 ? "ls" : "x" + std::to_string(i), 100 * i));
    // slow typing: gaps above the burst window
    for (int i = 0; i < 6; ++i) ev.push_back(bash("d", 1, "y" + std::to_string(i), 3000 * i));
    auto [out, report] = preprocess(EventLog::build("d", ev), {});
    EXPECT_EQ(report.bursts, 5u);
    for (const auto& e : out.events()) EXPECT_NE(e.trainee_id, "a");
    EXPECT_EQ(out.size(), 4u + 6u + 6u);
}

TEST(Preprocess, PathCommandsCountAsVocabulary) {
    std::vector<Event> ev;
    for (int i = 0; i < 6; ++i) ev.push_back(bash("a", 1, "/usr/bin/nmap -p" + std::to_string(i), 100 * i));
    auto [out, report] = preprocess(EventLog::build("d", ev), {});
    EXPECT_EQ(report.bursts, 0u);
}

TEST(Preprocess, NeverRemovesGameEvents) {
    PreprocessConfig cfg;
    cfg.garbage_patterns = {".*"};
    std::vector<Event> ev;
    for (int i = 0; i < 6; ++i) ev.push_back(game("a", 1, GameType::WrongAnswerSubmitted, 10 * i, "same"));
    for (int i = 0; i < 6; ++i) ev.push_back(bash("a", 1, "zz", 10 * i));
    auto [out, report] = preprocess(EventLog::build("d", ev), cfg);
    EXPECT_EQ(out.size(), 6u);
    for (const auto& e : out.events()) EXPECT_EQ(e.event_class, EventClass::Game);
}

TEST(Preprocess, IdempotentOnRandomLogs) {
    Gen g(3);
    const std::vector<std::string> words = {"ls", "cat x", "foo", "bar", "baz", "nmap h", "^[[A"};
    PreprocessConfig cfg;
    cfg.garbage_patterns = {"^\\^\\["};
    for (int round = 0; round < 200; ++round) {
        std::vector<Event> ev;
        const int n = g.uniform(0, 40);
        for (int i = 0; i < n; ++i) {
            const std::string t = g.coin() ? "a" : "b";
            const long long ms = g.uniform(0, 20000);
            if (g.coin(0.2)) {
                ev.push_back(game(t, 1, GameType::HintTaken, ms));
            } else {
                ev.push_back(bash(t, 1, g.pick(words), ms));
            }
        }
        auto once = preprocess(EventLog::build("d", ev), cfg).first;
        auto [twice, report] = preprocess(once, cfg);
        EXPECT_EQ(report.total(), 0u);
        EXPECT_EQ(once, twice);
    }
}

TEST(PreprocessConfig, JsonRoundTripAndValidation) {
    PreprocessConfig cfg;
    cfg.dedup_window = Millis(250);
    cfg.garbage_patterns = {"^x$"};
    EXPECT_EQ(preprocess_config_from_json(to_json(cfg)), cfg);
    EXPECT_THROW(preprocess_config_from_json(Json{{"garbage_patterns", {"("}}}), InvalidConfig);
    EXPECT_THROW(preprocess_config_from_json(Json{{"burst_count_threshold", 0}}), InvalidConfig);
}
