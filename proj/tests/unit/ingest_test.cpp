#include "ctfminer/error.hpp"
#include "ctfminer/ingest.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace ctfminer;

namespace {

const char* kNormalized =
    R"({"timestamp":"2021-03-24T09:00:00.000Z","trainee_id":"a","level":1,"event_class":"game","game_type":"LevelStarted","content":""})"
    "\n\n"
    R"({"timestamp":"2021-03-24T09:00:05.000Z","trainee_id":"a","level":1,"event_class":"bash","content":"nmap  -sV host"})"
    "\n";

}  // namespace

TEST(NormalizedAdapter, ParsesAndSkipsBlankLines) {
    const auto records = split_records(kNormalized, "x.jsonl");
    auto r = ingest(records, "normalized", "d");
    EXPECT_TRUE(r.errors.empty());
    EXPECT_EQ(r.record_count, 2u);
    ASSERT_EQ(r.log.size(), 2u);
    EXPECT_EQ(r.log.events()[1].event_class, EventClass::Bash);
    EXPECT_EQ(r.log.events()[1].content, "nmap  -sV host");
}

TEST(NormalizedAdapter, ReportsLineNumbers) {
    std::string text = kNormalized;
    text += R"({"timestamp":"not a time","trainee_id":"a","level":1,"event_class":"bash","content":"ls"})"
            "\n"
            R"({"timestamp":"2021-03-24T09:00:06.000Z","trainee_id":"a","level":1,"event_class":"bash","content":"ls","extra":1})"
            "\n";
    auto r = ingest(split_records(text), "normalized", "d");
    ASSERT_EQ(r.errors.size(), 2u);
    EXPECT_EQ(r.errors[0].line, 4u);
    EXPECT_EQ(r.errors[1].line, 5u);
    EXPECT_EQ(r.log.size(), 2u);
}

TEST(NormalizedAdapter, RoundTripsThroughWriter) {
    auto r = ingest(split_records(kNormalized), "normalized", "d");
    auto again = ingest(split_records(write_normalized(r.log)), "normalized", "d");
    EXPECT_EQ(r.log, again.log);
}

TEST(Ingest, UnknownAdapterAndEmptyInput) {
    EXPECT_THROW(ingest(split_records(kNormalized), "nope", "d"), UnknownAdapter);
    EXPECT_THROW(ingest(split_records("\n\n"), "normalized", "d"), EmptyDataset);
    EXPECT_THROW(ingest(split_records("{]\n"), "normalized", "d"), EmptyDataset);
}

TEST(KypoAdapter, InheritsLevelsAndRenumbers) {
    const std::string game =
        R"({"type":"cz.muni.csirt.kypo.events.trainings.LevelStarted","timestamp":"2021-03-24T09:00:00Z","level":57,"sandbox_id":"s1"})"
        "\n"
        R"({"type":"cz.muni.csirt.kypo.events.trainings.CorrectFlagSubmitted","timestamp":"2021-03-24T09:10:00Z","level":57,"sandbox_id":"s1"})"
        "\n"
        R"({"type":"cz.muni.csirt.kypo.events.trainings.LevelStarted","timestamp":"2021-03-24T09:10:01Z","level":60,"sandbox_id":"s1"})"
        "\n";
    const std::string cmds =
        R"({"cmd":"nmap 10.1.1.1","cmd_type":"bash-command","timestamp_str":"2021-03-24T09:05:00Z","sandbox_id":"s1"})"
        "\n"
        R"({"cmd":"use exploit/x","cmd_type":"msf-command","timestamp_str":"2021-03-24T09:12:00Z","sandbox_id":"s1"})"
        "\n"
        R"({"type":"cz.muni.csirt.kypo.events.trainings.Unknown","timestamp":"2021-03-24T09:12:00Z","sandbox_id":"s1"})"
        "\n";
    auto records = split_records(game, "s1/events.json");
    auto more = split_records(cmds, "s1/commands.json");
    records.insert(records.end(), more.begin(), more.end());
    auto r = ingest(records, "kypo", "k");
    ASSERT_EQ(r.errors.size(), 1u);
    EXPECT_EQ(r.errors[0].origin, "s1/commands.json");
    EXPECT_EQ(r.errors[0].line, 3u);
    EXPECT_EQ(r.log.levels(), (std::vector<int>{1, 2}));
    const auto& ev = r.log.events();
    ASSERT_EQ(ev.size(), 5u);
    EXPECT_EQ(ev[1].event_class, EventClass::Bash);
    EXPECT_EQ(ev[1].level, 1);
    EXPECT_EQ(ev[2].game_type, GameType::CorrectAnswerSubmitted);
    EXPECT_EQ(ev[4].event_class, EventClass::Msf);
    EXPECT_EQ(ev[4].level, 2);
}

TEST(KypoAdapter, TraineeFromDirectoryWhenNoSandbox) {
    auto r = ingest(split_records(R"({"cmd":"ls","timestamp_str":"2021-03-24T09:05:00Z"})", "exports/user-7/bash.json"),
                    "kypo", "k");
    ASSERT_EQ(r.log.size(), 1u);
    EXPECT_EQ(r.log.events()[0].trainee_id, "user-7");
}

TEST(KypoAdapter, SampleExportParsesCleanly) {
    auto r = ingest(read_records(CTFMINER_TEST_DATA "/kypo"), "kypo", "k");
    EXPECT_TRUE(r.errors.empty());
    EXPECT_EQ(r.log.trainees().size(), 2u);
    EXPECT_EQ(r.log.levels(), (std::vector<int>{1, 2}));
}
