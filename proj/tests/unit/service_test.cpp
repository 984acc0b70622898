#include "ctfminer/error.hpp"
#include "ctfminer/pipeline.hpp"
#include "ctfminer/service.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <fstream>
#include <sstream>
#include <thread>

using namespace ctfminer;
using namespace testsupport;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path scratch_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() /
               ("ctfminer-" + tag + "-" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

class ServiceTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new std::filesystem::path(scratch_dir("service"));
        ServiceConfig cfg;
        cfg.port = 0;
        cfg.data_dir = *dir_;
        server_ = new AnalysisServer(cfg);
        port_ = server_->bind();
        ASSERT_GT(port_, 0);
        thread_ = new std::thread([] { server_->serve(); });
        server_->wait_until_ready();

        httplib::Client cli("127.0.0.1", port_);
        auto res = cli.Post("/datasets", upload(slurp(CTFMINER_TEST_DATA "/fixture.jsonl"), "fixture.jsonl"));
        ASSERT_TRUE(res);
        ASSERT_EQ(res->status, 201) << res->body;
    }

    static void TearDownTestSuite() {
        server_->stop();
        thread_->join();
        delete thread_;
        delete server_;
        std::filesystem::remove_all(*dir_);
        delete dir_;
    }

    static httplib::MultipartFormDataItems upload(const std::string& content, const std::string& filename,
                                                  std::vector<std::pair<std::string, std::string>> fields = {}) {
        httplib::MultipartFormDataItems items{{"file", content, filename, "application/octet-stream"}};
        for (auto& [k, v] : fields) items.push_back({k, v, "", ""});
        return items;
    }

    httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }

    Json post(const std::string& path, const Json& body, int expect) {
        auto cli = client();
        auto res = cli.Post(path, body.dump(), "application/json");
        EXPECT_TRUE(res);
        if (!res) return {};
        EXPECT_EQ(res->status, expect) << path << " " << res->body;
        EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
        return Json::parse(res->body);
    }

    static inline std::filesystem::path* dir_ = nullptr;
    static inline AnalysisServer* server_ = nullptr;
    static inline std::thread* thread_ = nullptr;
    static inline int port_ = 0;
};

}  // namespace

TEST_F(ServiceTest, Health) {
    auto cli = client();
    auto res = cli.Get("/health");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(Json::parse(res->body)["status"], "ok");
}

TEST_F(ServiceTest, ListAndSummary) {
    auto cli = client();
    auto res = cli.Get("/datasets");
    ASSERT_TRUE(res);
    auto list = Json::parse(res->body)["datasets"];
    ASSERT_EQ(list.size(), 1u);
    EXPECT_EQ(list[0]["id"], "fixture");
    res = cli.Get("/datasets/fixture/summary");
    ASSERT_TRUE(res);
    auto stats = Json::parse(res->body)["dataset"]["stats"];
    EXPECT_EQ(stats["trainees"], 10);
}

TEST_F(ServiceTest, UploadErrors) {
    auto cli = client();
    auto dup = cli.Post("/datasets", upload("{}", "fixture.jsonl"));
    ASSERT_TRUE(dup);
    EXPECT_EQ(dup->status, 409);
    EXPECT_EQ(Json::parse(dup->body)["code"], "DuplicateId");

    auto adapter = cli.Post("/datasets", upload("x", "other.jsonl", {{"adapter", "nope"}}));
    ASSERT_TRUE(adapter);
    EXPECT_EQ(adapter->status, 400);
    EXPECT_EQ(Json::parse(adapter->body)["code"], "UnknownAdapter");

    const std::string good = R"({"timestamp":"2021-03-24T09:00:00Z","trainee_id":"a","level":1,"event_class":"bash","content":"ls"})";
    auto bad = cli.Post("/datasets", upload(good + "\nnot json\n", "broken.jsonl"));
    ASSERT_TRUE(bad);
    EXPECT_EQ(bad->status, 400);
    auto body = Json::parse(bad->body);
    EXPECT_EQ(body["code"], "ParseError");
    ASSERT_FALSE(body["details"].empty());
    EXPECT_NE(body["details"][0].get<std::string>().find('2'), std::string::npos);

    auto form = cli.Post("/datasets", "{}", "application/json");
    ASSERT_TRUE(form);
    EXPECT_EQ(form->status, 400);
}

TEST_F(ServiceTest, UnknownDatasetIs404) {
    auto body = post("/datasets/missing/graph", Json::object(), 404);
    EXPECT_EQ(body["code"], "UnknownDataset");
}

TEST_F(ServiceTest, InvalidRequestsAre422) {
    EXPECT_EQ(post("/datasets/fixture/clusters", {{"clustering", {{"k", 500}}}}, 422)["code"], "KTooLarge");
    EXPECT_EQ(post("/datasets/fixture/graph", {{"filter", {{"included_levels", {1, 3}}}}}, 422)["code"],
              "InvalidSpec");
    EXPECT_EQ(post("/datasets/fixture/graph", {{"bogus", 1}}, 422)["code"], "InvalidSpec");
    EXPECT_EQ(post("/datasets/fixture/graph", {{"filter", {{"included_trainees", {"nobody"}}}}}, 422)["code"],
              "InvalidSpec");
    auto cli = client();
    auto res = cli.Post("/datasets/fixture/graph", "{not json", "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 400);
}

TEST_F(ServiceTest, EveryAnalyticEndpointMatchesLibraryAndReplays) {
    const auto log = fixture_log();
    const Json request = {{"clustering", {{"k", 2}, {"seed", 3}}}, {"proximity", {{"window", 1}}}};
    const auto q = query_from_json(request);
    const std::vector<std::pair<std::string, Json (*)(const EventLog&, const QueryRequest&)>> routes{
        {"graph", graph_query},       {"sentiment", sentiment_query}, {"clusters", clusters_query},
        {"elbow", elbow_query},       {"matrix", matrix_query},       {"proximity", proximity_query},
        {"overview", overview_query}, {"validate", validate_query}};
    auto cli = client();
    for (const auto& [name, fn] : routes) {
        auto res = cli.Post("/datasets/fixture/" + name, request.dump(), "application/json");
        ASSERT_TRUE(res);
        ASSERT_EQ(res->status, 200) << name << " " << res->body;
        auto expected = fn(log, q);
        EXPECT_EQ(Json::parse(res->body).dump(), Json::parse(render(expected)).dump()) << name;
        auto replay = cli.Post("/datasets/fixture/" + name, Json::parse(res->body)["config"].dump(), "application/json");
        ASSERT_TRUE(replay);
        EXPECT_EQ(replay->body, res->body) << name;
    }
}

TEST_F(ServiceTest, ResponsesAreDeterministic) {
    const Json request = {{"clustering", {{"k", 3}, {"seed", 11}}}};
    auto a = post("/datasets/fixture/clusters", request, 200);
    auto b = post("/datasets/fixture/clusters", request, 200);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a["config"]["clustering"]["seed"], 11);
}

TEST_F(ServiceTest, DotExport) {
    auto cli = client();
    auto res = cli.Get("/datasets/fixture/export/dot?mode=performance&stat=median");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(res->get_header_value("Content-Type"), "text/vnd.graphviz");
    EXPECT_EQ(res->body.rfind("digraph process {", 0), 0u);
    auto bad = cli.Get("/datasets/fixture/export/dot?threshold=abc");
    ASSERT_TRUE(bad);
    EXPECT_EQ(bad->status, 422);
}

TEST_F(ServiceTest, UploadThenDelete) {
    auto cli = client();
    const std::string text = R"({"timestamp":"2021-03-24T09:00:00Z","trainee_id":"a","level":1,"event_class":"bash","content":"ls"})";
    auto res = cli.Post("/datasets", upload(text + "\n", "tmp.jsonl", {{"id", "scratch"}, {"name", "Scratch"}}));
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, 201) << res->body;
    EXPECT_EQ(Json::parse(res->body)["dataset"]["name"], "Scratch");
    auto del = cli.Delete("/datasets/scratch");
    ASSERT_TRUE(del);
    EXPECT_EQ(del->status, 200);
    auto gone = cli.Get("/datasets/scratch/summary");
    ASSERT_TRUE(gone);
    EXPECT_EQ(gone->status, 404);
}

TEST_F(ServiceTest, CorsPreflight) {
    auto cli = client();
    auto res = cli.Options("/datasets/fixture/graph");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 204);
    EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
}

TEST(ServiceConfig, Precedence) {
    auto dir = scratch_dir("config");
    const auto file = dir / "service.json";
    std::ofstream(file) << R"({"port": 9000, "host": "0.0.0.0", "log_level": "debug"})";
    std::map<std::string, std::string> env{{"CTFMINER_PORT", "9100"}, {"CTFMINER_DATA_DIR", "/srv/x"}};
    auto lookup = [&](const std::string& k) -> std::optional<std::string> {
        auto it = env.find(k);
        if (it == env.end()) return std::nullopt;
        return it->second;
    };
    auto cfg = load_service_config(file, lookup);
    EXPECT_EQ(cfg.port, 9100);
    EXPECT_EQ(cfg.host, "0.0.0.0");
    EXPECT_EQ(cfg.log_level, "debug");
    EXPECT_EQ(cfg.data_dir, "/srv/x");

    auto defaults = load_service_config(std::nullopt, [](const std::string&) { return std::nullopt; });
    EXPECT_EQ(defaults.port, 8080);
    EXPECT_EQ(defaults.host, "127.0.0.1");

    std::ofstream(file) << R"({"prot": 1})";
    EXPECT_THROW(load_service_config(file, lookup), InvalidConfig);
    env["CTFMINER_PORT"] = "http";
    std::ofstream(file) << "{}";
    EXPECT_THROW(load_service_config(file, lookup), InvalidConfig);
    std::filesystem::remove_all(dir);
}

TEST(ServiceErrors, StatusMapping) {
    EXPECT_EQ(http_status("UnknownDataset"), 404);
    EXPECT_EQ(http_status("DuplicateId"), 409);
    EXPECT_EQ(http_status("ParseError"), 400);
    EXPECT_EQ(http_status("KTooLarge"), 422);
    EXPECT_EQ(http_status("Whatever"), 500);
    EXPECT_EQ(error_body("X", "m"), (Json{{"code", "X"}, {"message", "m"}, {"details", Json::array()}}));
}

TEST(Pipeline, RequestEchoRoundTrip) {
    Json request = {{"filter", {{"included_levels", {1, 2}}}},
                    {"graph", {{"mode", "performance"}, {"stat", "mean"}, {"dependency_threshold", 0.25}}},
                    {"clustering", {{"k", 2}}},
                    {"k_max", 4}};
    auto q = query_from_json(request);
    auto echo = to_json(q);
    EXPECT_EQ(canonical_dump(to_json(query_from_json(echo))), canonical_dump(echo));
    EXPECT_THROW(query_from_json(Json{{"graph", {{"dependency_threshold", 2}}}}), InvalidSpec);
    EXPECT_THROW(query_from_json(Json::array()), InvalidSpec);
}

TEST(Pipeline, SuppressionDoesNotChangeAnalytics) {
    const auto log = fixture_log();
    QueryRequest q;
    q.clustering.k = 2;
    const auto before_s = render(sentiment_query(log, q));
    const auto before_c = render(clusters_query(log, q));
    // suppression is a view concern: the analytics request is unchanged
    SuppressionState state{{"t01", "t02", "t03", "t04", "t05"}};
    auto sel = suppression_selection(state, log.trainees(), nullptr, SuppressionSort::ById);
    EXPECT_EQ(sel.size(), 10u);
    EXPECT_EQ(render(sentiment_query(log, q)), before_s);
    EXPECT_EQ(render(clusters_query(log, q)), before_c);
}
