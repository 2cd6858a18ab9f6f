#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "idtrace/json_io.hpp"
#include "idtrace/service.hpp"

using namespace idtrace;
using namespace idtrace::service;
using nlohmann::json;

namespace {

const char* kSmall = "object_id,x,y\na,0,0\nb,0,1\nc,1,0\nd,1,1\n";

// 10 objects, attribute s splits 6/4, u is unique, m has a MISSING cell.
const char* kTen =
    "object_id,s,u,m\n"
    "o0,0,0,0\no1,0,1,0\no2,0,2,1\no3,0,3,1\no4,0,4,?\n"
    "o5,0,5,0\no6,1,6,1\no7,1,7,0\no8,1,8,1\no9,1,9,0\n";

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name)
        : path(std::filesystem::temp_directory_path() / ("idtrace_test_" + name)) {
        std::filesystem::remove_all(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

ServiceConfig config_in(const TempDir& dir) {
    ServiceConfig c;
    c.data_dir = dir.path;
    c.snapshot_every = 3;
    return c;
}

std::string upload(TraceService& svc, const char* csv) {
    const auto r = svc.upload_dataset(csv, "test");
    REQUIRE(r.status / 100 == 2);
    return r.body["dataset_id"].get<std::string>();
}

json observe(TraceService& svc, const json& session, const std::string& attr, const std::string& value) {
    const auto r = svc.post_observation(session["session_id"], {{"attribute", attr},
                                                                {"value", value},
                                                                {"expected_revision", session["revision"]}});
    REQUIRE(r.status == 200);
    return r.body;
}

// Fields that must survive a restart unchanged.
json replay_view(json s) {
    s.erase("updated_at");
    s.erase("created_at");
    return s;
}

}  // namespace

TEST_CASE("dataset upload, idempotency and errors") {
    TempDir dir("svc_datasets");
    TraceService svc(config_in(dir));
    const auto first = svc.upload_dataset(kSmall, "small");
    CHECK(first.status == 201);
    CHECK(first.body["objects"] == 4);
    CHECK(first.body["attributes"] == 2);
    CHECK(first.body["sha256"].get<std::string>().size() == 64);
    const auto again = svc.upload_dataset(kSmall, "other");
    CHECK(again.status == 200);
    CHECK(again.body["dataset_id"] == first.body["dataset_id"]);
    CHECK(svc.list_datasets().body["datasets"].size() == 1);

    const auto bad = svc.upload_dataset("object_id,x,y\na,0,0\nb,1\n", "bad");
    CHECK(bad.status == 400);
    CHECK(bad.body["error"]["code"] == "parse_error");
    CHECK(bad.body["error"]["row"] == 3);
    CHECK(svc.upload_dataset("object_id,x\na,0\na,1\n", "dup").body["error"]["code"] == "validation_error");

    const auto got = svc.get_dataset(first.body["dataset_id"]);
    CHECK(got.body["schema"][0]["name"] == "x");
    CHECK(got.body["schema"][0]["values"] == json::array({"0", "1"}));
    CHECK(svc.get_dataset("ds_nope").status == 404);
}

TEST_CASE("create_session examples") {
    TempDir dir("svc_create");
    TraceService svc(config_in(dir));
    const auto ds = upload(svc, kSmall);

    const auto empty = svc.create_session({{"dataset_id", ds}});
    CHECK(empty.status == 201);
    CHECK(empty.body["entropy"] == 2.0);
    CHECK(empty.body["entropy_exact"] == hexfloat(2.0));
    CHECK(empty.body["status"] == "active");
    CHECK(empty.body["candidate_count"] == 4);
    CHECK_FALSE(empty.body.contains("object_id"));

    const auto pinned = svc.create_session({{"dataset_id", ds}, {"known", {"x=1", "y=0"}}});
    CHECK(pinned.body["status"] == "identified");
    CHECK(pinned.body["object_id"] == "c");
    CHECK(pinned.body["entropy"] == 0.0);

    const auto structured = svc.create_session(
        {{"dataset_id", ds}, {"known", json::array({{{"attribute", "x"}, {"value", "0"}}})}});
    CHECK(structured.body["candidate_count"] == 2);

    CHECK(svc.create_session({{"dataset_id", "ds_missing"}}).status == 404);
    const auto bad_value = svc.create_session({{"dataset_id", ds}, {"known", {"x=7"}}});
    CHECK(bad_value.status == 400);
    CHECK(bad_value.body["error"]["code"] == "validation_error");
    CHECK(svc.create_session({{"dataset_id", ds}, {"known", {"nope=1"}}}).status == 400);
    CHECK(svc.create_session(json::object()).status == 400);
}

TEST_CASE("contradictory known gives an inconsistent session") {
    TempDir dir("svc_inconsistent");
    TraceService svc(config_in(dir));
    const auto ds = upload(svc, "object_id,x,y\na,0,0\nb,1,1\n");
    const auto r = svc.create_session({{"dataset_id", ds}, {"known", "x=0,y=1"}});
    CHECK(r.body["status"] == "inconsistent");
    CHECK(r.body["candidate_count"] == 0);
    CHECK(r.body["entropy"].is_null());
}

TEST_CASE("recommendations, whatif and observations") {
    TempDir dir("svc_flow");
    auto cfg = config_in(dir);
    cfg.display_threshold = 3;
    TraceService svc(cfg);
    const auto ds = upload(svc, kTen);
    auto s = svc.create_session({{"dataset_id", ds}}).body;
    CHECK_FALSE(s.contains("survivors"));
    const std::string id = s["session_id"];

    const auto rec = svc.recommendations(id, 2);
    REQUIRE(rec.status == 200);
    CHECK(rec.body["chosen"] == "u");
    CHECK(rec.body["ranking"].size() == 2);
    CHECK(rec.body["ranking"][0]["bits_exact"] == hexfloat(std::log2(10.0)));
    CHECK(rec.body["ranking"][0]["expected_candidate_count"] == 1.0);
    CHECK(rec.body["ranking"][0]["whatif"].size() == 10);
    CHECK(svc.recommendations(id, 0).status == 400);

    const auto w = svc.whatif(id, "s");
    REQUIRE(w.status == 200);
    CHECK(w.body["outcomes"][0]["value"] == "0");
    CHECK(w.body["outcomes"][0]["count"] == 6);
    CHECK(w.body["outcomes"][0]["entropy_exact"] == hexfloat(std::log2(6.0)));
    CHECK(w.body["outcomes"][1]["count"] == 4);
    CHECK(w.body["outcomes"][1]["entropy"] == 2.0);
    const auto wm = svc.whatif(id, "m");
    CHECK(wm.body["missing_count"] == 1);
    CHECK(svc.whatif(id, "zzz").status == 400);

    // Shared by all six: entropy unchanged apart from the split itself.
    s = observe(svc, s, "s", "1");
    CHECK(s["revision"] == 1);
    CHECK(s["candidate_count"] == 4);
    CHECK(s["entropy"] == 2.0);
    CHECK_FALSE(s.contains("survivors"));
    s = observe(svc, s, "m", "1");
    CHECK(s["candidate_count"] == 2);
    CHECK(s["survivors"].size() == 2);
    CHECK(s["survivors"][0]["object_id"] == "o6");
    CHECK(s["survivors"][0]["values"]["u"] == "6");
    CHECK(svc.whatif(id, "s").status == 400);

    // Stale revision conflicts; duplicate attribute is a client error.
    const auto stale = svc.post_observation(id, {{"attribute", "u"}, {"value", "6"}, {"expected_revision", 1}});
    CHECK(stale.status == 409);
    CHECK(stale.body["error"]["code"] == "revision_conflict");
    CHECK(stale.body["error"]["revision"] == 2);
    const auto dup = svc.post_observation(id, {{"attribute", "s"}, {"value", "1"}, {"expected_revision", 2}});
    CHECK(dup.status == 400);
    CHECK(dup.body["error"]["code"] == "usage_error");
    CHECK(svc.post_observation(id, {{"attribute", "u"}, {"value", "6"}}).status == 400);

    const auto got = svc.get_session(id).body;
    CHECK(got["path"].size() == 2);
    CHECK(got["entropy_history"].size() == 3);
    CHECK(got["path"][1]["candidate_count"] == 2);

    s = observe(svc, s, "u", "8");
    CHECK(s["status"] == "identified");
    CHECK(s["object_id"] == "o8");
    const auto done = svc.recommendations(id, std::nullopt);
    CHECK(done.status == 409);
    CHECK(done.body["error"]["code"] == "session_terminal");
}

TEST_CASE("observation held by no candidate makes the session inconsistent") {
    TempDir dir("svc_none");
    TraceService svc(config_in(dir));
    const auto ds = upload(svc, kTen);
    auto s = svc.create_session({{"dataset_id", ds}, {"known", "s=1"}}).body;
    s = observe(svc, s, "u", "0");
    CHECK(s["status"] == "inconsistent");
    CHECK(s["entropy"].is_null());
    CHECK(s["path"][0]["candidate_count"] == 0);
    CHECK(s["survivors"].empty());
}

TEST_CASE("unavailable attributes and automatic ambiguity") {
    TempDir dir("svc_unavailable");
    TraceService svc(config_in(dir));
    const auto ds = upload(svc, "object_id,a,b\np,0,?\nq,0,?\nr,1,0\n");
    auto s = svc.create_session({{"dataset_id", ds}}).body;
    const std::string id = s["session_id"];
    CHECK(svc.mark_unavailable(id, {{"attribute", "zz"}, {"expected_revision", 0}}).status == 400);
    s = observe(svc, s, "a", "0");
    // b is MISSING on both survivors: nothing left to rank.
    CHECK(s["status"] == "ambiguous");
    CHECK(s["survivors"].size() == 2);

    auto t = svc.create_session({{"dataset_id", ds}}).body;
    const auto r = svc.mark_unavailable(t["session_id"], {{"attribute", "a"}, {"expected_revision", 0}});
    REQUIRE(r.status == 200);
    CHECK(r.body["unavailable"][0] == "a");
    CHECK(r.body["revision"] == 1);
}

TEST_CASE("list, filter and delete sessions") {
    TempDir dir("svc_list");
    TraceService svc(config_in(dir));
    const auto d1 = upload(svc, kSmall);
    const auto d2 = upload(svc, kTen);
    const std::string s1 = svc.create_session({{"dataset_id", d1}}).body["session_id"];
    (void)svc.create_session({{"dataset_id", d2}});
    (void)svc.create_session({{"dataset_id", d2}});
    CHECK(svc.list_sessions(std::nullopt).body["sessions"].size() == 3);
    CHECK(svc.list_sessions(d2).body["sessions"].size() == 2);
    CHECK(svc.delete_session(s1).status == 200);
    CHECK(svc.get_session(s1).status == 404);
    CHECK(svc.delete_session(s1).status == 404);
    CHECK(svc.list_sessions(d1).body["sessions"].empty());
}

TEST_CASE("exactly one of two racing observations with the same revision succeeds") {
    TempDir dir("svc_race");
    TraceService svc(config_in(dir));
    const auto ds = upload(svc, kTen);
    for (int round = 0; round < 20; ++round) {
        const std::string id = svc.create_session({{"dataset_id", ds}}).body["session_id"];
        std::atomic<int> ok{0}, conflict{0};
        auto worker = [&](const char* attr, const char* value) {
            const auto r = svc.post_observation(id, {{"attribute", attr}, {"value", value}, {"expected_revision", 0}});
            (r.status == 200 ? ok : conflict) += 1;
        };
        std::thread a(worker, "s", "0");
        std::thread b(worker, "m", "0");
        a.join();
        b.join();
        CHECK(ok == 1);
        CHECK(conflict == 1);
        CHECK(svc.get_session(id).body["revision"] == 1);
    }
}

TEST_CASE("sessions replay identically after a restart") {
    TempDir dir("svc_replay");
    std::vector<json> before;
    std::string deleted;
    {
        TraceService svc(config_in(dir));
        const auto ds = upload(svc, kTen);
        std::mt19937_64 rng(3);
        for (int i = 0; i < 12; ++i) {
            auto s = svc.create_session({{"dataset_id", ds}}).body;
            const std::string id = s["session_id"];
            for (int step = 0; step < 4 && s["status"] == "active"; ++step) {
                const auto rec = svc.recommendations(id, std::nullopt).body;
                const auto& pick = rec["ranking"][rng() % rec["ranking"].size()];
                if (rng() % 4 == 0) {
                    s = svc.mark_unavailable(id, {{"attribute", pick["attribute"]}, {"expected_revision", s["revision"]}})
                            .body;
                } else {
                    const auto& outcomes = pick["whatif"];
                    s = observe(svc, s, pick["attribute"], outcomes[rng() % outcomes.size()]["value"]);
                }
            }
            before.push_back(svc.get_session(id).body);
        }
        deleted = before.back()["session_id"];
        CHECK(svc.delete_session(deleted).status == 200);
        before.pop_back();
    }
    TraceService restarted(config_in(dir));
    CHECK(restarted.list_datasets().body["datasets"].size() == 1);
    CHECK(restarted.list_sessions(std::nullopt).body["sessions"].size() == before.size());
    for (const auto& b : before) {
        const auto after = restarted.get_session(b["session_id"]);
        REQUIRE(after.status == 200);
        CHECK(replay_view(after.body) == replay_view(b));
        CHECK(after.body["updated_at"] == b["updated_at"]);
    }
    CHECK(restarted.get_session(deleted).status == 404);
}

TEST_CASE("a torn final log line is ignored on replay") {
    TempDir dir("svc_torn");
    json before;
    {
        TraceService svc(config_in(dir));
        const auto ds = upload(svc, kTen);
        auto s = svc.create_session({{"dataset_id", ds}}).body;
        before = observe(svc, s, "s", "0");
    }
    const auto log = dir.path / "sessions" / (before["session_id"].get<std::string>() + ".log");
    {
        std::ofstream out(log, std::ios::app);
        out << R"({"op":"observe","attri)";
    }
    TraceService restarted(config_in(dir));
    CHECK(replay_view(restarted.get_session(before["session_id"]).body) == replay_view(before));
}

TEST_CASE("listen address parsing and environment") {
    ServiceConfig c;
    c.set_listen("0.0.0.0:9000");
    CHECK(c.host == "0.0.0.0");
    CHECK(c.port == 9000);
    c.set_listen(":7000");
    CHECK(c.host == "0.0.0.0");
    CHECK(c.port == 7000);
    CHECK_THROWS(c.set_listen("nohost"));
    CHECK_THROWS(c.set_listen("h:99999"));
    setenv("IDTRACE_DISPLAY_THRESHOLD", "7", 1);
    setenv("IDTRACE_LISTEN", "127.0.0.1:1234", 1);
    c.apply_env();
    CHECK(c.display_threshold == 7);
    CHECK(c.port == 1234);
    unsetenv("IDTRACE_DISPLAY_THRESHOLD");
    unsetenv("IDTRACE_LISTEN");
}

TEST_CASE("HTTP round trip through httplib") {
    TempDir dir("svc_http");
    TraceService svc(config_in(dir));
    httplib::Server server;
    svc.mount(server);
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    httplib::Client client("127.0.0.1", port);
    auto res = client.Post("/api/v1/datasets?name=small", kSmall, "text/csv");
    REQUIRE(res);
    CHECK(res->status == 201);
    const std::string ds = json::parse(res->body)["dataset_id"];

    res = client.Post("/api/v1/sessions", json{{"dataset_id", ds}, {"known", {"x=0"}}}.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 201);
    const auto created = json::parse(res->body);
    CHECK(created["entropy"] == 1.0);
    const std::string id = created["session_id"];

    res = client.Get("/api/v1/sessions/" + id + "/recommendations?top=1");
    REQUIRE(res);
    CHECK(json::parse(res->body)["chosen"] == "y");

    res = client.Get("/api/v1/sessions/" + id + "/whatif?attribute=y");
    REQUIRE(res);
    CHECK(json::parse(res->body)["outcomes"].size() == 2);

    res = client.Post("/api/v1/sessions/" + id + "/observations",
                      json{{"attribute", "y"}, {"value", "1"}, {"expected_revision", 0}}.dump(), "application/json");
    REQUIRE(res);
    const auto observed = json::parse(res->body);
    CHECK(observed["status"] == "identified");
    CHECK(observed["object_id"] == "b");
    // Exact value matches the library bit for bit.
    CHECK(parse_hexfloat(observed["entropy_history_exact"][0].get<std::string>()) == 1.0);

    res = client.Post("/api/v1/sessions", "{not json", "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
    CHECK(json::parse(res->body)["error"]["code"] == "bad_json");

    res = client.Get("/api/v1/sessions?dataset_id=" + ds);
    REQUIRE(res);
    CHECK(json::parse(res->body)["sessions"].size() == 1);

    res = client.Delete("/api/v1/sessions/" + id);
    REQUIRE(res);
    CHECK(res->status == 200);
    res = client.Get("/api/v1/sessions/" + id);
    REQUIRE(res);
    CHECK(res->status == 404);
    CHECK(json::parse(res->body)["error"]["code"] == "not_found");

    server.stop();
    thread.join();
}
