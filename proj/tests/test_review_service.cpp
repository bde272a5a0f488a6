#include "doctest.h"

#include <fstream>
#include <thread>
#include <unistd.h>

#include "tamperlab/pipeline.hpp"
#include "tamperlab/review_service.hpp"

#include "httplib.h"

using namespace tamperlab;
using nlohmann::json;

namespace {

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / ("tamperlab_review_" + std::to_string(::getpid())))
    {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

// Ten unreviewed removals p00..p09, one addition q00 and one sample that
// fails the magnitude gate (tiny).
fs::path make_records(const fs::path& dir)
{
    Image orig(200, 200, 1, 0.5);
    Image gen = orig;
    gen.channel(0).block(50, 50, 60, 60).setConstant(0.8);
    Image tiny = orig;
    tiny.channel(0).block(0, 0, 3, 3).setConstant(0.8);
    save_image(orig, dir / "orig.png");
    save_image(gen, dir / "gen.png");
    save_image(tiny, dir / "tiny.png");

    std::ofstream m(dir / "manifest.tsv");
    m << "#id\toriginal\ttampered\tmanipulation\tlabels\tvlm_fidelity\n";
    for (int i = 0; i < 10; ++i)
        m << "p0" << i << "\torig.png\tgen.png\tobject_removal\tcar\t9\n";
    m << "q00\torig.png\tgen.png\tobject_addition\tcup\t10\n";
    m << "tiny\torig.png\ttiny.png\tobject_removal\tcar\t9\n";
    m.close();

    PipelineConfig cfg;
    cfg.rectify = false;
    const auto s = run_label(load_manifest(dir / "manifest.tsv"), cfg, dir / "out", false);
    REQUIRE(s.errors.empty());
    return s.records_path;
}

struct Running {
    ReviewStore store;
    ReviewServer server;
    int port = -1;
    std::thread thread;

    explicit Running(const fs::path& records) : store(records), server(store)
    {
        port = server.bind("127.0.0.1", 0);
        REQUIRE(port > 0);
        thread = std::thread([this] { server.listen(); });
    }
    ~Running()
    {
        server.stop();
        thread.join();
    }
    httplib::Client client() const
    {
        httplib::Client c("127.0.0.1", port);
        c.set_connection_timeout(5);
        c.set_read_timeout(10);
        return c;
    }
};

httplib::Result post_score(httplib::Client& c, const std::string& id, const json& body)
{
    return c.Post("/api/sample/" + id + "/score", body.dump(), "application/json");
}

} // namespace

TEST_CASE("overlay blending")
{
    Image t(2, 2, 1, 0.4);
    BinaryLabel none = BinaryLabel::Constant(2, 2, false);
    const Image plain = render_overlay(t, none);
    REQUIRE(plain.channels() == 3);
    for (int c = 0; c < 3; ++c)
        CHECK((plain.channel(c) == 0.4).all());

    BinaryLabel some = none;
    some(1, 0) = true;
    const Image lit = render_overlay(t, some);
    CHECK(lit(1, 0, 0) == doctest::Approx(0.7));
    CHECK(lit(1, 0, 1) == doctest::Approx(0.2));
    CHECK(lit(1, 0, 2) == doctest::Approx(0.2));
    CHECK(lit(0, 0, 0) == 0.4);

    const Image resized = render_overlay(Image(4, 4, 3, 0.5), none);
    CHECK(resized.height() == 2);
}

TEST_CASE("store queue, scoring and stats")
{
    TempDir tmp;
    const auto records = make_records(tmp.path);
    ReviewStore store(records);

    const auto q = store.queue(100);
    REQUIRE(q.size() == 11);
    CHECK(q.front().id == "p00");
    CHECK(q.back().id == "q00");
    CHECK(store.queue(3).size() == 3);
    CHECK(store.find("tiny")->status == RecordStatus::rejected);

    auto st = store.stats();
    CHECK(st.total == 12);
    CHECK(st.pending == 11);
    CHECK(st.scored == 0);
    CHECK_FALSE(st.pass_rate_by_type.at("object_removal").has_value());
    CHECK(st.to_json()["pass_rate_by_type"]["object_addition"].is_null());

    for (int i = 0; i < 10; ++i)
        store.submit({"p0" + std::to_string(i), i == 0 ? 3 : 4, "r", ""});
    CHECK(store.find("p00")->status == RecordStatus::rejected);
    CHECK(store.find("p01")->status == RecordStatus::retained);
    st = store.stats();
    CHECK(st.scored == 10);
    CHECK(st.retained == 9);
    CHECK(*st.pass_rate_by_type.at("object_removal") == doctest::Approx(0.9));
    CHECK(store.queue(100).size() == 1);

    const auto code_of = [&](const ScoreSubmission& s) {
        try {
            store.submit(s);
        } catch (const Error& e) {
            return e.code();
        }
        return Errc::config_error;
    };
    CHECK(code_of({"nope", 4, "", ""}) == Errc::not_found);
    CHECK(code_of({"q00", 0, "", ""}) == Errc::invalid_argument);
    CHECK(code_of({"q00", 6, "", ""}) == Errc::invalid_argument);

    // a resubmission overwrites
    store.submit({"p00", 5, "r2", ""});
    CHECK(store.find("p00")->status == RecordStatus::retained);
    CHECK(store.find("p00")->reviewer == "r2");
}

TEST_CASE("scores survive a restart and a torn log line")
{
    TempDir tmp;
    const auto records = make_records(tmp.path);
    fs::path log;
    {
        ReviewStore store(records);
        store.submit({"p03", 5, "alice", "2026-01-01T00:00:00Z"});
        log = store.log_path();
        CHECK(fs::exists(log));
        // records.jsonl is only rewritten on compaction
        CHECK_FALSE(read_records(records)[3].human_realism.has_value());
    }
    {
        std::ofstream out(log, std::ios::app);
        out << "{\"id\": \"p04\", \"sco";
    }
    ReviewStore again(records);
    CHECK(again.find("p03")->human_realism == 5);
    CHECK(again.find("p03")->status == RecordStatus::retained);
    CHECK_FALSE(again.find("p04")->human_realism.has_value());
    CHECK_FALSE(fs::exists(log));
    CHECK(read_records(records)[3].human_realism == 5);
    for (const auto& r : again.queue(100))
        CHECK(r.id != "p03");
}

TEST_CASE("HTTP API")
{
    TempDir tmp;
    const auto records = make_records(tmp.path);
    Running run(records);
    auto c = run.client();

    auto health = c.Get("/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(json::parse(health->body)["status"] == "ok");
    CHECK(health->get_header_value("Access-Control-Allow-Origin") == "*");

    auto opts = c.Options("/api/queue");
    REQUIRE(opts);
    CHECK(opts->status == 204);

    auto queue = c.Get("/api/queue?limit=2");
    REQUIRE(queue);
    CHECK(queue->status == 200);
    const auto items = json::parse(queue->body);
    REQUIRE(items.size() == 2);
    CHECK(items[0]["id"] == "p00");
    CHECK(items[1]["id"] == "p01");
    CHECK(items[0]["manipulation"] == "object_removal");
    CHECK(items[0]["description"] == "The car was removed from the image.");
    CHECK(items[0]["current_score"].is_null());
    CHECK(items[0]["overlay_url"] == "/api/sample/p00/image/overlay");
    CHECK(json::parse(c.Get("/api/queue")->body).size() == 11);
    CHECK(c.Get("/api/queue?limit=abc")->status == 400);

    SUBCASE("scoring")
    {
        auto ok = post_score(c, "p00", {{"score", 4}, {"reviewer", "bob"}});
        REQUIRE(ok);
        CHECK(ok->status == 200);
        const auto body = json::parse(ok->body);
        CHECK(body["status"] == "retained");
        CHECK(body["retained"] == true);
        CHECK(body["human_realism"] == 4);

        auto low = post_score(c, "p01", {{"score", 3}});
        CHECK(json::parse(low->body)["status"] == "rejected");

        CHECK(post_score(c, "p02", {{"score", 6}})->status == 422);
        CHECK(post_score(c, "p02", {{"score", 3.5}})->status == 422);
        CHECK(post_score(c, "p02", {{"score", "4"}})->status == 422);
        CHECK(post_score(c, "p02", {{"score", 4}, {"id", "p03"}})->status == 422);
        CHECK(c.Post("/api/sample/p02/score", "not json", "application/json")->status == 400);
        CHECK(post_score(c, "nope", {{"score", 4}})->status == 404);

        const auto rest = json::parse(c.Get("/api/queue")->body);
        CHECK(rest.size() == 9);
        for (const auto& item : rest)
            CHECK((item["id"] != "p00" && item["id"] != "p01"));

        const auto stats = json::parse(c.Get("/api/stats")->body);
        CHECK(stats["scored"] == 2);
        CHECK(stats["retained"] == 1);
        CHECK(stats["pass_rate_by_type"]["object_removal"].get<double>() == 0.5);
        CHECK(stats["pass_rate_by_type"]["object_addition"].is_null());
    }

    SUBCASE("images")
    {
        auto orig = c.Get("/api/sample/p00/image/original");
        REQUIRE(orig);
        CHECK(orig->status == 200);
        CHECK(orig->get_header_value("Content-Type") == "image/png");
        const auto file = read_file(tmp.path / "orig.png");
        CHECK(orig->body == std::string(file.begin(), file.end()));

        auto overlay = c.Get("/api/sample/p00/image/overlay");
        REQUIRE(overlay);
        const Image o = decode_image(Bytes(overlay->body.begin(), overlay->body.end()));
        REQUIRE(o.channels() == 3);
        // inside the edit: half tampered gray, half red
        CHECK(o(60, 60, 0) == doctest::Approx(0.9).epsilon(0.01));
        CHECK(o(60, 60, 1) == doctest::Approx(0.4).epsilon(0.01));
        // outside: the tampered pixel unchanged
        CHECK(o(10, 10, 0) == doctest::Approx(128.0 / 255));
        CHECK(o(10, 10, 2) == doctest::Approx(128.0 / 255));

        CHECK(c.Get("/api/sample/p00/image/thumbnail")->status == 404);
        CHECK(c.Get("/api/sample/nope/image/original")->status == 404);
    }

    SUBCASE("concurrent submissions")
    {
        std::vector<std::thread> threads;
        std::atomic<int> ok{0};
        for (int i = 0; i < 10; ++i)
            threads.emplace_back([&, i] {
                auto cl = run.client();
                auto r = post_score(cl, "p0" + std::to_string(i), {{"score", 5}});
                if (r && r->status == 200)
                    ++ok;
            });
        for (auto& t : threads)
            t.join();
        CHECK(ok == 10);
        CHECK(json::parse(c.Get("/api/queue")->body).size() == 1);
        CHECK(json::parse(c.Get("/api/stats")->body)["retained"] == 10);
    }
}

TEST_CASE("custom CORS origin")
{
    TempDir tmp;
    const auto records = make_records(tmp.path);
    ReviewStore store(records);
    ReviewServer server(store, "http://localhost:5173");
    const int port = server.bind("127.0.0.1", 0);
    REQUIRE(port > 0);
    std::thread th([&] { server.listen(); });
    httplib::Client c("127.0.0.1", port);
    auto r = c.Get("/health");
    server.stop();
    th.join();
    REQUIRE(r);
    CHECK(r->get_header_value("Access-Control-Allow-Origin") == "http://localhost:5173");
}
