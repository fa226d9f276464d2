// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>

#include "helpers.hpp"
#include "maskpaint/core/image.hpp"
#include "maskpaint/review/queue.hpp"
#include "maskpaint/review/service.hpp"

using namespace maskpaint;
using namespace maskpaint::review;
using testing::error_of;
using testing::TempDir;
namespace fs = std::filesystem;

namespace {

std::vector<ReviewItem> make_items(const fs::path& qdir, int n) {
    std::vector<ReviewItem> items;
    for (int i = 0; i < n; ++i) {
        ReviewItem it;
        it.id = "gen-" + std::to_string(100 + i);
        it.source_sample_id = "src-" + std::to_string(i);
        it.source_image_ref = "img/" + it.source_sample_id + ".png";
        it.generated_image_ref = "img/" + it.id + ".png";
        it.class_label = i % 2 ? "vbar" : "hbar";
        it.prompt = "a photo of " + it.class_label + " with target";
        write_png(qdir / it.source_image_ref, Image(4, 4, 3, 10));
        write_png(qdir / it.generated_image_ref, Image(4, 4, 3, 200));
        items.push_back(it);
    }
    return items;
}

fs::path seeded_queue(const fs::path& root, const std::string& id, int n) {
    const auto dir = queue_dir(root, id);
    enqueue_items(dir, id, make_items(dir, n));
    return dir;
}

struct RunningServer {
    ReviewHttpServer server;
    int port = 0;
    std::thread thread;

    RunningServer(ReviewService& svc, ServerOptions opts = {}) : server(svc, std::move(opts)) {
        port = server.bind("127.0.0.1", 0);
        thread = std::thread([this] { server.serve(); });
        for (int i = 0; i < 200 && !server.running(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    ~RunningServer() {
        server.stop();
        thread.join();
    }
    httplib::Client client() const { return httplib::Client("127.0.0.1", port); }
};

json body_of(const httplib::Result& r) { return json::parse(r->body); }

}  // namespace

TEST_CASE("enqueueing is idempotent") {
    TempDir dir;
    const auto qdir = queue_dir(dir.path(), "q1");
    const auto items = make_items(qdir, 4);
    CHECK(enqueue_items(qdir, "q1", items) == 4);
    CHECK(enqueue_items(qdir, "q1", items) == 0);
    const auto q = load_queue(qdir);
    CHECK(q.id == "q1");
    CHECK(q.items.size() == 4);
    CHECK(q.counts().pending == 4);
    CHECK_FALSE(q.finalized());
    CHECK(error_of([&] { load_queue(dir / "nope"); }) == Errc::unknown_queue);
}

TEST_CASE("event replay and torn lines") {
    TempDir dir;
    const auto qdir = seeded_queue(dir.path(), "q", 3);
    append_event(qdir, QueueEvent{QueueEvent::Kind::decision, "gen-100", ItemStatus::approved, "ok", "t1"});
    append_event(qdir, QueueEvent{QueueEvent::Kind::note, "gen-101", ItemStatus::pending, "look again", "t2"});
    append_event(qdir, QueueEvent{QueueEvent::Kind::decision, "gen-100", ItemStatus::rejected, "", "t3"});
    auto q = load_queue(qdir);
    CHECK(q.find("gen-100")->status == ItemStatus::approved);
    CHECK(q.find("gen-100")->decided_at == "t1");
    CHECK(q.find("gen-101")->note == "look again");
    CHECK_FALSE(apply_event(q, QueueEvent{QueueEvent::Kind::decision, "gen-100", ItemStatus::rejected, "", "t4"}));
    CHECK(apply_event(q, QueueEvent{QueueEvent::Kind::decision, "gen-102", ItemStatus::rejected, "", "t4"}));

    {
        std::ofstream out(qdir / std::string(kEventsFile), std::ios::app);
        out << R"({"kind":"decision","item_id":"gen-1)";
    }
    const auto torn = load_queue(qdir);
    CHECK(torn.counts().approved == 1);
    CHECK(torn.counts().pending == 2);
    CHECK(QueueEvent::from_json(QueueEvent{QueueEvent::Kind::note, "x", ItemStatus::pending, "n", "t"}.to_json())
              .note == "n");
}

TEST_CASE("service paging, decisions and export") {
    TempDir dir;
    seeded_queue(dir.path(), "qa", 7);
    seeded_queue(dir.path(), "qb", 1);
    ReviewService svc(dir.path());
    const auto qs = svc.queues();
    REQUIRE(qs.size() == 2);
    CHECK(qs[0].first == "qa");

    const auto p0 = svc.list_items("qa", std::nullopt, 0, 3);
    CHECK(p0.items.size() == 3);
    CHECK(p0.total == 7);
    CHECK(svc.list_items("qa", std::nullopt, 2, 3).items.size() == 1);
    CHECK(svc.list_items("qa", std::nullopt, 5, 3).items.empty());
    CHECK(error_of([&] { svc.list_items("qa", std::nullopt, 0, 0); }) == Errc::invalid_request);
    CHECK(error_of([&] { svc.list_items("zz", std::nullopt, 0); }) == Errc::unknown_queue);

    CHECK(svc.decide("gen-101", ItemStatus::approved, "fine", "qa").status == ItemStatus::approved);
    CHECK(error_of([&] { svc.decide("gen-101", ItemStatus::rejected, "", "qa"); }) == Errc::already_decided);
    CHECK(error_of([&] { svc.decide("gen-102", ItemStatus::pending, "", "qa"); }) == Errc::invalid_request);
    // gen-100 lives in both queues.
    CHECK(error_of([&] { svc.decide("gen-100", ItemStatus::approved, ""); }) == Errc::invalid_request);
    CHECK(error_of([&] { svc.item("gen-999"); }) == Errc::unknown_item);
    CHECK(svc.set_note("gen-103", "blurry", "qa").note == "blurry");
    CHECK(svc.list_items("qa", ItemStatus::approved, 0).total == 1);
    CHECK(svc.image_path("gen-103", "generated", "qa").filename() == "gen-103.png");
    CHECK(error_of([&] { svc.image_path("gen-103", "mask", "qa"); }) == Errc::invalid_request);

    auto exp = svc.export_approved("qa");
    CHECK_FALSE(exp.final);
    REQUIRE(exp.records.size() == 1);
    CHECK(exp.records[0].provenance->source_id == "src-1");
    CHECK(exp.records[0].split == datasets::Split::train);

    ReviewService reopened(dir.path());
    CHECK(reopened.item("gen-101", "qa").status == ItemStatus::approved);
    CHECK(reopened.item("gen-103", "qa").note == "blurry");
}

TEST_CASE("http round trip") {
    TempDir dir("http");
    seeded_queue(dir.path(), "q", 10);
    ReviewService svc(dir.path());
    {
        RunningServer srv(svc, ServerOptions{"s3cret", true});
        auto cli = srv.client();
        auto r = cli.Get("/queues");
        REQUIRE(r);
        CHECK(r->status == 401);
        CHECK(body_of(r).at("error") == "Unauthorized");

        httplib::Headers auth{{"Authorization", "Bearer s3cret"}};
        r = cli.Get("/queues", auth);
        REQUIRE(r);
        CHECK(r->status == 200);
        CHECK(r->get_header_value("Access-Control-Allow-Origin") == "*");
        CHECK(body_of(r)[0].at("counts").at("pending") == 10);

        r = cli.Get("/queues/q/items?page=1&page_size=4", auth);
        CHECK(body_of(r).at("items").size() == 4);
        CHECK(body_of(r).at("total") == 10);
        r = cli.Get("/queues/q/items?page=x", auth);
        CHECK(r->status == 400);
        CHECK(cli.Get("/queues/none/items", auth)->status == 404);
        CHECK(cli.Get("/items/none", auth)->status == 404);

        r = cli.Get("/items/gen-100/image/generated", auth);
        CHECK(r->status == 200);
        CHECK(r->get_header_value("Content-Type") == "image/png");
        CHECK(r->body.substr(1, 3) == "PNG");

        for (int i = 0; i < 10; ++i) {
            const std::string id = "gen-" + std::to_string(100 + i);
            const json body = {{"decision", i < 5 ? "approved" : "rejected"}, {"note", "n" + std::to_string(i)}};
            r = cli.Post("/items/" + id + "/decision", auth, body.dump(), "application/json");
            REQUIRE(r);
            CHECK(r->status == 200);
        }
        r = cli.Post("/items/gen-100/decision", auth, R"({"decision":"rejected"})", "application/json");
        CHECK(r->status == 409);
        CHECK(body_of(r).at("error") == "AlreadyDecided");
        CHECK(cli.Post("/items/gen-100/decision", auth, "{not json", "application/json")->status == 400);
        CHECK(cli.Post("/items/gen-100/decision", auth, R"({"decision":"maybe"})", "application/json")->status ==
              400);
        CHECK(cli.Post("/items/gen-100/note", auth, R"({"note":"checked"})", "application/json")->status == 200);

        r = cli.Get("/queues/q/export", auth);
        CHECK(body_of(r).at("final") == true);
        CHECK(body_of(r).at("records").size() == 5);
    }

    ReviewService restarted(dir.path());
    RunningServer srv(restarted);
    auto cli = srv.client();
    const auto r = cli.Get("/queues/q/items?status=approved");
    REQUIRE(r);
    CHECK(body_of(r).at("total") == 5);
    CHECK(body_of(cli.Get("/items/gen-100")).at("note") == "checked");
    CHECK(body_of(cli.Get("/items/gen-107")).at("status") == "rejected");
}

TEST_CASE("concurrent decisions keep the counts") {
    TempDir dir("conc");
    seeded_queue(dir.path(), "q", 20);
    ReviewService svc(dir.path());
    RunningServer srv(svc);
    std::atomic<int> ok{0}, conflict{0};
    std::vector<std::thread> workers;
    for (int w = 0; w < 4; ++w)
        workers.emplace_back([&, w] {
            auto cli = srv.client();
            // Every worker tries every item; each item is decided exactly once.
            for (int i = 0; i < 20; ++i) {
                const std::string id = "gen-" + std::to_string(100 + (i + w * 5) % 20);
                const json body = {{"decision", (i + w) % 2 ? "approved" : "rejected"}};
                const auto r = cli.Post("/items/" + id + "/decision", body.dump(), "application/json");
                if (r && r->status == 200) ++ok;
                else if (r && r->status == 409) ++conflict;
            }
        });
    for (auto& t : workers) t.join();
    CHECK(ok == 20);
    CHECK(conflict == 60);
    const auto counts = load_queue(queue_dir(dir.path(), "q")).counts();
    CHECK(counts.total() == 20);
    CHECK(counts.pending == 0);
    CHECK(counts.approved + counts.rejected == 20);
}
