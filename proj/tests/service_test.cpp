// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <httplib.h>

#include "dentra/crypto.hpp"
#include "dentra/error.hpp"
#include "dentra/service.hpp"
#include "support.hpp"

using namespace dentra;
using namespace std::chrono_literals;

namespace {

struct Server {
    std::shared_ptr<const Clock> clock = std::make_shared<FixedClock>(testkit::fixed_time());
    std::shared_ptr<testkit::DeterministicChat> chat = std::make_shared<testkit::DeterministicChat>();
    Comprehension comprehension{chat, std::make_shared<testkit::ConstantClassifier>(Modality::intraoral_image)};
    tools::ToolRegistry registry{clock};
    std::shared_ptr<mock::HashEmbedder> embedder = std::make_shared<mock::HashEmbedder>(16);
    rag::KnowledgeBase kb{embedder, nullptr};
    MemoryStore memory;
    ArtifactStore artifacts;
    std::unique_ptr<Agent> agent;
    std::unique_ptr<ApiService> service;
    std::unique_ptr<httplib::Client> client;

    explicit Server(ServiceOptions options = {}) {
        tools::ToolDescriptor d;
        d.name = "caries_detector";
        d.modalities = {Modality::intraoral_image};
        d.task = tools::Task::detection;
        d.description = "caries";
        d.arg_schema = {{"type", "object"}, {"required", {"image_id"}}};
        d.output_schema = {{"type", "object"}};
        d.endpoint = "local:caries";
        registry.register_tool(d);
        registry.bind_local("caries", [](const tools::ToolCall& c) {
            return json{{"status", "ok"},
                        {"payload", {{"detections", {{{"label", "caries"}, {"image", c.args["image_id"]}}}}}},
                        {"artifacts", {{{"data_base64", "bWFzaw=="}, {"media_type", "image/png"}}}}};
        });
        kb.set_main_index(std::make_shared<rag::VectorIndex>(
            testkit::make_index("main", {"Fluoride varnish prevents caries.", "Sealants protect fissures."}, *embedder)));
        agent = std::make_unique<Agent>(Agent::Deps{chat, &registry, &kb, &memory, &artifacts, clock});
        options.session_defaults.t_max = std::chrono::duration<double>(10.0);
        options.stream_idle_poll = 50ms;
        service = std::make_unique<ApiService>(
            ApiService::Deps{&comprehension, agent.get(), &registry, &kb, &artifacts, clock}, options);
        const int port = service->start();
        client = std::make_unique<httplib::Client>("127.0.0.1", port);
        client->set_read_timeout(10, 0);
    }

    std::string create() {
        auto res = client->Post("/sessions", "{}", "application/json");
        EXPECT_TRUE(res);
        EXPECT_EQ(res->status, 201);
        return json::parse(res->body)["session_id"].get<std::string>();
    }

    httplib::Result post_text(const std::string& id, const std::string& text, const std::vector<std::string>& images = {}) {
        json body = {{"text", text}, {"images", images}};
        return client->Post("/sessions/" + id + "/messages", body.dump(), "application/json");
    }

    std::string stream(const std::string& id, std::uint64_t from = 0) {
        std::string body;
        httplib::Client c(service->base_url());
        c.set_read_timeout(10, 0);
        auto res = c.Get("/sessions/" + id + "/events?from_seq=" + std::to_string(from), httplib::Headers{},
                         [&](const char* data, std::size_t n) {
                             body.append(data, n);
                             return true;
                         });
        EXPECT_TRUE(res);
        return body;
    }
};

std::string png_b64(int variant = 0) { return crypto::base64_encode(testkit::tiny_png(variant)); }

json strip_frames(const std::string& body) {
    json out = json::array();
    for (const auto& e : parse_sse_frames(body)) out.push_back(testkit::strip_volatile(e.to_json()));
    return out;
}

}  // namespace

TEST(Service, HealthAndSessionLifecycle) {
    Server s;
    auto h = s.client->Get("/healthz");
    ASSERT_TRUE(h);
    EXPECT_EQ(h->status, 200);

    auto created = s.client->Post("/sessions", R"({"max_iterations": 3})", "application/json");
    ASSERT_EQ(created->status, 201);
    const json handle = json::parse(created->body);
    EXPECT_EQ(handle["status"], "idle");
    EXPECT_EQ(handle["config"]["max_iterations"], 3);

    auto bad = s.client->Post("/sessions", R"({"bogus": 1})", "application/json");
    EXPECT_EQ(bad->status, 400);
    EXPECT_EQ(s.client->Get("/sessions/nope")->status, 404);

    const std::string id = handle["session_id"];
    auto got = s.client->Get("/sessions/" + id);
    EXPECT_EQ(json::parse(got->body)["last_seq"], 0);
}

TEST(Service, MessageRunStreamsToTerminalEvent) {
    Server s;
    const std::string id = s.create();
    auto posted = s.post_text(id, "Is there caries on this photo?", {png_b64()});
    ASSERT_EQ(posted->status, 202) << posted->body;
    const json p = json::parse(posted->body);
    EXPECT_EQ(p["run_id"], "run-1");
    EXPECT_EQ(p["images"][0]["image_id"], "img-1");

    auto events = parse_sse_frames(s.stream(id));
    std::vector<std::string> kinds;
    for (const auto& e : events) kinds.push_back(std::string(to_string(e.kind)));
    const std::vector<std::string> expected = {"instruction", "thought", "tool_call", "tool_result", "thought",
                                               "response"};
    EXPECT_EQ(kinds, expected);
    EXPECT_EQ(events[0].payload["images"][0]["modality"]["label"], "intraoral_image");
    const json resp = events.back().payload;
    ASSERT_EQ(resp["artifacts"].size(), 1u);

    // tool output artifacts are downloadable
    auto art = s.client->Get("/artifacts/" + resp["artifacts"][0].get<std::string>());
    ASSERT_EQ(art->status, 200);
    EXPECT_EQ(art->body, "mask");
    EXPECT_EQ(art->get_header_value("Content-Type"), "image/png");
    EXPECT_EQ(s.client->Get("/artifacts/" + std::string(64, '0'))->status, 404);

    // resume from a cursor only returns the tail
    auto tail = parse_sse_frames(s.stream(id, 4));
    ASSERT_EQ(tail.size(), 2u);
    EXPECT_EQ(tail[0].seq, 5u);
}

TEST(Service, RejectsBadUploadsAndConcurrentRuns) {
    ServiceOptions opts;
    opts.max_image_bytes = 64;
    Server s(opts);
    const std::string id = s.create();
    EXPECT_EQ(s.post_text(id, "   ")->status, 400);
    EXPECT_EQ(s.post_text(id, "look", {crypto::base64_encode(std::vector<std::uint8_t>(100, 0x89))})->status, 413);
    EXPECT_EQ(s.post_text(id, "look", {crypto::base64_encode(std::vector<std::uint8_t>{1, 2, 3})})->status, 400);
    EXPECT_EQ(s.post_text(id, "look", {"%%%"})->status, 400);
    EXPECT_EQ(s.post_text("missing", "look")->status, 404);

    // the in-process call path reports conflicts while a run is live
    s.service->post_message(id, "slow first", {});
    EXPECT_THROW(s.service->post_message(id, "second", {}), ConflictError);
    EXPECT_TRUE(s.service->wait_idle(id, 5s));
    EXPECT_NO_THROW(s.service->post_message(id, "third", {}));
    EXPECT_TRUE(s.service->wait_idle(id, 5s));
}

TEST(Service, MultipartUploadWorks) {
    Server s;
    const std::string id = s.create();
    const auto png = testkit::tiny_png(3);
    httplib::MultipartFormDataItems items = {
        {"text", "Check this image", "", ""},
        {"images", std::string(png.begin(), png.end()), "a.png", "image/png"},
    };
    auto res = s.client->Post("/sessions/" + id + "/messages", items);
    ASSERT_EQ(res->status, 202) << res->body;
    EXPECT_EQ(json::parse(res->body)["images"].size(), 1u);
    EXPECT_TRUE(s.service->wait_idle(id, 5s));
}

TEST(Service, AwaitingUserStatusAndNextTurn) {
    Server s;
    const std::string id = s.create();
    s.post_text(id, "please ask me something");
    ASSERT_TRUE(s.service->wait_idle(id, 5s));
    EXPECT_EQ(s.service->session(id).status, SessionStatus::awaiting_user);
    EXPECT_EQ(s.service->events(id)->after(0).back().kind, EventKind::user_prompt);
    s.post_text(id, "left side");
    ASSERT_TRUE(s.service->wait_idle(id, 5s));
    EXPECT_EQ(s.service->session(id).status, SessionStatus::idle);
    EXPECT_EQ(s.memory.snapshot(id).user_turns.size(), 2u);
}

TEST(Service, ToolsAndKnowledgeEndpoints) {
    Server s;
    auto all = json::parse(s.client->Get("/tools")->body);
    EXPECT_EQ(all["tools"].size(), 1u);
    auto pano = json::parse(s.client->Get("/tools?modality=panoramic_radiograph")->body);
    EXPECT_TRUE(pano["tools"].empty());
    EXPECT_EQ(s.client->Get("/tools?modality=xray")->status, 400);
    EXPECT_EQ(s.client->Get("/tools?task=detection")->status, 200);

    auto k = s.client->Get("/knowledge/search?q=fluoride%20varnish&k=1");
    ASSERT_EQ(k->status, 200);
    const json items = json::parse(k->body)["items"];
    ASSERT_EQ(items.size(), 1u);
    EXPECT_FALSE(items[0]["book_title"].get<std::string>().empty());
    EXPECT_GE(items[0]["page"].get<int>(), 1);
    EXPECT_EQ(s.client->Get("/knowledge/search?q=")->status, 400);
    EXPECT_EQ(s.client->Get("/knowledge/search?q=x&k=0")->status, 400);
}

TEST(Service, BearerTokenGuardsEverythingButHealth) {
    ServiceOptions opts;
    opts.auth_token = "s3cret";
    Server s(opts);
    EXPECT_EQ(s.client->Get("/healthz")->status, 200);
    EXPECT_EQ(s.client->Get("/tools")->status, 401);
    s.client->set_bearer_token_auth("s3cret");
    EXPECT_EQ(s.client->Get("/tools")->status, 200);
}

TEST(Service, NonLoopbackBindNeedsToken) {
    Server s;
    ServiceOptions opts;
    opts.host = "0.0.0.0";
    ApiService open({&s.comprehension, s.agent.get(), &s.registry, &s.kb, &s.artifacts, s.clock}, opts);
    EXPECT_THROW(open.start(), Error);
}

TEST(Service, ReplayEqualsLiveStreamOn20Sessions) {
    Server s;
    for (int i = 0; i < 20; ++i) {
        const std::string id = s.create();
        std::vector<std::string> images;
        for (int k = 0; k < i % 3; ++k) images.push_back(png_b64(i * 10 + k));
        const std::string text = i % 5 == 4 ? "best pizza nearby?" : "session " + std::to_string(i) + " question";
        auto posted = s.post_text(id, text, images);
        ASSERT_EQ(posted->status, 202);
        const std::string live = s.stream(id);
        ASSERT_TRUE(s.service->wait_idle(id, 5s));
        const std::string replay = s.stream(id);
        EXPECT_FALSE(parse_sse_frames(live).empty());
        EXPECT_EQ(strip_frames(live), strip_frames(replay)) << "session " << i;
        // with a fixed clock the bytes match exactly
        EXPECT_EQ(live, replay) << "session " << i;
    }
}

TEST(Sse, FrameParsing) {
    EventLog log;
    log.append(EventKind::instruction, {{"query", "q"}}, testkit::fixed_time());
    log.append(EventKind::response, {{"text", "a\nb"}}, testkit::fixed_time());
    std::string body;
    for (const auto& e : log.after(0)) body += "id: " + std::to_string(e.seq) + "\ndata: " + e.to_json().dump() + "\n\n";
    auto parsed = parse_sse_frames(body);
    ASSERT_EQ(parsed.size(), 2u);
    EXPECT_EQ(parsed[1].payload["text"], "a\nb");
    EXPECT_EQ(parsed[1].seq, 2u);
}
