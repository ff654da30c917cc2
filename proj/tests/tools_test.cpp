// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <chrono>
#include <fstream>

#include "dentra/error.hpp"
#include "dentra/mock_tools.hpp"
#include "dentra/tools.hpp"
#include "support.hpp"

using namespace dentra;
using namespace dentra::tools;
using namespace std::chrono_literals;

namespace {

std::filesystem::path catalog_path() { return testkit::data_dir() / "catalog" / "dental_tools.jsonl"; }

ToolDescriptor simple_tool(const std::string& name, std::string endpoint, Millis timeout = 2000ms) {
    ToolDescriptor d;
    d.name = name;
    d.modalities = {Modality::intraoral_image};
    d.task = Task::classification;
    d.description = "test tool";
    d.arg_schema = {{"type", "object"},
                    {"properties", {{"image_id", {{"type", "string"}, {"minLength", 1}}},
                                    {"threshold", {{"type", "number"}, {"minimum", 0}, {"maximum", 1}}}}},
                    {"required", {"image_id"}}};
    d.output_schema = {{"type", "object"},
                       {"required", {"predictions"}},
                       {"properties", {{"predictions", {{"type", "array"}}}}}};
    d.endpoint = std::move(endpoint);
    d.timeout = timeout;
    return d;
}

std::shared_ptr<const Clock> fixed_clock() { return std::make_shared<FixedClock>(testkit::fixed_time()); }

}  // namespace

TEST(Catalog, ShippedTableHas22Tools) {
    ToolRegistry reg;
    EXPECT_EQ(reg.load_catalog(catalog_path(), {"http://127.0.0.1:9"}), 22u);
    EXPECT_EQ(reg.size(), 22u);
    auto pano = reg.list_tools({{Modality::panoramic_radiograph}, std::nullopt});
    ASSERT_EQ(pano.size(), 6u);
    std::set<std::string> nos;
    for (const auto& t : pano) nos.insert(t.catalog_no);
    EXPECT_EQ(nos, (std::set<std::string>{"T17", "T18", "T19", "T20", "T21", "T22"}));
    for (const auto& t : reg.list_tools()) EXPECT_EQ(t.endpoint.rfind("http://127.0.0.1:9/tools/", 0), 0u);
}

TEST(Catalog, PerModalityCounts) {
    ToolRegistry reg;
    reg.load_catalog(catalog_path());
    auto count = [&](Modality m) { return reg.list_tools({{m}, std::nullopt}).size(); };
    // frozen from the catalog transcription
    EXPECT_EQ(count(Modality::intraoral_image), 6u);
    EXPECT_EQ(count(Modality::periapical_radiograph), 2u);
    EXPECT_EQ(count(Modality::cephalometric_radiograph), 1u);
    EXPECT_EQ(count(Modality::histopathology), 3u);
    EXPECT_EQ(count(Modality::cytopathology), 2u);
    // modality-agnostic entries never match a modality filter
    std::size_t agnostic = 0;
    for (const auto& t : reg.list_tools()) agnostic += t.modalities.empty();
    EXPECT_EQ(agnostic, 2u);
}

TEST(Catalog, FilterByTaskAndNameOrder) {
    ToolRegistry reg;
    reg.load_catalog(catalog_path());
    auto all = reg.list_tools();
    for (std::size_t i = 1; i < all.size(); ++i) EXPECT_LT(all[i - 1].name, all[i].name);
    for (const auto& t : reg.list_tools({{}, Task::segmentation})) EXPECT_EQ(t.task, Task::segmentation);
}

TEST(Catalog, BadLineRejectsWholeFileWithLineNumber) {
    testkit::TempDir dir;
    std::ifstream in(catalog_path());
    std::ofstream out(dir.path() / "c.jsonl");
    std::string line;
    std::getline(in, line);
    out << line << "\n\n" << "{\"name\": \"broken\"}\n";
    out.close();
    ToolRegistry reg;
    try {
        reg.load_catalog(dir.path() / "c.jsonl");
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
    EXPECT_EQ(reg.size(), 0u);
}

TEST(Catalog, DuplicateNameConflicts) {
    ToolRegistry reg;
    reg.load_catalog(catalog_path());
    EXPECT_THROW(reg.load_catalog(catalog_path()), ConflictError);
    EXPECT_EQ(reg.load_catalog(catalog_path(), {"", true}), 22u);
    EXPECT_EQ(reg.size(), 22u);
}

TEST(Descriptor, JsonRoundTripAndValidation) {
    ToolRegistry reg;
    reg.load_catalog(catalog_path());
    for (const auto& t : reg.list_tools()) EXPECT_EQ(ToolDescriptor::from_json(t.to_json()).to_json(), t.to_json());

    auto bad = simple_tool("x", "local:x");
    bad.arg_schema["properties"]["image_id"]["$ref"] = "#/defs/id";
    try {
        bad.validate();
        FAIL();
    } catch (const SchemaError& e) {
        EXPECT_EQ(e.path(), "/arg_schema/properties/image_id/$ref");
    }
    auto empty = simple_tool("", "local:x");
    EXPECT_THROW(empty.validate(), ValidationError);
}

TEST(FormatCall, CoercesAndValidates) {
    ToolRegistry reg(fixed_clock());
    reg.register_tool(simple_tool("t", "local:t"));
    auto c = reg.format_call("t", {{"image_id", "img-1"}, {"threshold", "0.25"}}, "c1");
    EXPECT_EQ(c.args["threshold"], 0.25);
    EXPECT_EQ(c.timestamp, testkit::fixed_time());
    EXPECT_EQ(ToolCall::from_json(c.to_json()), c);

    EXPECT_THROW(reg.format_call("missing", json::object()), NotFoundError);
    try {
        reg.format_call("t", {{"image_id", "img-1"}, {"threshold", 3}});
        FAIL();
    } catch (const SchemaError& e) {
        EXPECT_EQ(e.path(), "/threshold");
    }
    try {
        reg.format_call("t", json::object());
        FAIL();
    } catch (const SchemaError& e) {
        EXPECT_EQ(e.path(), "/image_id");
    }
}

TEST(Execute, LocalHandlerAndOutputValidation) {
    ToolRegistry reg(fixed_clock());
    reg.register_tool(simple_tool("good", "local:good"));
    reg.register_tool(simple_tool("bad", "local:bad"));
    reg.register_tool(simple_tool("unbound", "local:nobody"));
    reg.bind_local("good", [](const ToolCall&) { return json{{"status", "ok"}, {"payload", {{"predictions", json::array()}}}}; });
    reg.bind_local("bad", [](const ToolCall&) { return json{{"status", "ok"}, {"payload", {{"other", 1}}}}; });
    auto calls = std::vector<ToolCall>{reg.format_call("good", {{"image_id", "a"}}, "1"),
                                       reg.format_call("bad", {{"image_id", "a"}}, "2"),
                                       reg.format_call("unbound", {{"image_id", "a"}}, "3")};
    auto r = reg.execute_parallel(calls);
    ASSERT_EQ(r.size(), 3u);
    EXPECT_EQ(r[0].status, ToolStatus::ok);
    EXPECT_EQ(r[1].status, ToolStatus::schema_violation);
    EXPECT_EQ(r[1].raw_payload, (json{{"other", 1}}));
    EXPECT_TRUE(r[1].payload.is_null());
    EXPECT_EQ(r[2].status, ToolStatus::tool_error);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(r[i].call_id, calls[i].call_id);
        EXPECT_EQ(r[i].latency, 0ms);
        EXPECT_EQ(ToolResult::from_json(r[i].to_json()), r[i]);
    }
}

TEST(Execute, BatchIsolationOverHttp) {
    mock::MockToolServer server;
    server.add_tool("healthy", Task::classification);
    server.add_tool("broken", Task::classification, mock::ToolBehavior::with(mock::ToolBehavior::Mode::http_error));
    mock::ToolBehavior slow;
    slow.mode = mock::ToolBehavior::Mode::sleep;
    slow.delay = 5000ms;
    server.add_tool("stuck", Task::classification, slow);
    server.start();

    ToolRegistry reg;
    for (const char* n : {"healthy", "broken", "stuck"})
        reg.register_tool(simple_tool(n, server.endpoint_for(n), 1000ms));
    std::vector<ToolCall> calls;
    for (const char* n : {"broken", "healthy", "stuck"}) calls.push_back(reg.format_call(n, {{"image_id", "a"}}));

    const auto t0 = std::chrono::steady_clock::now();
    auto r = reg.execute_parallel(calls);
    const auto wall = std::chrono::steady_clock::now() - t0;
    EXPECT_EQ(r[0].status, ToolStatus::tool_error);
    EXPECT_EQ(r[1].status, ToolStatus::ok);
    EXPECT_EQ(r[2].status, ToolStatus::timeout);
    EXPECT_LE(wall, 2000ms);
    server.stop();
}

TEST(Execute, ToolErrorAndArtifacts) {
    mock::MockToolServer server;
    server.add_tool("err", Task::classification, mock::ToolBehavior::with(mock::ToolBehavior::Mode::tool_error));
    mock::ToolBehavior with_art;
    with_art.artifacts = {json{{"data_base64", "aGVsbG8="}, {"media_type", "text/plain"}}};
    server.add_tool("art", Task::classification, with_art);
    server.start();
    ToolRegistry reg;
    reg.register_tool(simple_tool("err", server.endpoint_for("err")));
    reg.register_tool(simple_tool("art", server.endpoint_for("art")));
    ArtifactStore store;
    auto r = reg.execute_parallel({reg.format_call("err", {{"image_id", "a"}}), reg.format_call("art", {{"image_id", "a"}})},
                                  &store);
    EXPECT_EQ(r[0].status, ToolStatus::tool_error);
    EXPECT_EQ(r[0].error, "injected tool error");
    ASSERT_EQ(r[1].status, ToolStatus::ok);
    ASSERT_EQ(r[1].artifacts.size(), 1u);
    // sha256("hello")
    EXPECT_EQ(r[1].artifacts[0], "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824");
    auto a = store.get(r[1].artifacts[0]);
    ASSERT_TRUE(a);
    EXPECT_EQ(a->media_type, "text/plain");
    // the tool received the call envelope
    EXPECT_EQ(server.received().size(), 2u);
}

TEST(Execute, CatalogSnapshotSurvivesConcurrentRemoval) {
    ToolRegistry reg;
    reg.register_tool(simple_tool("t", "local:t"));
    std::atomic<bool> entered{false};
    std::atomic<bool> release{false};
    reg.bind_local("t", [&](const ToolCall&) {
        entered = true;
        while (!release) std::this_thread::sleep_for(1ms);
        return json{{"status", "ok"}, {"payload", {{"predictions", json::array()}}}};
    });
    auto call = reg.format_call("t", {{"image_id", "a"}});
    std::vector<ToolResult> out;
    std::thread runner([&] { out = reg.execute_parallel({call}); });
    while (!entered) std::this_thread::sleep_for(1ms);
    EXPECT_TRUE(reg.remove_tool("t"));
    release = true;
    runner.join();
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].status, ToolStatus::ok);
    EXPECT_FALSE(reg.find("t"));
}

TEST(Execute, ResultsKeepInputOrderProperty) {
    std::mt19937_64 rng(7);
    ToolRegistry reg;
    for (int i = 0; i < 5; ++i) {
        const std::string n = "t" + std::to_string(i);
        reg.register_tool(simple_tool(n, "local:" + n));
        reg.bind_local(n, [i](const ToolCall& c) {
            std::this_thread::sleep_for(std::chrono::milliseconds((5 - i) * 2));
            return json{{"status", "ok"}, {"payload", {{"predictions", {c.call_id}}}}};
        });
    }
    for (int round = 0; round < 20; ++round) {
        std::vector<ToolCall> calls;
        const int n = 1 + static_cast<int>(rng() % 8);
        for (int k = 0; k < n; ++k)
            calls.push_back(reg.format_call("t" + std::to_string(rng() % 5), {{"image_id", "a"}}));
        auto r = reg.execute_parallel(calls);
        ASSERT_EQ(r.size(), calls.size());
        for (int k = 0; k < n; ++k) {
            EXPECT_EQ(r[k].call_id, calls[k].call_id);
            EXPECT_EQ(r[k].payload["predictions"][0], calls[k].call_id);
        }
    }
}
