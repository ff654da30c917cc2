// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "dentra/json.hpp"
#include "dentra/tools.hpp"

namespace httplib {
class Server;
}

namespace dentra::mock {

struct ToolBehavior {
    enum class Mode { ok, http_error, sleep, tool_error, invalid_payload };
    Mode mode = Mode::ok;
    json payload;  // null = fixture payload for the tool's task
    int http_status = 500;
    std::chrono::milliseconds delay{0};
    std::vector<json> artifacts;

    static ToolBehavior with(Mode m, json payload = nullptr) {
        ToolBehavior b;
        b.mode = m;
        b.payload = std::move(payload);
        return b;
    }
};

// Deterministic payload matching the shipped output schema for `task`.
json fixture_payload(tools::Task task, const std::string& tool_name);

// Serves POST /tools/<name> with the endpoint wire shape
// {status, payload, artifacts}. Unknown tools get 404.
class MockToolServer {
public:
    MockToolServer();
    ~MockToolServer();
    MockToolServer(const MockToolServer&) = delete;
    MockToolServer& operator=(const MockToolServer&) = delete;

    void add_tool(const std::string& name, tools::Task task, ToolBehavior behavior = {});
    void set_behavior(const std::string& name, ToolBehavior behavior);

    int start(int port = 0, const std::string& host = "127.0.0.1");
    void stop();
    std::string base_url() const;
    std::string endpoint_for(const std::string& name) const { return base_url() + "/tools/" + name; }

    std::vector<json> received() const;

private:
    struct Entry {
        tools::Task task;
        ToolBehavior behavior;
    };

    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;
    mutable std::mutex mu_;
    std::condition_variable stop_cv_;
    bool stopping_ = false;
    std::map<std::string, Entry> tools_;
    std::vector<json> received_;
};

}  // namespace dentra::mock
