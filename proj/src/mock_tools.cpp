// SPDX-License-Identifier: Apache-2.0
#include "dentra/mock_tools.hpp"

#include <httplib.h>

#include "http_server.hpp"

#include "dentra/error.hpp"

namespace dentra::mock {

json fixture_payload(tools::Task task, const std::string& tool_name) {
    using tools::Task;
    switch (task) {
        case Task::classification:
            return {{"predictions",
                     {{{"label", "caries"}, {"probability", 0.82}},
                      {{"label", "calculus"}, {"probability", 0.11}}}}};
        case Task::detection:
            return {{"detections",
                     {{{"label", "caries"}, {"score", 0.91}, {"box", {120.0, 64.0, 180.0, 110.0}}}}}};
        case Task::segmentation:
            return {{"instances",
                     {{{"label", "bone_loss"},
                       {"score", 0.77},
                       {"polygon", {10.0, 10.0, 40.0, 12.0, 38.0, 30.0}}}}}};
        case Task::keypoint_detection:
            return {{"landmarks",
                     {{{"name", "sella"}, {"x", 412.0}, {"y", 233.0}},
                      {{"name", "nasion"}, {"x", 655.0}, {"y", 210.0}}}}};
        case Task::report_generation:
            return {{"report", "Fixture report from " + tool_name + ": no acute findings."}};
        case Task::visual_qa:
            return {{"answer", "Fixture answer from " + tool_name + "."}};
        case Task::visual_description:
            return {{"caption", "Fixture caption from " + tool_name + "."}};
        case Task::retrieval:
            return {{"items", json::array()}};
    }
    return json::object();
}

MockToolServer::MockToolServer() = default;

MockToolServer::~MockToolServer() { stop(); }

void MockToolServer::add_tool(const std::string& name, tools::Task task, ToolBehavior behavior) {
    std::lock_guard lock(mu_);
    tools_[name] = {task, std::move(behavior)};
}

void MockToolServer::set_behavior(const std::string& name, ToolBehavior behavior) {
    std::lock_guard lock(mu_);
    auto it = tools_.find(name);
    if (it == tools_.end()) throw NotFoundError("mock tool " + name);
    it->second.behavior = std::move(behavior);
}

int MockToolServer::start(int port, const std::string& host) {
    server_ = detail::make_http_server();
    server_->new_task_queue = [] { return new httplib::ThreadPool(32); };
    server_->Post(R"(/tools/([A-Za-z0-9_\-]+))", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string name = req.matches[1];
        Entry entry;
        {
            std::lock_guard lock(mu_);
            received_.push_back(json::parse(req.body, nullptr, false));
            auto it = tools_.find(name);
            if (it == tools_.end()) {
                res.status = 404;
                res.set_content(json{{"status", "error"}, {"error", "no such tool"}}.dump(), "application/json");
                return;
            }
            entry = it->second;
        }
        const auto& b = entry.behavior;
        if (b.delay.count() > 0) {
            std::unique_lock lock(mu_);
            stop_cv_.wait_for(lock, b.delay, [this] { return stopping_; });
        }
        json payload = b.payload.is_null() ? fixture_payload(entry.task, name) : b.payload;
        json body;
        switch (b.mode) {
            case ToolBehavior::Mode::http_error:
                res.status = b.http_status;
                res.set_content(R"({"error":"injected failure"})", "application/json");
                return;
            case ToolBehavior::Mode::tool_error:
                body = {{"status", "error"}, {"error", "injected tool error"}};
                break;
            case ToolBehavior::Mode::invalid_payload:
                body = {{"status", "ok"}, {"payload", {{"unexpected", true}}}, {"artifacts", b.artifacts}};
                break;
            case ToolBehavior::Mode::ok:
            case ToolBehavior::Mode::sleep:
                body = {{"status", "ok"}, {"payload", payload}, {"artifacts", b.artifacts}};
                break;
        }
        res.set_content(body.dump(), "application/json");
    });
    port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (port_ <= 0) throw Error("mock tools: cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port_;
}

void MockToolServer::stop() {
    {
        std::lock_guard lock(mu_);
        stopping_ = true;
    }
    stop_cv_.notify_all();
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
    server_.reset();
}

std::string MockToolServer::base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

std::vector<json> MockToolServer::received() const {
    std::lock_guard lock(mu_);
    return received_;
}

}  // namespace dentra::mock
