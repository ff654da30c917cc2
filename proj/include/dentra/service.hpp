// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dentra/agent.hpp"
#include "dentra/artifacts.hpp"
#include "dentra/comprehension.hpp"
#include "dentra/error.hpp"
#include "dentra/json.hpp"
#include "dentra/memory.hpp"
#include "dentra/rag.hpp"
#include "dentra/tools.hpp"

namespace httplib {
class Server;
}

namespace dentra {

enum class SessionStatus { idle, running, awaiting_user, closed };
std::string_view to_string(SessionStatus status);

struct SessionHandle {
    std::string session_id;
    TimePoint created_at{};
    SessionConfig config;
    SessionStatus status = SessionStatus::idle;

    json to_json() const;
};

struct Upload {
    std::vector<std::uint8_t> bytes;
    std::string filename;
};

struct PostedMessage {
    std::string run_id;
    std::vector<InstructionImage> images;  // modality filled in once the run classifies them
};

class PayloadTooLargeError : public Error {
public:
    using Error::Error;
};

struct ServiceOptions {
    std::string host = "127.0.0.1";
    std::optional<std::string> auth_token;
    std::size_t max_image_bytes = 10 * 1024 * 1024;
    SessionConfig session_defaults;
    std::chrono::milliseconds stream_idle_poll{200};
};

// Session lifecycle, message posting and event streaming over HTTP. The
// in-process methods are what the routes call.
class ApiService {
public:
    struct Deps {
        Comprehension* comprehension = nullptr;
        Agent* agent = nullptr;
        tools::ToolRegistry* registry = nullptr;
        rag::KnowledgeBase* kb = nullptr;  // optional
        ArtifactStore* artifacts = nullptr;
        std::shared_ptr<const Clock> clock = system_clock();
    };

    ApiService(Deps deps, ServiceOptions options);
    ~ApiService();
    ApiService(const ApiService&) = delete;
    ApiService& operator=(const ApiService&) = delete;

    // Throws Error when binding fails or when a non-loopback host has no token.
    int start(int port = 0);
    void stop();
    std::string base_url() const;

    SessionHandle create_session(const json& overrides);
    // Throws NotFoundError, ConflictError (a run is in progress),
    // PayloadTooLargeError and ValidationError (empty text, undecodable image).
    PostedMessage post_message(const std::string& session_id, const std::string& text, std::vector<Upload> images);
    SessionHandle session(const std::string& session_id) const;
    std::shared_ptr<EventLog> events(const std::string& session_id) const;
    // Blocks until the session has no run in progress.
    bool wait_idle(const std::string& session_id, std::chrono::milliseconds timeout) const;

private:
    struct Session {
        SessionHandle handle;
        std::shared_ptr<EventLog> log = std::make_shared<EventLog>();
        std::thread worker;
        int image_counter = 0;
        int run_counter = 0;
    };

    void execute_run(const std::string& session_id, std::string text, std::vector<InstructionImage> images,
                     std::vector<std::vector<std::uint8_t>> bytes);
    std::shared_ptr<Session> find(const std::string& session_id) const;
    bool running(const std::string& session_id) const;
    void install_routes();

    Deps deps_;
    ServiceOptions options_;
    std::unique_ptr<httplib::Server> server_;
    std::thread server_thread_;
    int port_ = 0;
    std::atomic<bool> stopping_{false};
    mutable std::mutex mu_;
    mutable std::condition_variable idle_cv_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
};

// Parses one SSE frame block ("id: ..\ndata: ..\n\n") sequence into events.
std::vector<AgentEvent> parse_sse_frames(const std::string& body);

}  // namespace dentra
