// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "dentra/gateway.hpp"
#include "dentra/json.hpp"

namespace httplib {
class Server;
}

namespace dentra::mock {

// Feature-hashing embedder: each lowercase word (each CJK character) adds a
// signed unit to a hashed bucket. Deterministic for a given dimension and seed.
class HashEmbedder final : public gateway::Embedder {
public:
    explicit HashEmbedder(std::size_t dimension, std::uint64_t seed = 0x5eed);
    std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) override;
    std::vector<float> embed_one(const std::string& text) const;
    std::string model_id() const override;

private:
    std::size_t dimension_;
    std::uint64_t seed_;
};

// Scores (query, doc) by shared-word overlap normalised by sqrt(|q|·|d|).
class LexicalReranker final : public gateway::Reranker {
public:
    std::vector<double> rerank_score(const std::string& query,
                                     const std::vector<std::string>& docs) override;
};

struct MockEntry {
    gateway::Role role = gateway::Role::chat;
    std::optional<std::string> model;
    std::optional<int> ordinal;  // 1-based count of requests on (role, model)
    std::optional<std::string> body_hash;
    std::vector<std::string> contains;  // every substring must occur in the normalised body
    int status = 200;
    json body;
    std::chrono::milliseconds delay{0};

    json to_json() const;
    static MockEntry from_json(const json& j);
};

// Built-in responders used when no entry matches.
struct MockGenerators {
    std::optional<std::size_t> embed_dimension;  // hash embedder
    bool lexical_rerank = false;
};

// Resolution order for a request: body_hash entries, then ordinal entries,
// then free entries (model/contains only) in script order, then generators.
// Anything left is answered with HTTP 418 echoing the request fingerprint.
struct MockScript {
    std::vector<MockEntry> entries;
    MockGenerators generators;

    // Throws ValidationError when two entries share a role+model+ordinal or a body hash.
    void validate() const;
    json to_json() const;
    static MockScript from_json(const json& j);
};

// Canned response bodies in the wire shapes the gateway clients expect.
json chat_text_body(const std::string& text);
json chat_tool_calls_body(const std::vector<std::pair<std::string, json>>& calls,
                          const std::string& text = {});
json embedding_body(const std::vector<std::vector<float>>& vectors);
json rerank_body(const std::vector<double>& scores);
json distribution_body(const std::map<std::string, double>& probabilities);

// role + ":" + 16-hex FNV-1a of the normalised (re-serialised) body.
std::string fingerprint(gateway::Role role, const json& body);

struct RecordedRequest {
    gateway::Role role;
    std::string fingerprint;
    json body;
    int status;
};

class MockGatewayServer {
public:
    explicit MockGatewayServer(MockScript script);
    ~MockGatewayServer();
    MockGatewayServer(const MockGatewayServer&) = delete;
    MockGatewayServer& operator=(const MockGatewayServer&) = delete;

    // Binds 127.0.0.1 (port 0 picks a free one) and serves in a background thread.
    // Throws Error if the port is in use.
    int start(int port = 0, const std::string& host = "127.0.0.1");
    void stop();

    int port() const noexcept { return port_; }
    std::string base_url() const;
    gateway::EndpointConfig endpoint(gateway::Role role, const std::string& model = "mock",
                                     std::chrono::milliseconds timeout = std::chrono::seconds(5)) const;

    std::vector<RecordedRequest> requests() const;

private:
    struct Outcome {
        int status;
        json body;
        std::chrono::milliseconds delay;
    };
    Outcome resolve(gateway::Role role, const json& body);
    void sleep_interruptible(std::chrono::milliseconds d);

    MockScript script_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;

    mutable std::mutex mu_;
    std::condition_variable stop_cv_;
    bool stopping_ = false;
    std::map<std::string, int> counters_;
    std::vector<RecordedRequest> log_;
};

}  // namespace dentra::mock
