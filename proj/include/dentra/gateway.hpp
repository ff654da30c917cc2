// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dentra/json.hpp"
#include "dentra/labels.hpp"

namespace dentra::gateway {

using Millis = std::chrono::milliseconds;

enum class Role { chat, embed, rerank, classify };

std::string_view to_string(Role role);
std::optional<Role> role_from_string(std::string_view s);
// Route served for each role, relative to the endpoint base URL.
std::string_view route_for(Role role);

struct EndpointConfig {
    Role role = Role::chat;
    std::string base_url;
    std::string model;
    std::string api_key_env;  // name of the environment variable holding the key
    Millis timeout{30000};
    int max_retries = 2;
    Millis backoff_initial{200};

    void validate() const;
    json to_json() const;
    static EndpointConfig from_json(const json& j, Role role);
};

struct ChatMessage {
    std::string role;  // system | user | assistant
    std::string content;
    std::vector<std::string> image_data_urls;
};

struct ToolSpec {
    std::string name;
    std::string description;
    json parameters;
};

struct ToolCallDirective {
    std::string id;
    std::string name;
    std::string raw_arguments;
    std::optional<json> arguments;  // empty when raw_arguments is not valid JSON
};

struct Completion {
    std::string text;
    std::vector<ToolCallDirective> tool_calls;
    int retries = 0;
};

// OpenAI-compatible chat request body.
json serialize_chat_request(const std::string& model, const std::vector<ChatMessage>& messages,
                            const std::vector<ToolSpec>& tools);
// Throws GatewayError(malformed) if the body is not a chat completion.
Completion parse_chat_response(const json& body);

// Probabilities indexed like kImagingModalities.
using ModalityDistribution = std::array<double, 6>;

// Checks key set and that values sum to 1 within 1e-6; throws GatewayError(malformed).
ModalityDistribution parse_distribution(const json& body);

class ChatModel {
public:
    virtual ~ChatModel() = default;
    virtual Completion chat(const std::vector<ChatMessage>& messages,
                            const std::vector<ToolSpec>& tools = {},
                            std::optional<Millis> timeout = std::nullopt) = 0;
};

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) = 0;
    virtual std::string model_id() const = 0;
};

class Reranker {
public:
    virtual ~Reranker() = default;
    virtual std::vector<double> rerank_score(const std::string& query,
                                             const std::vector<std::string>& docs) = 0;
};

class ImageClassifier {
public:
    virtual ~ImageClassifier() = default;
    virtual ModalityDistribution classify_image(std::span<const std::uint8_t> image) = 0;
};

// JSON-over-HTTP POST with bounded retries. Connection failures, 429 and 5xx
// are retried with exponential backoff; read timeouts are not.
class HttpTransport {
public:
    explicit HttpTransport(EndpointConfig config);

    struct Reply {
        json body;
        int retries = 0;
    };

    Reply post(const json& body, std::optional<Millis> timeout = std::nullopt) const;
    const EndpointConfig& config() const noexcept { return config_; }

private:
    EndpointConfig config_;
    std::string host_;
    std::string path_;
};

class HttpChatModel final : public ChatModel {
public:
    explicit HttpChatModel(EndpointConfig config) : transport_(std::move(config)) {}
    Completion chat(const std::vector<ChatMessage>& messages, const std::vector<ToolSpec>& tools = {},
                    std::optional<Millis> timeout = std::nullopt) override;

private:
    HttpTransport transport_;
};

class HttpEmbedder final : public Embedder {
public:
    explicit HttpEmbedder(EndpointConfig config) : transport_(std::move(config)) {}
    std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) override;
    std::string model_id() const override { return transport_.config().model; }

private:
    HttpTransport transport_;
};

class HttpReranker final : public Reranker {
public:
    explicit HttpReranker(EndpointConfig config) : transport_(std::move(config)) {}
    std::vector<double> rerank_score(const std::string& query,
                                     const std::vector<std::string>& docs) override;

private:
    HttpTransport transport_;
};

class HttpImageClassifier final : public ImageClassifier {
public:
    explicit HttpImageClassifier(EndpointConfig config) : transport_(std::move(config)) {}
    ModalityDistribution classify_image(std::span<const std::uint8_t> image) override;

private:
    HttpTransport transport_;
};

// Media type from magic bytes, or nullopt if the bytes are not a known image format.
std::optional<std::string> sniff_image_type(std::span<const std::uint8_t> bytes);
std::string to_data_url(std::span<const std::uint8_t> bytes);

}  // namespace dentra::gateway
