// SPDX-License-Identifier: Apache-2.0
#include "dentra/gateway.hpp"

#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <thread>

#include "dentra/crypto.hpp"
#include "dentra/error.hpp"

namespace dentra::gateway {

std::string_view to_string(Role role) {
    switch (role) {
        case Role::chat: return "chat";
        case Role::embed: return "embed";
        case Role::rerank: return "rerank";
        case Role::classify: return "classify";
    }
    return "chat";
}

std::optional<Role> role_from_string(std::string_view s) {
    for (Role r : {Role::chat, Role::embed, Role::rerank, Role::classify}) {
        if (to_string(r) == s) return r;
    }
    return std::nullopt;
}

std::string_view route_for(Role role) {
    switch (role) {
        case Role::chat: return "/v1/chat/completions";
        case Role::embed: return "/v1/embeddings";
        case Role::rerank: return "/v1/rerank";
        case Role::classify: return "/v1/classify";
    }
    return "/";
}

void EndpointConfig::validate() const {
    std::vector<std::string> bad;
    if (base_url.rfind("http://", 0) != 0 && base_url.rfind("https://", 0) != 0)
        bad.push_back("base_url: must start with http:// or https://");
    if (timeout.count() <= 0) bad.push_back("timeout: must be > 0");
    if (max_retries < 0) bad.push_back("max_retries: must be >= 0");
    if (backoff_initial.count() < 0) bad.push_back("backoff_initial: must be >= 0");
    if (!bad.empty()) throw ValidationError(std::move(bad));
}

json EndpointConfig::to_json() const {
    return {{"role", to_string(role)},       {"base_url", base_url},
            {"model", model},                {"api_key_env", api_key_env},
            {"timeout_ms", timeout.count()}, {"max_retries", max_retries},
            {"backoff_ms", backoff_initial.count()}};
}

EndpointConfig EndpointConfig::from_json(const json& j, Role role) {
    EndpointConfig c;
    c.role = role;
    c.base_url = j.value("base_url", std::string{});
    c.model = j.value("model", std::string{});
    c.api_key_env = j.value("api_key_env", std::string{});
    c.timeout = Millis(j.value("timeout_ms", 30000));
    c.max_retries = j.value("max_retries", 2);
    c.backoff_initial = Millis(j.value("backoff_ms", 200));
    c.validate();
    return c;
}

json serialize_chat_request(const std::string& model, const std::vector<ChatMessage>& messages,
                            const std::vector<ToolSpec>& tools) {
    json msgs = json::array();
    for (const auto& m : messages) {
        if (m.image_data_urls.empty()) {
            msgs.push_back({{"role", m.role}, {"content", m.content}});
            continue;
        }
        json parts = json::array();
        parts.push_back({{"type", "text"}, {"text", m.content}});
        for (const auto& url : m.image_data_urls)
            parts.push_back({{"type", "image_url"}, {"image_url", {{"url", url}}}});
        msgs.push_back({{"role", m.role}, {"content", std::move(parts)}});
    }
    json body = {{"model", model}, {"messages", std::move(msgs)}};
    if (!tools.empty()) {
        json specs = json::array();
        for (const auto& t : tools) {
            specs.push_back({{"type", "function"},
                             {"function",
                              {{"name", t.name},
                               {"description", t.description},
                               {"parameters", t.parameters}}}});
        }
        body["tools"] = std::move(specs);
    }
    return body;
}

Completion parse_chat_response(const json& body) {
    auto malformed = [](const std::string& why) {
        return GatewayError(GatewayError::Kind::malformed, "malformed chat completion: " + why);
    };
    if (!body.is_object() || !body.contains("choices") || !body["choices"].is_array() ||
        body["choices"].empty())
        throw malformed("missing choices");
    const json& choice = body["choices"][0];
    if (!choice.is_object() || !choice.contains("message") || !choice["message"].is_object())
        throw malformed("missing message");
    const json& message = choice["message"];

    Completion out;
    if (message.contains("content") && message["content"].is_string())
        out.text = message["content"].get<std::string>();
    else if (message.contains("content") && !message["content"].is_null())
        throw malformed("content must be a string");

    if (message.contains("tool_calls") && !message["tool_calls"].is_null()) {
        if (!message["tool_calls"].is_array()) throw malformed("tool_calls must be an array");
        for (const auto& tc : message["tool_calls"]) {
            if (!tc.is_object() || !tc.contains("function") || !tc["function"].is_object() ||
                !tc["function"].contains("name") || !tc["function"]["name"].is_string())
                throw malformed("tool call without function name");
            ToolCallDirective d;
            d.id = tc.value("id", std::string{});
            d.name = tc["function"]["name"].get<std::string>();
            const json& args = tc["function"].value("arguments", json("{}"));
            if (args.is_string()) {
                d.raw_arguments = args.get<std::string>();
                d.arguments = json::parse(d.raw_arguments, nullptr, false);
                if (d.arguments->is_discarded()) d.arguments.reset();
            } else {
                d.raw_arguments = args.dump();
                d.arguments = args;
            }
            out.tool_calls.push_back(std::move(d));
        }
    }
    return out;
}

ModalityDistribution parse_distribution(const json& body) {
    auto malformed = [](const std::string& why) {
        return GatewayError(GatewayError::Kind::malformed, "malformed distribution: " + why);
    };
    if (!body.is_object() || !body.contains("distribution") || !body["distribution"].is_object())
        throw malformed("missing distribution object");
    ModalityDistribution dist{};
    double sum = 0;
    for (auto it = body["distribution"].begin(); it != body["distribution"].end(); ++it) {
        auto m = modality_from_string(it.key());
        if (!m || *m == Modality::unknown) throw malformed("unknown label " + it.key());
        if (!it.value().is_number()) throw malformed("non-numeric probability");
        const double p = it.value().get<double>();
        if (!(p >= 0.0 && p <= 1.0)) throw malformed("probability outside [0,1]");
        dist[static_cast<std::size_t>(*m)] = p;
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw malformed("probabilities sum to " + std::to_string(sum));
    return dist;
}

namespace {

void split_url(const std::string& url, std::string& host, std::string& path) {
    const auto scheme = url.find("://");
    const auto slash = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (slash == std::string::npos) {
        host = url;
        path.clear();
    } else {
        host = url.substr(0, slash);
        path = url.substr(slash);
        while (!path.empty() && path.back() == '/') path.pop_back();
    }
}

template <class Rep, class Period>
void set_timeouts(httplib::Client& client, std::chrono::duration<Rep, Period> timeout) {
    const auto us = std::chrono::duration_cast<std::chrono::microseconds>(timeout).count();
    const auto sec = static_cast<time_t>(us / 1000000);
    const auto usec = static_cast<time_t>(us % 1000000);
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);
}

}  // namespace

HttpTransport::HttpTransport(EndpointConfig config) : config_(std::move(config)) {
    config_.validate();
    split_url(config_.base_url, host_, path_);
    path_ += std::string(route_for(config_.role));
}

HttpTransport::Reply HttpTransport::post(const json& body, std::optional<Millis> timeout) const {
    const Millis limit = timeout ? std::min(*timeout, config_.timeout) : config_.timeout;
    const std::string payload = body.dump();
    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
        if (const char* key = std::getenv(config_.api_key_env.c_str()))
            headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    int retries = 0;
    Millis backoff = config_.backoff_initial;
    for (;;) {
        httplib::Client client(host_);
        set_timeouts(client, limit.count() > 0 ? limit : Millis(1));
        const auto started = std::chrono::steady_clock::now();
        auto res = client.Post(path_, headers, payload, "application/json");

        bool transient = false;
        std::string failure;
        if (!res) {
            const auto elapsed = std::chrono::steady_clock::now() - started;
            if (res.error() == httplib::Error::Read && elapsed >= limit * 9 / 10)
                throw GatewayError(GatewayError::Kind::timeout,
                                   std::string(to_string(config_.role)) + " endpoint timed out");
            transient = true;
            failure = "unreachable: " + httplib::to_string(res.error());
        } else if (res->status == 429 || res->status >= 500) {
            transient = true;
            failure = "HTTP " + std::to_string(res->status);
        } else if (res->status < 200 || res->status >= 300) {
            throw GatewayError(GatewayError::Kind::http_status,
                               std::string(to_string(config_.role)) + " endpoint returned HTTP " +
                                   std::to_string(res->status) + ": " + res->body,
                               res->status);
        } else {
            json parsed = json::parse(res->body, nullptr, false);
            if (parsed.is_discarded())
                throw GatewayError(GatewayError::Kind::malformed, "response body is not JSON");
            return {std::move(parsed), retries};
        }

        if (!transient || retries >= config_.max_retries) {
            const int status = res ? res->status : 0;
            throw GatewayError(status ? GatewayError::Kind::http_status
                                      : GatewayError::Kind::unreachable,
                               std::string(to_string(config_.role)) + " endpoint failed after " +
                                   std::to_string(retries) + " retries: " + failure,
                               status);
        }
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
        ++retries;
    }
}

Completion HttpChatModel::chat(const std::vector<ChatMessage>& messages,
                               const std::vector<ToolSpec>& tools, std::optional<Millis> timeout) {
    auto reply = transport_.post(serialize_chat_request(transport_.config().model, messages, tools),
                                 timeout);
    Completion c = parse_chat_response(reply.body);
    c.retries = reply.retries;
    return c;
}

std::vector<std::vector<float>> HttpEmbedder::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) throw ValidationError("texts", "embedding batch must be non-empty");
    auto reply = transport_.post({{"model", transport_.config().model}, {"input", texts}});
    const json& body = reply.body;
    if (!body.contains("data") || !body["data"].is_array() || body["data"].size() != texts.size())
        throw GatewayError(GatewayError::Kind::malformed, "embedding response size mismatch");

    std::vector<std::vector<float>> out(texts.size());
    std::vector<bool> seen(texts.size(), false);
    for (std::size_t i = 0; i < body["data"].size(); ++i) {
        const json& row = body["data"][i];
        const std::size_t index = row.value("index", i);
        if (index >= texts.size() || seen[index] || !row.contains("embedding") ||
            !row["embedding"].is_array())
            throw GatewayError(GatewayError::Kind::malformed, "bad embedding row");
        seen[index] = true;
        out[index] = row["embedding"].get<std::vector<float>>();
    }
    for (const auto& v : out) {
        if (v.empty() || v.size() != out.front().size())
            throw GatewayError(GatewayError::Kind::dimension_mismatch,
                               "embedding dimensions differ within a batch");
    }
    return out;
}

std::vector<double> HttpReranker::rerank_score(const std::string& query,
                                               const std::vector<std::string>& docs) {
    if (docs.empty()) return {};
    auto reply = transport_.post(
        {{"model", transport_.config().model}, {"query", query}, {"documents", docs}});
    const json& body = reply.body;
    if (!body.contains("results") || !body["results"].is_array() ||
        body["results"].size() != docs.size())
        throw GatewayError(GatewayError::Kind::malformed, "rerank response size mismatch");
    std::vector<double> scores(docs.size());
    std::vector<bool> seen(docs.size(), false);
    for (const auto& r : body["results"]) {
        const std::size_t index = r.value("index", docs.size());
        if (index >= docs.size() || seen[index] || !r.contains("relevance_score") ||
            !r["relevance_score"].is_number())
            throw GatewayError(GatewayError::Kind::malformed, "bad rerank row");
        seen[index] = true;
        scores[index] = r["relevance_score"].get<double>();
    }
    return scores;
}

ModalityDistribution HttpImageClassifier::classify_image(std::span<const std::uint8_t> image) {
    auto reply = transport_.post({{"model", transport_.config().model}, {"image", to_data_url(image)}});
    return parse_distribution(reply.body);
}

std::optional<std::string> sniff_image_type(std::span<const std::uint8_t> b) {
    auto starts = [&](std::initializer_list<std::uint8_t> sig, std::size_t offset = 0) {
        if (b.size() < offset + sig.size()) return false;
        std::size_t i = offset;
        for (auto s : sig)
            if (b[i++] != s) return false;
        return true;
    };
    if (starts({0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A})) return "image/png";
    if (starts({0xFF, 0xD8, 0xFF})) return "image/jpeg";
    if (starts({'G', 'I', 'F', '8'})) return "image/gif";
    if (starts({'B', 'M'}) && b.size() > 14) return "image/bmp";
    if (starts({'I', 'I', 0x2A, 0x00}) || starts({'M', 'M', 0x00, 0x2A})) return "image/tiff";
    if (starts({'R', 'I', 'F', 'F'}) && starts({'W', 'E', 'B', 'P'}, 8)) return "image/webp";
    return std::nullopt;
}

std::string to_data_url(std::span<const std::uint8_t> bytes) {
    const auto type = sniff_image_type(bytes).value_or("application/octet-stream");
    return "data:" + type + ";base64," + crypto::base64_encode(bytes);
}

}  // namespace dentra::gateway
