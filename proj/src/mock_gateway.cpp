// SPDX-License-Identifier: Apache-2.0
#include "dentra/mock_gateway.hpp"

#include <httplib.h>

#include "http_server.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include "dentra/crypto.hpp"
#include "dentra/error.hpp"
#include "dentra/text.hpp"

namespace dentra::mock {

namespace {

std::vector<std::string> normalized_words(const std::string& s) {
    std::vector<std::string> out;
    for (auto& w : text::split_words(s)) {
        std::string cleaned;
        for (unsigned char c : w) {
            if (c >= 0x80 || std::isalnum(c)) cleaned.push_back(static_cast<char>(std::tolower(c)));
        }
        if (!cleaned.empty()) out.push_back(std::move(cleaned));
    }
    return out;
}

std::string hex16(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

HashEmbedder::HashEmbedder(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
    if (dimension == 0) throw ValidationError("dimension", "must be > 0");
}

std::vector<float> HashEmbedder::embed_one(const std::string& t) const {
    std::vector<float> v(dimension_, 0.0f);
    const auto words = normalized_words(t);
    if (words.empty()) {
        v[crypto::fnv1a64(t, seed_) % dimension_] = 1.0f;
        return v;
    }
    for (const auto& w : words) {
        const std::uint64_t h = crypto::fnv1a64(w, seed_);
        v[h % dimension_] += (h >> 63) ? 1.0f : -1.0f;
    }
    bool all_zero = true;
    for (float x : v) all_zero = all_zero && x == 0.0f;
    if (all_zero) v[crypto::fnv1a64(t, seed_) % dimension_] = 1.0f;
    return v;
}

std::vector<std::vector<float>> HashEmbedder::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) throw ValidationError("texts", "embedding batch must be non-empty");
    std::vector<std::vector<float>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
}

std::string HashEmbedder::model_id() const {
    return "hash-embedder-d" + std::to_string(dimension_);
}

std::vector<double> LexicalReranker::rerank_score(const std::string& query,
                                                  const std::vector<std::string>& docs) {
    const auto qw = normalized_words(query);
    const std::set<std::string> q(qw.begin(), qw.end());
    std::vector<double> scores;
    scores.reserve(docs.size());
    for (const auto& d : docs) {
        const auto dw = normalized_words(d);
        const std::set<std::string> ds(dw.begin(), dw.end());
        std::size_t shared = 0;
        for (const auto& w : ds) shared += q.count(w);
        const double denom = std::sqrt(static_cast<double>(std::max<std::size_t>(1, q.size())) *
                                       static_cast<double>(std::max<std::size_t>(1, ds.size())));
        scores.push_back(static_cast<double>(shared) / denom);
    }
    return scores;
}

json MockEntry::to_json() const {
    json j = {{"role", gateway::to_string(role)}, {"status", status}, {"body", body}};
    if (model) j["model"] = *model;
    if (ordinal) j["ordinal"] = *ordinal;
    if (body_hash) j["body_hash"] = *body_hash;
    if (!contains.empty()) j["contains"] = contains;
    if (delay.count() > 0) j["delay_ms"] = delay.count();
    return j;
}

MockEntry MockEntry::from_json(const json& j) {
    MockEntry e;
    auto role = gateway::role_from_string(j.at("role").get<std::string>());
    if (!role) throw ValidationError("role", "unknown role " + j.at("role").dump());
    e.role = *role;
    if (j.contains("model")) e.model = j["model"].get<std::string>();
    if (j.contains("ordinal")) e.ordinal = j["ordinal"].get<int>();
    if (j.contains("body_hash")) e.body_hash = j["body_hash"].get<std::string>();
    if (j.contains("contains")) {
        if (j["contains"].is_string()) e.contains = {j["contains"].get<std::string>()};
        else e.contains = j["contains"].get<std::vector<std::string>>();
    }
    e.status = j.value("status", 200);
    e.body = j.value("body", json::object());
    e.delay = std::chrono::milliseconds(j.value("delay_ms", 0));
    return e;
}

void MockScript::validate() const {
    std::set<std::string> keys;
    std::vector<std::string> bad;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        std::string key;
        if (e.body_hash) key = "hash:" + *e.body_hash;
        else if (e.ordinal) {
            if (*e.ordinal < 1) bad.push_back("entries/" + std::to_string(i) + "/ordinal: must be >= 1");
            key = std::string(gateway::to_string(e.role)) + "|" + e.model.value_or("*") + "|" +
                  std::to_string(*e.ordinal);
        } else {
            continue;
        }
        if (!keys.insert(key).second)
            bad.push_back("entries/" + std::to_string(i) + ": ambiguous matcher " + key);
    }
    if (!bad.empty()) throw ValidationError(std::move(bad));
}

json MockScript::to_json() const {
    json list = json::array();
    for (const auto& e : entries) list.push_back(e.to_json());
    json gens = json::object();
    if (generators.embed_dimension) gens["embed"] = {{"dimension", *generators.embed_dimension}};
    if (generators.lexical_rerank) gens["rerank"] = "lexical";
    return {{"entries", list}, {"generators", gens}};
}

MockScript MockScript::from_json(const json& j) {
    MockScript s;
    for (const auto& e : j.value("entries", json::array())) s.entries.push_back(MockEntry::from_json(e));
    const json gens = j.value("generators", json::object());
    if (gens.contains("embed")) s.generators.embed_dimension = gens["embed"].at("dimension").get<std::size_t>();
    s.generators.lexical_rerank = gens.value("rerank", std::string{}) == "lexical";
    s.validate();
    return s;
}

json chat_text_body(const std::string& text) {
    return {{"id", "mock-completion"},
            {"object", "chat.completion"},
            {"choices",
             {{{"index", 0},
               {"message", {{"role", "assistant"}, {"content", text}}},
               {"finish_reason", "stop"}}}}};
}

json chat_tool_calls_body(const std::vector<std::pair<std::string, json>>& calls,
                          const std::string& text) {
    json tool_calls = json::array();
    for (std::size_t i = 0; i < calls.size(); ++i) {
        tool_calls.push_back({{"id", "tc-" + std::to_string(i + 1)},
                              {"type", "function"},
                              {"function",
                               {{"name", calls[i].first},
                                {"arguments", calls[i].second.is_string()
                                                  ? calls[i].second.get<std::string>()
                                                  : calls[i].second.dump()}}}});
    }
    json message = {{"role", "assistant"},
                    {"content", text.empty() ? json(nullptr) : json(text)},
                    {"tool_calls", tool_calls}};
    return {{"id", "mock-completion"},
            {"object", "chat.completion"},
            {"choices", {{{"index", 0}, {"message", message}, {"finish_reason", "tool_calls"}}}}};
}

json embedding_body(const std::vector<std::vector<float>>& vectors) {
    json data = json::array();
    for (std::size_t i = 0; i < vectors.size(); ++i)
        data.push_back({{"object", "embedding"}, {"index", i}, {"embedding", vectors[i]}});
    return {{"object", "list"}, {"data", data}};
}

json rerank_body(const std::vector<double>& scores) {
    json results = json::array();
    for (std::size_t i = 0; i < scores.size(); ++i)
        results.push_back({{"index", i}, {"relevance_score", scores[i]}});
    return {{"results", results}};
}

json distribution_body(const std::map<std::string, double>& probabilities) {
    return {{"distribution", probabilities}};
}

std::string fingerprint(gateway::Role role, const json& body) {
    return std::string(gateway::to_string(role)) + ":" + hex16(crypto::fnv1a64(body.dump()));
}

MockGatewayServer::MockGatewayServer(MockScript script) : script_(std::move(script)) {
    script_.validate();
}

MockGatewayServer::~MockGatewayServer() { stop(); }

void MockGatewayServer::sleep_interruptible(std::chrono::milliseconds d) {
    std::unique_lock lock(mu_);
    stop_cv_.wait_for(lock, d, [this] { return stopping_; });
}

MockGatewayServer::Outcome MockGatewayServer::resolve(gateway::Role role, const json& body) {
    const std::string normalized = body.dump();
    const std::string fp = fingerprint(role, body);
    const std::string model = body.value("model", std::string{});
    const std::string role_name(gateway::to_string(role));

    std::lock_guard lock(mu_);
    const int role_ordinal = ++counters_[role_name + "|*"];
    const int model_ordinal = ++counters_[role_name + "|" + model];

    auto matches_filters = [&](const MockEntry& e) {
        if (e.role != role) return false;
        if (e.model && *e.model != model) return false;
        for (const auto& needle : e.contains)
            if (normalized.find(needle) == std::string::npos) return false;
        return true;
    };

    const MockEntry* hit = nullptr;
    const std::string hash = fp.substr(fp.find(':') + 1);
    for (const auto& e : script_.entries) {
        if (e.body_hash && *e.body_hash == hash && matches_filters(e)) {
            hit = &e;
            break;
        }
    }
    if (!hit) {
        for (const auto& e : script_.entries) {
            if (!e.ordinal || e.body_hash || !matches_filters(e)) continue;
            if (*e.ordinal == (e.model ? model_ordinal : role_ordinal)) {
                hit = &e;
                break;
            }
        }
    }
    if (!hit) {
        for (const auto& e : script_.entries) {
            if (!e.ordinal && !e.body_hash && matches_filters(e)) {
                hit = &e;
                break;
            }
        }
    }

    Outcome out{418, json::object(), std::chrono::milliseconds(0)};
    if (hit) {
        out = {hit->status, hit->body, hit->delay};
    } else if (role == gateway::Role::embed && script_.generators.embed_dimension &&
               body.contains("input")) {
        HashEmbedder embedder(*script_.generators.embed_dimension);
        std::vector<std::string> inputs;
        if (body["input"].is_string()) inputs.push_back(body["input"].get<std::string>());
        else inputs = body["input"].get<std::vector<std::string>>();
        out = {200, embedding_body(embedder.embed(inputs)), std::chrono::milliseconds(0)};
    } else if (role == gateway::Role::rerank && script_.generators.lexical_rerank &&
               body.contains("query") && body.contains("documents")) {
        LexicalReranker reranker;
        out = {200,
               rerank_body(reranker.rerank_score(body["query"].get<std::string>(),
                                                 body["documents"].get<std::vector<std::string>>())),
               std::chrono::milliseconds(0)};
    } else {
        out.body = {{"error", "unmatched request"},
                    {"fingerprint", fp},
                    {"ordinal", role_ordinal}};
    }
    log_.push_back({role, fp, body, out.status});
    return out;
}

int MockGatewayServer::start(int port, const std::string& host) {
    server_ = detail::make_http_server();
    server_->new_task_queue = [] { return new httplib::ThreadPool(32); };
    for (gateway::Role role : {gateway::Role::chat, gateway::Role::embed, gateway::Role::rerank,
                               gateway::Role::classify}) {
        server_->Post(std::string(gateway::route_for(role)),
                      [this, role](const httplib::Request& req, httplib::Response& res) {
                          json body = json::parse(req.body, nullptr, false);
                          if (body.is_discarded()) {
                              res.status = 400;
                              res.set_content(R"({"error":"body is not JSON"})", "application/json");
                              return;
                          }
                          Outcome o = resolve(role, body);
                          if (o.delay.count() > 0) sleep_interruptible(o.delay);
                          res.status = o.status;
                          res.set_content(o.body.dump(), "application/json");
                      });
    }
    if (port == 0) {
        port_ = server_->bind_to_any_port(host);
    } else {
        port_ = server_->bind_to_port(host, port) ? port : -1;
    }
    if (port_ <= 0) throw Error("mock gateway: cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port_;
}

void MockGatewayServer::stop() {
    {
        std::lock_guard lock(mu_);
        stopping_ = true;
    }
    stop_cv_.notify_all();
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
    server_.reset();
}

std::string MockGatewayServer::base_url() const {
    return "http://127.0.0.1:" + std::to_string(port_);
}

gateway::EndpointConfig MockGatewayServer::endpoint(gateway::Role role, const std::string& model,
                                                    std::chrono::milliseconds timeout) const {
    gateway::EndpointConfig c;
    c.role = role;
    c.base_url = base_url();
    c.model = model;
    c.timeout = timeout;
    c.max_retries = 2;
    c.backoff_initial = std::chrono::milliseconds(10);
    return c;
}

std::vector<RecordedRequest> MockGatewayServer::requests() const {
    std::lock_guard lock(mu_);
    return log_;
}

}  // namespace dentra::mock
