// SPDX-License-Identifier: Apache-2.0
#include "dentra/config.hpp"

#include <fstream>

#include "dentra/error.hpp"

namespace dentra {

namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

}  // namespace

AppConfig AppConfig::from_json(const json& j, const fs::path& base_dir) {
    AppConfig c;
    try {
        if (j.contains("gateway")) {
            for (const auto& [key, value] : j["gateway"].items()) {
                if (key == "intent") {
                    c.intent = gateway::EndpointConfig::from_json(value, gateway::Role::chat);
                    c.intent->validate();
                    continue;
                }
                auto role = gateway::role_from_string(key);
                if (!role) throw ValidationError("gateway", "unknown role " + key);
                auto ep = gateway::EndpointConfig::from_json(value, *role);
                ep.validate();
                c.endpoints[*role] = std::move(ep);
            }
        }
        if (j.contains("catalog")) c.catalog = resolve(base_dir, j["catalog"].get<std::string>());
        c.tool_base_url = j.value("tool_base_url", std::string{});
        for (const auto& ji : j.value("indexes", json::array())) {
            IndexConfig ic;
            ic.dir = resolve(base_dir, ji.at("dir").get<std::string>());
            ic.main = ji.value("role", std::string("main")) == "main";
            c.indexes.push_back(std::move(ic));
        }
        if (j.contains("session_defaults")) c.session_defaults = SessionConfig::from_json(j["session_defaults"]);
        if (j.contains("service")) {
            const auto& s = j["service"];
            c.service.host = s.value("host", c.service.host);
            c.service.port = s.value("port", c.service.port);
            c.service.auth_token_env = s.value("auth_token_env", std::string{});
            c.service.max_image_bytes = s.value("max_image_bytes", c.service.max_image_bytes);
            if (s.contains("memory_dir")) c.service.memory_dir = resolve(base_dir, s["memory_dir"].get<std::string>());
            if (s.contains("artifact_dir"))
                c.service.artifact_dir = resolve(base_dir, s["artifact_dir"].get<std::string>());
        }
        c.modality_threshold = j.value("modality_threshold", c.modality_threshold);
        c.cross_language_retrieval = j.value("cross_language_retrieval", false);
    } catch (const json::exception& e) {
        throw ValidationError("config", e.what());
    }
    if (!c.endpoints.count(gateway::Role::chat)) throw ValidationError("gateway.chat", "required");
    return c;
}

AppConfig AppConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("no config file " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ValidationError("config", path.string() + " is not valid JSON");
    return from_json(j, path.parent_path());
}

std::unique_ptr<Runtime> make_runtime(const AppConfig& config, std::shared_ptr<const Clock> clock) {
    auto rt = std::make_unique<Runtime>();
    rt->clock = std::move(clock);
    rt->chat = std::make_shared<gateway::HttpChatModel>(config.endpoints.at(gateway::Role::chat));
    rt->intent_chat = config.intent ? std::make_shared<gateway::HttpChatModel>(*config.intent) : rt->chat;
    if (auto it = config.endpoints.find(gateway::Role::embed); it != config.endpoints.end())
        rt->embedder = std::make_shared<gateway::HttpEmbedder>(it->second);
    if (auto it = config.endpoints.find(gateway::Role::rerank); it != config.endpoints.end())
        rt->reranker = std::make_shared<gateway::HttpReranker>(it->second);
    if (auto it = config.endpoints.find(gateway::Role::classify); it != config.endpoints.end())
        rt->classifier = std::make_shared<gateway::HttpImageClassifier>(it->second);

    rt->registry = std::make_unique<tools::ToolRegistry>(rt->clock);
    if (config.catalog) rt->registry->load_catalog(*config.catalog, {config.tool_base_url, false});

    if (rt->embedder) {
        rt->kb = std::make_unique<rag::KnowledgeBase>(rt->embedder, rt->reranker,
                                                      rag::KnowledgeBaseOptions{config.cross_language_retrieval});
        for (const auto& ic : config.indexes) {
            auto index = std::make_shared<const rag::VectorIndex>(rag::VectorIndex::load(ic.dir));
            if (ic.main) rt->kb->set_main_index(index);
            else rt->kb->add_private_index(index);
        }
        if (config.session_defaults.rag_mode != RagMode::per_iteration) {
            rt->registry->register_tool(rt->kb->tool_descriptor(config.session_defaults.k_default), true);
            rt->registry->bind_local("rag", rt->kb->tool_handler(config.session_defaults.k_default));
        }
    }

    rt->memory = std::make_unique<MemoryStore>(config.service.memory_dir);
    rt->artifacts = std::make_unique<ArtifactStore>(config.service.artifact_dir);
    rt->comprehension = std::make_unique<Comprehension>(rt->intent_chat, rt->classifier, config.modality_threshold);

    Agent::Deps deps;
    deps.orchestrator = rt->chat;
    deps.registry = rt->registry.get();
    deps.kb = rt->kb.get();
    deps.memory = rt->memory.get();
    deps.artifacts = rt->artifacts.get();
    deps.clock = rt->clock;
    rt->agent = std::make_unique<Agent>(std::move(deps));
    return rt;
}

}  // namespace dentra
