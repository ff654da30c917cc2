// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dentra/agent.hpp"
#include "dentra/artifacts.hpp"
#include "dentra/comprehension.hpp"
#include "dentra/gateway.hpp"
#include "dentra/json.hpp"
#include "dentra/memory.hpp"
#include "dentra/rag.hpp"
#include "dentra/tools.hpp"

namespace dentra {

struct IndexConfig {
    std::filesystem::path dir;
    bool main = true;
};

struct ServiceSettings {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string auth_token_env;  // environment variable holding the bearer token
    std::size_t max_image_bytes = 10 * 1024 * 1024;
    std::optional<std::filesystem::path> memory_dir;
    std::optional<std::filesystem::path> artifact_dir;
};

struct AppConfig {
    std::map<gateway::Role, gateway::EndpointConfig> endpoints;
    std::optional<gateway::EndpointConfig> intent;  // chat endpoint for intent recognition; defaults to chat
    std::optional<std::filesystem::path> catalog;
    std::string tool_base_url;
    std::vector<IndexConfig> indexes;
    SessionConfig session_defaults;
    ServiceSettings service;
    double modality_threshold = Comprehension::kDefaultThreshold;
    bool cross_language_retrieval = false;

    // Relative paths are resolved against `base_dir`.
    static AppConfig from_json(const json& j, const std::filesystem::path& base_dir);
    static AppConfig load(const std::filesystem::path& path);
};

// Everything a service or CLI command needs, wired from an AppConfig.
struct Runtime {
    std::shared_ptr<const Clock> clock;
    std::shared_ptr<gateway::ChatModel> chat;
    std::shared_ptr<gateway::ChatModel> intent_chat;
    std::shared_ptr<gateway::Embedder> embedder;
    std::shared_ptr<gateway::Reranker> reranker;
    std::shared_ptr<gateway::ImageClassifier> classifier;
    std::unique_ptr<tools::ToolRegistry> registry;
    std::unique_ptr<rag::KnowledgeBase> kb;
    std::unique_ptr<MemoryStore> memory;
    std::unique_ptr<ArtifactStore> artifacts;
    std::unique_ptr<Comprehension> comprehension;
    std::unique_ptr<Agent> agent;
};

std::unique_ptr<Runtime> make_runtime(const AppConfig& config, std::shared_ptr<const Clock> clock = system_clock());

}  // namespace dentra
