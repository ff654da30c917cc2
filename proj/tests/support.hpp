// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <deque>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "dentra/agent.hpp"
#include "dentra/error.hpp"
#include "dentra/json.hpp"
#include "dentra/mock_gateway.hpp"
#include "dentra/rag.hpp"

namespace dentra::testkit {

std::filesystem::path data_dir();

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

// Minimal PNG (signature plus header chunk); `variant` changes the bytes.
std::vector<std::uint8_t> tiny_png(int variant = 0);

// Drops fields that carry wall-clock time (at, timestamp, created_at, latency_ms).
json strip_volatile(json j);

// Fixed 2025-01-02T03:04:05.678Z.
TimePoint fixed_time();

// Index of the given texts embedded with `embedder`, pages 1..n, book "Book <i % books>".
rag::VectorIndex make_index(const std::string& name, const std::vector<std::string>& texts,
                            gateway::Embedder& embedder, int books = 3,
                            text::Language language = text::Language::en);

// In-process chat model answering from a queue; an empty queue throws
// GatewayError(http_status 418) like the mock server does.
class ScriptedChat final : public gateway::ChatModel {
public:
    ScriptedChat() = default;
    explicit ScriptedChat(std::vector<gateway::Completion> replies);
    void push(gateway::Completion c);
    void push_text(const std::string& text);
    void push_error(GatewayError::Kind kind);
    gateway::Completion chat(const std::vector<gateway::ChatMessage>& messages,
                             const std::vector<gateway::ToolSpec>& tools,
                             std::optional<gateway::Millis> timeout) override;
    std::vector<std::vector<gateway::ChatMessage>> calls() const;

private:
    mutable std::mutex mu_;
    std::deque<std::function<gateway::Completion()>> queue_;
    std::vector<std::vector<gateway::ChatMessage>> calls_;
};

// Answers a multiple-choice prompt correctly only when the planted fact for
// it appears somewhere in the conversation. When the fact is missing and the
// knowledge tool is offered, it first asks that tool about the trigger word.
struct PlantedFact {
    std::string trigger;  // word that identifies the question
    std::string fact;     // sentence planted in the corpus
    std::string correct;  // letters
    std::string wrong;
};

class PlantedFactChat final : public gateway::ChatModel {
public:
    explicit PlantedFactChat(std::vector<PlantedFact> facts) : facts_(std::move(facts)) {}
    gateway::Completion chat(const std::vector<gateway::ChatMessage>& messages,
                             const std::vector<gateway::ToolSpec>& tools,
                             std::optional<gateway::Millis> timeout) override;

private:
    std::vector<PlantedFact> facts_;
};

// Stateless stand-in for the intent and orchestrator models: the reply is a
// pure function of the conversation, so concurrent sessions replay exactly.
// Messages mentioning "pizza" are out of scope, "ask me" asks the user back,
// "slow" delays every reply by 300 ms, and a listed image gets one
// caries_detector call before the answer.
class DeterministicChat final : public gateway::ChatModel {
public:
    gateway::Completion chat(const std::vector<gateway::ChatMessage>& messages,
                             const std::vector<gateway::ToolSpec>& tools,
                             std::optional<gateway::Millis> timeout) override;
};

class ConstantClassifier final : public gateway::ImageClassifier {
public:
    explicit ConstantClassifier(Modality m) : m_(m) {}
    gateway::ModalityDistribution classify_image(std::span<const std::uint8_t> image) override;

private:
    Modality m_;
};

gateway::Completion text_completion(const std::string& text);
gateway::Completion tool_completion(const std::vector<std::pair<std::string, json>>& calls);

// Random lowercase word soup drawn from a small vocabulary.
std::string random_text(std::mt19937_64& rng, int min_words, int max_words);

}  // namespace dentra::testkit
