// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include "dentra/error.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <thread>
#include <unistd.h>

namespace dentra::testkit {

namespace fs = std::filesystem;

fs::path data_dir() { return DENTRA_DATA_DIR; }

TempDir::TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("dentra-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

std::vector<std::uint8_t> tiny_png(int variant) {
    std::vector<std::uint8_t> b = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A, 0, 0, 0, 13, 'I', 'H', 'D', 'R',
                                   0,    0,   0,   1,   0,    0,    0,    1,    8, 2, 0, 0,  0};
    b.push_back(static_cast<std::uint8_t>(variant & 0xff));
    b.push_back(static_cast<std::uint8_t>((variant >> 8) & 0xff));
    return b;
}

json strip_volatile(json j) {
    if (j.is_object()) {
        for (const char* key : {"at", "timestamp", "created_at", "latency_ms"}) j.erase(key);
        for (auto& [_, v] : j.items()) v = strip_volatile(v);
    } else if (j.is_array()) {
        for (auto& v : j) v = strip_volatile(v);
    }
    return j;
}

TimePoint fixed_time() { return parse_timestamp("2025-01-02T03:04:05.678Z"); }

rag::VectorIndex make_index(const std::string& name, const std::vector<std::string>& texts,
                            gateway::Embedder& embedder, int books, text::Language language) {
    std::vector<rag::Paragraph> paragraphs;
    for (std::size_t i = 0; i < texts.size(); ++i)
        paragraphs.push_back({texts[i], static_cast<int>(i + 1), "Book " + std::to_string(i % books), language});
    FixedClock clock(fixed_time());
    return rag::build_index(paragraphs, embedder, {512, 64}, name, clock);
}

std::string random_text(std::mt19937_64& rng, int min_words, int max_words) {
    static const std::vector<std::string> vocab = {
        "enamel",   "dentin",    "pulp",      "caries",    "fluoride", "plaque",   "gingiva",  "molar",
        "incisor",  "canine",    "root",      "canal",     "crown",    "implant",  "bone",     "periodontal",
        "pocket",   "probing",   "bleeding",  "calculus",  "sealant",  "varnish",  "occlusion", "bracket",
        "radiograph", "lesion",  "mucosa",    "ulcer",     "biopsy",   "leukoplakia", "nerve",  "abscess",
        "extraction", "suture",  "orthodontic", "retainer", "denture", "bridge",   "veneer",   "composite"};
    std::uniform_int_distribution<int> n(min_words, max_words);
    std::uniform_int_distribution<std::size_t> w(0, vocab.size() - 1);
    std::string out;
    const int count = n(rng);
    for (int i = 0; i < count; ++i) out += (i ? " " : "") + vocab[w(rng)];
    return out;
}

ScriptedChat::ScriptedChat(std::vector<gateway::Completion> replies) {
    for (auto& r : replies) push(std::move(r));
}

void ScriptedChat::push(gateway::Completion c) {
    std::lock_guard lock(mu_);
    queue_.push_back([c] { return c; });
}

void ScriptedChat::push_text(const std::string& text) { push(text_completion(text)); }

void ScriptedChat::push_error(GatewayError::Kind kind) {
    std::lock_guard lock(mu_);
    queue_.push_back([kind]() -> gateway::Completion { throw GatewayError(kind, "scripted failure", 500); });
}

gateway::Completion ScriptedChat::chat(const std::vector<gateway::ChatMessage>& messages,
                                       const std::vector<gateway::ToolSpec>&,
                                       std::optional<gateway::Millis>) {
    std::function<gateway::Completion()> next;
    {
        std::lock_guard lock(mu_);
        calls_.push_back(messages);
        if (queue_.empty()) throw GatewayError(GatewayError::Kind::http_status, "script exhausted", 418);
        next = std::move(queue_.front());
        queue_.pop_front();
    }
    return next();
}

std::vector<std::vector<gateway::ChatMessage>> ScriptedChat::calls() const {
    std::lock_guard lock(mu_);
    return calls_;
}

gateway::Completion text_completion(const std::string& text) {
    gateway::Completion c;
    c.text = text;
    return c;
}

gateway::Completion tool_completion(const std::vector<std::pair<std::string, json>>& calls) {
    return gateway::parse_chat_response(mock::chat_tool_calls_body(calls));
}

gateway::Completion PlantedFactChat::chat(const std::vector<gateway::ChatMessage>& messages,
                                          const std::vector<gateway::ToolSpec>& tools,
                                          std::optional<gateway::Millis>) {
    std::string all;
    for (const auto& m : messages) all += m.content + "\n";
    // A trigger counts as asked only on a line that is not quoting retrieved facts,
    // since a retrieval result can carry every planted fact at once.
    auto asked = [&](const std::string& trigger) {
        std::istringstream lines(all);
        for (std::string line; std::getline(lines, line);) {
            if (line.find(trigger) == std::string::npos) continue;
            const bool quotes_fact = std::any_of(facts_.begin(), facts_.end(), [&](const PlantedFact& f) {
                return line.find(f.fact) != std::string::npos;
            });
            if (!quotes_fact) return true;
        }
        return false;
    };
    for (const auto& f : facts_) {
        if (!asked(f.trigger)) continue;
        if (all.find(f.fact) != std::string::npos) return text_completion("Answer: " + f.correct);
        const bool offered = std::any_of(tools.begin(), tools.end(), [](const gateway::ToolSpec& t) {
            return t.name == rag::KnowledgeBase::kToolName;
        });
        if (offered && all.find("knowledge #") == std::string::npos)
            return tool_completion({{rag::KnowledgeBase::kToolName, {{"query", f.trigger + " protocol"}}}});
        return text_completion("Answer: " + f.wrong);
    }
    return text_completion("Answer: A");
}

gateway::Completion DeterministicChat::chat(const std::vector<gateway::ChatMessage>& messages,
                                            const std::vector<gateway::ToolSpec>&, std::optional<gateway::Millis>) {
    const std::string& last = messages.back().content;
    if (last.find("slow") != std::string::npos) std::this_thread::sleep_for(std::chrono::milliseconds(300));
    if (messages.front().content.find("classify the intent") != std::string::npos)
        return text_completion(last.find("pizza") != std::string::npos ? "out_of_scope" : "anomaly_diagnosis");
    if (last.find("Observations:") == std::string::npos && last.find("- img-") != std::string::npos) {
        const auto at = last.find("- img-") + 2;
        const std::string image_id = last.substr(at, last.find(':', at) - at);
        return tool_completion({{"caries_detector", {{"image_id", image_id}}}});
    }
    if (last.find("ask me") != std::string::npos) return text_completion("NEED_USER_INPUT: Which side?");
    return text_completion("Findings reviewed.");
}

gateway::ModalityDistribution ConstantClassifier::classify_image(std::span<const std::uint8_t>) {
    gateway::ModalityDistribution d{};
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = kImagingModalities[i] == m_ ? 0.9 : 0.02;
    return d;
}

}  // namespace dentra::testkit
