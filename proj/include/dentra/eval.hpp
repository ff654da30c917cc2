// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dentra/agent.hpp"
#include "dentra/gateway.hpp"
#include "dentra/json.hpp"

namespace dentra::eval {

struct MCQItem {
    std::string item_id;
    std::string category;
    std::string stem;
    std::map<std::string, std::string> options;  // letter -> text
    std::set<std::string> gold;

    void validate() const;
    json to_json() const;
    static MCQItem from_json(const json& j);
};

// JSONL, one item per non-blank line. Errors name the line and item id.
std::vector<MCQItem> load_benchmark(const std::filesystem::path& path);

// Exact set match.
bool score_item(const std::set<std::string>& predicted, const std::set<std::string>& gold);

std::string question_prompt(const MCQItem& item);
std::string repair_prompt(const MCQItem& item);

// Letters from the last "Answer: ..." (or 答案：) line. nullopt when there is
// no such line, it holds something other than option letters, or a letter
// is not an option of the item.
std::optional<std::set<std::string>> extract_answer(std::string_view response, const MCQItem& item);

struct SubjectTurn {
    std::string text;
    std::vector<std::string> tool_names;  // tools called while producing this turn, in order
    json trace = json::array();
};

// Something that answers questions. Consecutive asks with the same key
// belong to one conversation.
class Subject {
public:
    virtual ~Subject() = default;
    virtual std::string name() const = 0;
    virtual SubjectTurn ask(const std::string& key, const std::string& prompt) = 0;
};

class BareChatSubject final : public Subject {
public:
    BareChatSubject(std::shared_ptr<gateway::ChatModel> model, std::string name = "bare_chat");
    std::string name() const override { return name_; }
    SubjectTurn ask(const std::string& key, const std::string& prompt) override;

private:
    std::shared_ptr<gateway::ChatModel> model_;
    std::string name_;
    std::mutex mu_;
    std::map<std::string, std::vector<gateway::ChatMessage>> history_;
};

// Each item gets its own agent session; intent is fixed to education.
class AgentSubject final : public Subject {
public:
    AgentSubject(const Agent& agent, SessionConfig config, std::shared_ptr<const Clock> clock,
                 std::string name = "agent");
    std::string name() const override { return name_; }
    SubjectTurn ask(const std::string& key, const std::string& prompt) override;

private:
    const Agent& agent_;
    SessionConfig config_;
    std::shared_ptr<const Clock> clock_;
    std::string name_;
    std::mutex mu_;
    std::map<std::string, std::shared_ptr<EventLog>> logs_;
};

struct Score {
    std::size_t correct = 0;
    std::size_t total = 0;
    double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

struct ItemOutcome {
    std::string item_id;
    std::string category;
    std::set<std::string> predicted;
    std::set<std::string> gold;
    bool correct = false;
    bool repaired = false;  // a repair prompt was needed
    bool flagged = false;   // no answer could be extracted
    std::vector<std::string> prompts;
    std::vector<std::string> responses;
    std::vector<std::string> tool_names;
    json trace = json::array();
};

struct EvalReport {
    std::string subject;
    std::map<std::string, Score> per_category;
    Score overall;
    std::vector<ItemOutcome> items;

    json to_json(bool with_traces = true) const;
};

struct EvalOptions {
    std::size_t parallelism = 1;
};

EvalReport run_eval(Subject& subject, const std::vector<MCQItem>& items, const EvalOptions& options = EvalOptions{});

// Model rows by category columns plus Overall, accuracies in percent.
std::string render_table(const std::vector<EvalReport>& reports);

struct ToolUsageStats {
    std::map<std::string, std::size_t> per_tool_counts;
    std::size_t cases = 0;
    std::optional<double> mean_calls_per_case;  // undefined for zero cases

    json to_json() const;
};

ToolUsageStats tool_usage_stats(const std::vector<std::vector<std::string>>& traces);
ToolUsageStats tool_usage_stats(const EvalReport& report);

}  // namespace dentra::eval
