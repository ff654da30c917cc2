// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dentra/artifacts.hpp"
#include "dentra/clock.hpp"
#include "dentra/comprehension.hpp"
#include "dentra/gateway.hpp"
#include "dentra/json.hpp"
#include "dentra/memory.hpp"
#include "dentra/rag.hpp"
#include "dentra/tools.hpp"

namespace dentra {

enum class RagMode { per_iteration, as_tool, both };
std::string_view to_string(RagMode mode);
std::optional<RagMode> rag_mode_from_string(std::string_view s);

struct SessionConfig {
    std::chrono::duration<double> t_max{120.0};
    int max_iterations = 10;
    std::size_t k_default = 7;
    RagMode rag_mode = RagMode::as_tool;
    std::string orchestrator_model;
    bool critique_prompt_enabled = true;
    std::size_t context_budget = 4000;  // counted tokens of memory context per reason call
    bool summarize_on_timeout = false;  // one extra completion instead of the template

    void validate() const;
    json to_json() const;
    // Fields absent from `j` keep the values of `base`.
    static SessionConfig from_json(const json& j, const SessionConfig& base);
    static SessionConfig from_json(const json& j);
};

struct AgentState {
    std::string session_id;
    int iteration = 0;
    StructuredInstruction current_instruction;
    std::vector<std::string> pending_observations;
    TimePoint started_at{};
    int first_iteration = 1;  // first iteration number of the current run

    friend bool operator==(const AgentState&, const AgentState&) = default;
};

struct Citation {
    std::string book_title;
    int page = 0;
    friend bool operator==(const Citation&, const Citation&) = default;
    friend auto operator<=>(const Citation&, const Citation&) = default;
};

struct FinalResponse {
    std::string text;
    std::vector<Citation> citations;
    std::vector<std::string> artifacts;
    bool timed_out = false;
    bool awaiting_user = false;
    std::optional<std::string> error;
    std::string trace_ref;

    json to_json() const;
};

enum class EventKind { instruction, thought, tool_call, tool_result, knowledge, user_prompt, response, timeout, error };
std::string_view to_string(EventKind kind);
std::optional<EventKind> event_kind_from_string(std::string_view s);
bool is_terminal(EventKind kind);

struct AgentEvent {
    std::uint64_t seq = 0;
    EventKind kind = EventKind::instruction;
    json payload;
    TimePoint at{};

    // {seq, kind, payload, at}
    json to_json() const;
    static AgentEvent from_json(const json& j);
};

// Totally ordered per-session event stream. seq starts at 1 and is dense.
class EventLog {
public:
    std::uint64_t append(EventKind kind, json payload, TimePoint at);
    std::vector<AgentEvent> after(std::uint64_t seq) const;
    // Blocks until an event past `seq` exists or the timeout elapses.
    std::vector<AgentEvent> wait_after(std::uint64_t seq, std::chrono::milliseconds timeout) const;
    std::uint64_t last_seq() const;
    std::size_t size() const;

private:
    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
    std::vector<AgentEvent> events_;
};

struct Decision {
    enum class Kind { request_user_input, respond, act };
    Kind kind = Kind::respond;
    std::string text;  // prompt or draft
    std::vector<ProposedAction> actions;
};

// Marker a model reply starts with to ask the user for more information.
inline constexpr std::string_view kNeedUserInputMarker = "NEED_USER_INPUT:";

std::string orchestrator_system_prompt(bool critique_enabled);

// Builds the successor state: iteration + 1, observations = serialized results
// (call order) then knowledge items (rank order). Pure.
AgentState observe(const AgentState& state, const std::vector<tools::ToolResult>& results,
                   const std::vector<rag::KnowledgeItem>& knowledge);

// Thoughts from one completion. Returns nullopt if it is unusable.
std::optional<Thoughts> parse_completion(const gateway::Completion& completion);

Decision decide(const Thoughts& thoughts);

class Agent {
public:
    struct Deps {
        std::shared_ptr<gateway::ChatModel> orchestrator;
        tools::ToolRegistry* registry = nullptr;
        rag::KnowledgeBase* kb = nullptr;  // optional
        MemoryStore* memory = nullptr;
        ArtifactStore* artifacts = nullptr;  // optional
        std::shared_ptr<const Clock> clock = system_clock();
    };

    explicit Agent(Deps deps);

    // Runs the observe/reason/act loop for one user turn. Never throws for
    // gateway or tool failures; those end the run with a terminal event.
    FinalResponse run_session(const std::string& session_id, const StructuredInstruction& instruction,
                              const SessionConfig& config, EventLog& events) const;

    // One orchestrator completion plus at most one repair re-prompt. Throws
    // GatewayError on transport failure and Error on a malformed reply.
    Thoughts reason(const AgentState& state, const SessionConfig& config,
                    std::optional<std::chrono::steady_clock::time_point> deadline = std::nullopt) const;

    FinalResponse generate_timeout_response(const AgentState& state, const SessionConfig& config,
                                            bool time_budget_exhausted = true) const;

    std::vector<gateway::ToolSpec> visible_tools(const SessionConfig& config) const;
    std::vector<gateway::ChatMessage> reason_messages(const AgentState& state, const SessionConfig& config) const;

private:
    std::vector<Citation> run_citations(const std::string& session_id, int first_iteration) const;
    std::vector<std::string> run_artifacts(const std::string& session_id, int first_iteration) const;

    Deps deps_;
};

}  // namespace dentra
