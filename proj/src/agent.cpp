// SPDX-License-Identifier: Apache-2.0
#include "dentra/agent.hpp"

#include <algorithm>
#include <array>
#include <set>

#include "dentra/error.hpp"
#include "dentra/text.hpp"

namespace dentra {

using steady = std::chrono::steady_clock;

// ---------------------------------------------------------------------------
// enums and value types

namespace {

constexpr std::array<std::pair<RagMode, std::string_view>, 3> kRagModes = {{
    {RagMode::per_iteration, "per_iteration"},
    {RagMode::as_tool, "as_tool"},
    {RagMode::both, "both"},
}};

constexpr std::array<std::pair<EventKind, std::string_view>, 9> kEventKinds = {{
    {EventKind::instruction, "instruction"},
    {EventKind::thought, "thought"},
    {EventKind::tool_call, "tool_call"},
    {EventKind::tool_result, "tool_result"},
    {EventKind::knowledge, "knowledge"},
    {EventKind::user_prompt, "user_prompt"},
    {EventKind::response, "response"},
    {EventKind::timeout, "timeout"},
    {EventKind::error, "error"},
}};

}  // namespace

std::string_view to_string(RagMode mode) {
    for (auto [m, n] : kRagModes)
        if (m == mode) return n;
    return "as_tool";
}

std::optional<RagMode> rag_mode_from_string(std::string_view s) {
    for (auto [m, n] : kRagModes)
        if (n == s) return m;
    if (s == "per-iteration") return RagMode::per_iteration;
    if (s == "as-tool") return RagMode::as_tool;
    return std::nullopt;
}

std::string_view to_string(EventKind kind) {
    for (auto [k, n] : kEventKinds)
        if (k == kind) return n;
    return "error";
}

std::optional<EventKind> event_kind_from_string(std::string_view s) {
    for (auto [k, n] : kEventKinds)
        if (n == s) return k;
    return std::nullopt;
}

bool is_terminal(EventKind kind) {
    return kind == EventKind::response || kind == EventKind::user_prompt || kind == EventKind::timeout ||
           kind == EventKind::error;
}

void SessionConfig::validate() const {
    std::vector<std::string> bad;
    if (!(t_max.count() > 0)) bad.push_back("t_max: must be > 0");
    if (max_iterations < 1) bad.push_back("max_iterations: must be >= 1");
    if (k_default < 1) bad.push_back("k_default: must be >= 1");
    if (context_budget < 1) bad.push_back("context_budget: must be >= 1");
    if (!bad.empty()) throw ValidationError(std::move(bad));
}

json SessionConfig::to_json() const {
    return {{"t_max_s", t_max.count()},
            {"max_iterations", max_iterations},
            {"k_default", k_default},
            {"rag_mode", to_string(rag_mode)},
            {"orchestrator_model", orchestrator_model},
            {"critique_prompt_enabled", critique_prompt_enabled},
            {"context_budget", context_budget},
            {"summarize_on_timeout", summarize_on_timeout}};
}

SessionConfig SessionConfig::from_json(const json& j, const SessionConfig& base) {
    if (!j.is_object()) throw ValidationError("config", "must be an object");
    SessionConfig c = base;
    std::vector<std::string> bad;
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "t_max_s") {
                c.t_max = std::chrono::duration<double>(v.get<double>());
            } else if (key == "max_iterations") {
                if (!v.is_number_integer()) throw ValidationError(key, "must be an integer");
                c.max_iterations = v.get<int>();
            } else if (key == "k_default" || key == "k") {
                if (!v.is_number_integer() || v.get<long long>() < 1) throw ValidationError(key, "must be an integer >= 1");
                c.k_default = v.get<std::size_t>();
            } else if (key == "rag_mode") {
                auto m = rag_mode_from_string(v.get<std::string>());
                if (!m) throw ValidationError(key, "must be per_iteration, as_tool or both");
                c.rag_mode = *m;
            } else if (key == "orchestrator_model") {
                c.orchestrator_model = v.get<std::string>();
            } else if (key == "critique_prompt_enabled") {
                c.critique_prompt_enabled = v.get<bool>();
            } else if (key == "context_budget") {
                if (!v.is_number_integer() || v.get<long long>() < 1) throw ValidationError(key, "must be an integer >= 1");
                c.context_budget = v.get<std::size_t>();
            } else if (key == "summarize_on_timeout") {
                c.summarize_on_timeout = v.get<bool>();
            } else {
                bad.push_back(key + ": unknown setting");
            }
        } catch (const ValidationError& e) {
            bad.push_back(e.what());
        } catch (const json::exception&) {
            bad.push_back(key + ": wrong type");
        }
    }
    if (!bad.empty()) throw ValidationError(std::move(bad));
    c.validate();
    return c;
}

SessionConfig SessionConfig::from_json(const json& j) { return from_json(j, SessionConfig{}); }

json FinalResponse::to_json() const {
    json cites = json::array();
    for (const auto& c : citations) cites.push_back({{"book_title", c.book_title}, {"page", c.page}});
    json j = {{"text", text},
              {"citations", cites},
              {"artifacts", artifacts},
              {"timed_out", timed_out},
              {"awaiting_user", awaiting_user},
              {"trace_ref", trace_ref}};
    if (error) j["error"] = *error;
    return j;
}

json AgentEvent::to_json() const {
    return {{"seq", seq}, {"kind", to_string(kind)}, {"payload", payload}, {"at", format_timestamp(at)}};
}

AgentEvent AgentEvent::from_json(const json& j) {
    AgentEvent e;
    e.seq = j.at("seq").get<std::uint64_t>();
    auto kind = event_kind_from_string(j.at("kind").get<std::string>());
    if (!kind) throw ValidationError("kind", "unknown event kind " + j.at("kind").dump());
    e.kind = *kind;
    e.payload = j.value("payload", json::object());
    e.at = parse_timestamp(j.at("at").get<std::string>());
    return e;
}

// ---------------------------------------------------------------------------
// event log

std::uint64_t EventLog::append(EventKind kind, json payload, TimePoint at) {
    std::uint64_t seq;
    {
        std::lock_guard lock(mu_);
        seq = events_.size() + 1;
        events_.push_back({seq, kind, std::move(payload), at});
    }
    cv_.notify_all();
    return seq;
}

std::vector<AgentEvent> EventLog::after(std::uint64_t seq) const {
    std::lock_guard lock(mu_);
    if (seq >= events_.size()) return {};
    return {events_.begin() + static_cast<std::ptrdiff_t>(seq), events_.end()};
}

std::vector<AgentEvent> EventLog::wait_after(std::uint64_t seq, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return events_.size() > seq; });
    if (seq >= events_.size()) return {};
    return {events_.begin() + static_cast<std::ptrdiff_t>(seq), events_.end()};
}

std::uint64_t EventLog::last_seq() const {
    std::lock_guard lock(mu_);
    return events_.size();
}

std::size_t EventLog::size() const { return last_seq(); }

// ---------------------------------------------------------------------------
// loop steps

std::string orchestrator_system_prompt(bool critique_enabled) {
    std::string p =
        "You are the coordinator of a dental assistant. You answer questions from patients, "
        "students and clinicians about oral health and dental images.\n"
        "Work step by step. In each step either call one or more of the provided tools, or give "
        "the final answer as plain text.\n"
        "Tools take image ids exactly as listed in the request. Call independent tools in the same "
        "step so they run together. Use the knowledge retrieval tool for factual or guideline "
        "questions and cite the book and page of what you use.\n"
        "If the request cannot be handled without more information from the user, reply with " +
        std::string(kNeedUserInputMarker) + " followed by your question.\n"
        "Answer in the language of the user.\n";
    if (critique_enabled) {
        p += "Treat every tool output as evidence to check, not as ground truth. Compare it with the "
             "image description, the other tool outputs and the retrieved references, and state it "
             "plainly when they disagree or when a result looks implausible.\n";
    }
    return p;
}

namespace {

std::string serialize_result(const tools::ToolResult& r) {
    std::string s = "tool " + r.tool_name + " (" + r.call_id + ") " + std::string(tools::to_string(r.status));
    if (r.status == tools::ToolStatus::ok) s += ": " + r.payload.dump();
    else s += ": " + r.error;
    if (!r.artifacts.empty()) s += " artifacts=" + json(r.artifacts).dump();
    return s;
}

std::string serialize_knowledge(const rag::KnowledgeItem& k) {
    const auto p = k.provenance();
    return "knowledge #" + std::to_string(k.rank) + " [" + p.book_title + ", p." + std::to_string(p.page) +
           "]: " + k.chunk.text();
}

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    for (const auto& l : lines) out += l + "\n";
    return out;
}

}  // namespace

AgentState observe(const AgentState& state, const std::vector<tools::ToolResult>& results,
                   const std::vector<rag::KnowledgeItem>& knowledge) {
    AgentState next = state;
    next.iteration = state.iteration + 1;
    next.pending_observations.clear();
    for (const auto& r : results) next.pending_observations.push_back(serialize_result(r));
    std::vector<const rag::KnowledgeItem*> ranked;
    for (const auto& k : knowledge) ranked.push_back(&k);
    std::stable_sort(ranked.begin(), ranked.end(), [](auto* a, auto* b) { return a->rank < b->rank; });
    for (const auto* k : ranked) next.pending_observations.push_back(serialize_knowledge(*k));
    return next;
}

std::optional<Thoughts> parse_completion(const gateway::Completion& completion) {
    Thoughts t;
    t.text = text::trim(completion.text);
    if (!completion.tool_calls.empty()) {
        for (const auto& call : completion.tool_calls) {
            if (call.name.empty() || !call.arguments || !call.arguments->is_object()) return std::nullopt;
            t.proposed_actions.push_back({call.name, *call.arguments});
        }
        return t;
    }
    if (t.text.empty()) return std::nullopt;
    if (t.text.rfind(kNeedUserInputMarker, 0) == 0) {
        std::string question = text::trim(std::string_view(t.text).substr(kNeedUserInputMarker.size()));
        if (question.empty()) return std::nullopt;
        t.needs_user_input = true;
        t.draft_response = question;
        return t;
    }
    t.ready_to_respond = true;
    t.draft_response = t.text;
    return t;
}

Decision decide(const Thoughts& thoughts) {
    if (thoughts.needs_user_input)
        return {Decision::Kind::request_user_input, thoughts.draft_response.value_or(thoughts.text), {}};
    if (thoughts.ready_to_respond)
        return {Decision::Kind::respond, thoughts.draft_response.value_or(thoughts.text), {}};
    if (thoughts.proposed_actions.empty()) {
        std::string draft = text::trim(thoughts.text);
        if (draft.empty())
            draft = "I could not work out a next step for this request. Please rephrase it or add detail.";
        return {Decision::Kind::respond, draft, {}};
    }
    return {Decision::Kind::act, {}, thoughts.proposed_actions};
}

// ---------------------------------------------------------------------------
// agent

Agent::Agent(Deps deps) : deps_(std::move(deps)) {
    if (!deps_.orchestrator) throw ValidationError("orchestrator", "required");
    if (!deps_.registry) throw ValidationError("registry", "required");
    if (!deps_.memory) throw ValidationError("memory", "required");
    if (!deps_.clock) deps_.clock = system_clock();
}

std::vector<gateway::ToolSpec> Agent::visible_tools(const SessionConfig& config) const {
    std::vector<gateway::ToolSpec> specs;
    for (auto& spec : deps_.registry->tool_specs()) {
        if (spec.name == rag::KnowledgeBase::kToolName && config.rag_mode == RagMode::per_iteration) continue;
        specs.push_back(std::move(spec));
    }
    return specs;
}

std::vector<gateway::ChatMessage> Agent::reason_messages(const AgentState& state, const SessionConfig& config) const {
    const auto& ins = state.current_instruction;
    std::string user = "Step " + std::to_string(state.iteration - state.first_iteration + 1) + " of at most " +
                       std::to_string(config.max_iterations) + ".\n";
    user += "Request (" + text::to_string(ins.language) + "): " + ins.query + "\n";
    std::string intents;
    for (Intent i : ins.intents) intents += (intents.empty() ? "" : ", ") + std::string(to_string(i));
    user += "Intents: " + intents + "\n";
    if (!ins.images.empty()) {
        user += "Images:\n";
        for (const auto& img : ins.images) {
            user += "- " + img.image_id + ": " + std::string(to_string(img.modality.value));
            if (img.modality.value != Modality::unknown)
                user += " (confidence " + json(img.modality.confidence).dump() + ")";
            user += "\n";
        }
    }
    const std::string context = deps_.memory->context_window(state.session_id, config.context_budget);
    if (!context.empty()) user += "\nSession memory:\n" + context + "\n";
    if (!state.pending_observations.empty()) {
        user += "\nObservations:\n";
        for (std::size_t i = 0; i < state.pending_observations.size(); ++i)
            user += std::to_string(i + 1) + ". " + state.pending_observations[i] + "\n";
    }
    return {{"system", orchestrator_system_prompt(config.critique_prompt_enabled), {}}, {"user", user, {}}};
}

Thoughts Agent::reason(const AgentState& state, const SessionConfig& config,
                       std::optional<steady::time_point> deadline) const {
    auto remaining = [&]() -> std::optional<gateway::Millis> {
        if (!deadline) return std::nullopt;
        auto left = std::chrono::duration_cast<gateway::Millis>(*deadline - steady::now());
        return std::max(left, gateway::Millis(1));
    };
    auto messages = reason_messages(state, config);
    const auto specs = visible_tools(config);
    const gateway::Completion first = deps_.orchestrator->chat(messages, specs, remaining());
    if (auto t = parse_completion(first)) return *t;

    std::string previous = first.text;
    for (const auto& c : first.tool_calls) previous += "\n" + c.name + "(" + c.raw_arguments + ")";
    messages.push_back({"assistant", previous, {}});
    messages.push_back({"user",
                        "That reply could not be used. Either call one of the provided tools with a JSON object "
                        "as arguments, give the final answer as plain text, or start with " +
                            std::string(kNeedUserInputMarker) + " followed by a question for the user.",
                        {}});
    const gateway::Completion second = deps_.orchestrator->chat(messages, specs, remaining());
    if (auto t = parse_completion(second)) return *t;
    throw Error("orchestrator reply unusable after one repair attempt");
}

std::vector<Citation> Agent::run_citations(const std::string& session_id, int first_iteration) const {
    std::vector<Citation> out;
    std::set<Citation> seen;
    for (const auto& r : deps_.memory->snapshot(session_id).records) {
        if (r.iteration < first_iteration) continue;
        for (const auto& k : r.knowledge) {
            Citation c{k.provenance().book_title, k.provenance().page};
            if (seen.insert(c).second) out.push_back(c);
        }
    }
    return out;
}

std::vector<std::string> Agent::run_artifacts(const std::string& session_id, int first_iteration) const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& r : deps_.memory->snapshot(session_id).records) {
        if (r.iteration < first_iteration) continue;
        for (const auto& res : r.results)
            for (const auto& a : res.artifacts)
                if (seen.insert(a).second) out.push_back(a);
    }
    return out;
}

FinalResponse Agent::generate_timeout_response(const AgentState& state, const SessionConfig& config,
                                               bool time_budget_exhausted) const {
    FinalResponse resp;
    resp.timed_out = time_budget_exhausted;
    resp.trace_ref = state.session_id;
    resp.citations = run_citations(state.session_id, state.first_iteration);
    resp.artifacts = run_artifacts(state.session_id, state.first_iteration);

    std::vector<std::string> findings;
    std::size_t knowledge_count = 0;
    for (const auto& r : deps_.memory->snapshot(state.session_id).records) {
        if (r.iteration < state.first_iteration) continue;
        for (const auto& res : r.results) {
            if (res.status != tools::ToolStatus::ok || res.tool_name == rag::KnowledgeBase::kToolName) continue;
            std::string payload = res.payload.dump();
            if (payload.size() > 240) payload = payload.substr(0, 240) + "...";
            findings.push_back(res.tool_name + ": " + payload);
        }
        knowledge_count += r.knowledge.size();
    }

    const bool zh = state.current_instruction.language == text::Language::zh;
    if (config.summarize_on_timeout && (!findings.empty() || knowledge_count > 0)) {
        try {
            std::string body = "Summarise these partial findings for the request \"" +
                               state.current_instruction.query + "\" in a short answer:\n" + join_lines(findings);
            auto c = deps_.orchestrator->chat({{"user", body, {}}}, {}, gateway::Millis(5000));
            if (!text::trim(c.text).empty()) {
                resp.text = text::trim(c.text);
                return resp;
            }
        } catch (const std::exception&) {
        }
    }

    if (findings.empty() && knowledge_count == 0) {
        resp.text = zh ? "在限定时间内未能取得进展，暂无可报告的结果。请稍后重试或简化问题。"
                       : "No progress was made within the time limit, so there are no findings to report. "
                         "Please try again or simplify the request.";
        return resp;
    }
    std::string t = zh ? "在限定时间内未能完成分析。目前的部分结果：\n"
                       : "The analysis did not finish within the limit. Partial findings so far:\n";
    for (const auto& f : findings) t += "- " + f + "\n";
    if (!resp.citations.empty()) {
        t += zh ? "参考资料：" : "References: ";
        for (std::size_t i = 0; i < resp.citations.size(); ++i) {
            if (i) t += "; ";
            t += resp.citations[i].book_title + (zh ? " 第" + std::to_string(resp.citations[i].page) + "页"
                                                    : ", p. " + std::to_string(resp.citations[i].page));
        }
        t += "\n";
    }
    resp.text = text::trim(t);
    return resp;
}

FinalResponse Agent::run_session(const std::string& session_id, const StructuredInstruction& instruction,
                                 const SessionConfig& config, EventLog& events) const {
    config.validate();
    const Clock& clock = *deps_.clock;
    const auto deadline = steady::now() + std::chrono::duration_cast<steady::duration>(config.t_max);
    MemoryStore& memory = *deps_.memory;

    memory.add_user_turn(session_id, instruction);
    events.append(EventKind::instruction, instruction.to_json(false), clock.now());

    AgentState state;
    state.session_id = session_id;
    state.iteration = memory.next_iteration(session_id);
    state.first_iteration = state.iteration;
    state.current_instruction = instruction;
    state.started_at = clock.now();

    auto record = [&](const Thoughts& thoughts, std::vector<tools::ToolCall> calls,
                      std::vector<tools::ToolResult> results, std::vector<rag::KnowledgeItem> knowledge) {
        MemoryRecord r;
        r.iteration = state.iteration;
        r.thoughts = thoughts;
        r.calls = std::move(calls);
        r.results = std::move(results);
        r.knowledge = std::move(knowledge);
        r.at = clock.now();
        memory.append(session_id, std::move(r));
    };
    auto respond = [&](const std::string& text) {
        FinalResponse resp;
        resp.text = text;
        resp.trace_ref = session_id;
        resp.citations = run_citations(session_id, state.first_iteration);
        resp.artifacts = run_artifacts(session_id, state.first_iteration);
        events.append(EventKind::response, resp.to_json(), clock.now());
        return resp;
    };
    auto time_out = [&](bool budget) {
        FinalResponse resp = generate_timeout_response(state, config, budget);
        json payload = resp.to_json();
        payload["reason"] = budget ? "time_budget" : "max_iterations";
        events.append(EventKind::timeout, payload, clock.now());
        return resp;
    };
    auto fail = [&](const std::string& message) {
        FinalResponse resp;
        resp.text = instruction.language == text::Language::zh ? "请求未能完成：" + message
                                                               : "The request could not be completed: " + message;
        resp.error = message;
        resp.trace_ref = session_id;
        events.append(EventKind::error, {{"iteration", state.iteration}, {"message", message}}, clock.now());
        return resp;
    };

    if (instruction.out_of_scope_only()) {
        Thoughts t;
        t.text = "Request classified as out of scope; declining without tool use.";
        t.ready_to_respond = true;
        t.draft_response = instruction.language == text::Language::zh
                               ? "抱歉，这个问题超出了口腔医学助手的服务范围。"
                               : "Sorry, this request is outside what a dental assistant can help with.";
        events.append(EventKind::thought, {{"iteration", state.iteration}, {"thoughts", t.to_json()}}, clock.now());
        try {
            record(t, {}, {}, {});
        } catch (const std::exception& e) {
            return fail(e.what());
        }
        return respond(*t.draft_response);
    }

    int completed = 0;
    while (true) {
        if (steady::now() >= deadline) return time_out(true);
        if (completed >= config.max_iterations) return time_out(false);

        std::vector<rag::KnowledgeItem> knowledge;
        if (deps_.kb && config.rag_mode != RagMode::as_tool) {
            try {
                knowledge = deps_.kb->query_knowledge(instruction.query, config.k_default, instruction.language);
            } catch (const std::exception&) {
                knowledge.clear();
            }
            for (const auto& k : knowledge) state.pending_observations.push_back(serialize_knowledge(k));
            if (!knowledge.empty()) {
                json items = json::array();
                for (const auto& k : knowledge) items.push_back(k.to_json());
                events.append(EventKind::knowledge, {{"iteration", state.iteration}, {"items", items}}, clock.now());
            }
        }

        Thoughts thoughts;
        try {
            thoughts = reason(state, config, deadline);
        } catch (const GatewayError& e) {
            if (e.kind() == GatewayError::Kind::timeout && steady::now() >= deadline) return time_out(true);
            return fail(e.what());
        } catch (const std::exception& e) {
            return fail(e.what());
        }
        events.append(EventKind::thought, {{"iteration", state.iteration}, {"thoughts", thoughts.to_json()}},
                      clock.now());

        const Decision decision = decide(thoughts);
        try {
            if (decision.kind == Decision::Kind::request_user_input) {
                record(thoughts, {}, {}, knowledge);
                FinalResponse resp;
                resp.text = decision.text;
                resp.awaiting_user = true;
                resp.trace_ref = session_id;
                resp.citations = run_citations(session_id, state.first_iteration);
                events.append(EventKind::user_prompt, {{"iteration", state.iteration}, {"prompt", decision.text}},
                              clock.now());
                return resp;
            }
            if (decision.kind == Decision::Kind::respond) {
                record(thoughts, {}, {}, knowledge);
                return respond(decision.text);
            }
        } catch (const std::exception& e) {
            return fail(e.what());
        }

        // act
        const std::size_t n = decision.actions.size();
        std::vector<tools::ToolCall> calls(n);
        std::vector<std::optional<tools::ToolResult>> early(n);
        std::vector<tools::ToolCall> runnable;
        std::vector<std::size_t> runnable_at;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& a = decision.actions[i];
            const std::string id = "call-" + std::to_string(state.iteration) + "-" + std::to_string(i + 1);
            auto reject = [&](tools::ToolStatus status, const std::string& why) {
                calls[i] = tools::ToolCall{id, clock.now(), a.tool_name, a.raw_args};
                tools::ToolResult r;
                r.call_id = id;
                r.tool_name = a.tool_name;
                r.status = status;
                r.error = why;
                early[i] = std::move(r);
            };
            try {
                calls[i] = deps_.registry->format_call(a.tool_name, a.raw_args, id);
                runnable.push_back(calls[i]);
                runnable_at.push_back(i);
            } catch (const NotFoundError& e) {
                reject(tools::ToolStatus::tool_error, e.what());
            } catch (const SchemaError& e) {
                reject(tools::ToolStatus::schema_violation, e.what());
            } catch (const ValidationError& e) {
                reject(tools::ToolStatus::schema_violation, e.what());
            }
        }
        for (const auto& c : calls)
            events.append(EventKind::tool_call, {{"iteration", state.iteration}, {"call", c.to_json()}}, clock.now());

        std::vector<tools::ToolResult> executed = deps_.registry->execute_parallel(runnable, deps_.artifacts);
        std::vector<tools::ToolResult> results(n);
        for (std::size_t i = 0; i < n; ++i)
            if (early[i]) results[i] = std::move(*early[i]);
        for (std::size_t j = 0; j < executed.size(); ++j) results[runnable_at[j]] = std::move(executed[j]);
        for (const auto& r : results)
            events.append(EventKind::tool_result, {{"iteration", state.iteration}, {"result", r.to_json()}},
                          clock.now());

        std::vector<rag::KnowledgeItem> tool_knowledge;
        for (const auto& r : results) {
            if (r.tool_name != rag::KnowledgeBase::kToolName || r.status != tools::ToolStatus::ok) continue;
            for (const auto& item : r.payload.value("items", json::array())) {
                try {
                    tool_knowledge.push_back(rag::KnowledgeItem::from_json(item));
                } catch (const std::exception&) {
                }
            }
        }
        if (!tool_knowledge.empty()) {
            json items = json::array();
            for (const auto& k : tool_knowledge) items.push_back(k.to_json());
            events.append(EventKind::knowledge, {{"iteration", state.iteration}, {"items", items}}, clock.now());
        }
        knowledge.insert(knowledge.end(), tool_knowledge.begin(), tool_knowledge.end());

        try {
            record(thoughts, calls, results, knowledge);
        } catch (const std::exception& e) {
            return fail(e.what());
        }
        state = observe(state, results, {});
        ++completed;
    }
}

}  // namespace dentra
