// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dentra/clock.hpp"
#include "dentra/comprehension.hpp"
#include "dentra/json.hpp"
#include "dentra/rag.hpp"
#include "dentra/tools.hpp"

namespace dentra {

struct ProposedAction {
    std::string tool_name;
    json raw_args = json::object();
    friend bool operator==(const ProposedAction&, const ProposedAction&) = default;
};

struct Thoughts {
    std::string text;
    std::vector<ProposedAction> proposed_actions;
    bool needs_user_input = false;
    bool ready_to_respond = false;
    std::optional<std::string> draft_response;

    std::vector<std::string> violations() const;
    json to_json() const;
    static Thoughts from_json(const json& j);
    friend bool operator==(const Thoughts&, const Thoughts&) = default;
};

struct MemoryRecord {
    int iteration = 0;
    Thoughts thoughts;
    std::vector<tools::ToolCall> calls;
    std::vector<tools::ToolResult> results;
    std::vector<rag::KnowledgeItem> knowledge;
    TimePoint at{};

    std::vector<std::string> violations() const;
    json to_json() const;
    static MemoryRecord from_json(const json& j);
    friend bool operator==(const MemoryRecord&, const MemoryRecord&) = default;
};

struct SessionMemory {
    std::string session_id;
    std::vector<MemoryRecord> records;
    std::vector<StructuredInstruction> user_turns;

    // First violated invariant, if any.
    std::optional<std::string> first_violation() const;
    json to_json() const;
    static SessionMemory from_json(const json& j);
    friend bool operator==(const SessionMemory&, const SessionMemory&) = default;
};

// Field lines used by the context window; the first line is the record header.
std::vector<std::string> render_record(const MemoryRecord& record);
std::string render_user_turn(const StructuredInstruction& turn);

// Escapes a session id into [A-Za-z0-9_-] one-to-one; used for file names.
std::string sanitize_session_id(const std::string& id);

// Per-session append-only memory. With a persist directory every append is
// written to <dir>/<session>.json (write to temp, fsync, rename) before it
// returns, and sessions missing from memory are reloaded from there.
class MemoryStore {
public:
    explicit MemoryStore(std::optional<std::filesystem::path> persist_dir = std::nullopt);

    // Returns the new record count. Throws ConflictError on a duplicate
    // iteration and ValidationError on a malformed record.
    std::size_t append(const std::string& session_id, MemoryRecord record);
    void add_user_turn(const std::string& session_id, StructuredInstruction turn);

    SessionMemory snapshot(const std::string& session_id) const;
    bool contains(const std::string& session_id) const;
    // One past the highest stored iteration (1 for a new session).
    int next_iteration(const std::string& session_id) const;

    // Current user turn first, then records newest-first while they fit; the
    // oldest included record may be cut at a field boundary. Rendered in
    // iteration order. Output never exceeds `token_budget` counted tokens.
    std::string context_window(const std::string& session_id, std::size_t token_budget) const;

    void save(const std::string& session_id, const std::filesystem::path& path) const;
    // Throws CorruptFileError naming the first violated invariant.
    static SessionMemory load(const std::filesystem::path& path);
    // Installs a loaded session, replacing any in-memory copy.
    void restore(SessionMemory memory);

private:
    SessionMemory& entry(const std::string& session_id) const;  // mu_ held
    void persist(const SessionMemory& memory) const;            // mu_ held

    std::optional<std::filesystem::path> dir_;
    mutable std::mutex mu_;
    mutable std::map<std::string, SessionMemory> sessions_;
};

}  // namespace dentra
