// SPDX-License-Identifier: Apache-2.0
#include "dentra/memory.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "dentra/error.hpp"
#include "dentra/text.hpp"

namespace dentra {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// value types

std::vector<std::string> Thoughts::violations() const {
    std::vector<std::string> bad;
    if (needs_user_input && ready_to_respond)
        bad.push_back("thoughts: needs_user_input and ready_to_respond are exclusive");
    if (ready_to_respond && !proposed_actions.empty())
        bad.push_back("thoughts: proposed_actions must be empty when ready_to_respond");
    return bad;
}

json Thoughts::to_json() const {
    json actions = json::array();
    for (const auto& a : proposed_actions) actions.push_back({{"tool_name", a.tool_name}, {"args", a.raw_args}});
    json j = {{"text", text},
              {"proposed_actions", actions},
              {"needs_user_input", needs_user_input},
              {"ready_to_respond", ready_to_respond}};
    j["draft_response"] = draft_response ? json(*draft_response) : json(nullptr);
    return j;
}

Thoughts Thoughts::from_json(const json& j) {
    Thoughts t;
    t.text = j.value("text", std::string{});
    for (const auto& a : j.value("proposed_actions", json::array()))
        t.proposed_actions.push_back({a.at("tool_name").get<std::string>(), a.value("args", json::object())});
    t.needs_user_input = j.value("needs_user_input", false);
    t.ready_to_respond = j.value("ready_to_respond", false);
    if (j.contains("draft_response") && j["draft_response"].is_string())
        t.draft_response = j["draft_response"].get<std::string>();
    return t;
}

std::vector<std::string> MemoryRecord::violations() const {
    std::vector<std::string> bad = thoughts.violations();
    if (iteration < 1) bad.push_back("iteration: must be >= 1");
    if (calls.size() != results.size()) {
        bad.push_back("calls/results: " + std::to_string(calls.size()) + " calls but " +
                      std::to_string(results.size()) + " results");
    } else {
        std::set<std::string> ids;
        for (const auto& c : calls)
            if (!ids.insert(c.call_id).second) bad.push_back("calls: duplicate call_id " + c.call_id);
        for (const auto& r : results)
            if (!ids.count(r.call_id)) bad.push_back("results: call_id " + r.call_id + " has no matching call");
    }
    return bad;
}

json MemoryRecord::to_json() const {
    json jc = json::array(), jr = json::array(), jk = json::array();
    for (const auto& c : calls) jc.push_back(c.to_json());
    for (const auto& r : results) jr.push_back(r.to_json());
    for (const auto& k : knowledge) jk.push_back(k.to_json());
    return {{"iteration", iteration},
            {"thoughts", thoughts.to_json()},
            {"calls", jc},
            {"results", jr},
            {"knowledge", jk},
            {"at", format_timestamp(at)}};
}

MemoryRecord MemoryRecord::from_json(const json& j) {
    MemoryRecord r;
    r.iteration = j.at("iteration").get<int>();
    r.thoughts = Thoughts::from_json(j.at("thoughts"));
    for (const auto& c : j.at("calls")) r.calls.push_back(tools::ToolCall::from_json(c));
    for (const auto& x : j.at("results")) r.results.push_back(tools::ToolResult::from_json(x));
    for (const auto& k : j.at("knowledge")) r.knowledge.push_back(rag::KnowledgeItem::from_json(k));
    r.at = parse_timestamp(j.at("at").get<std::string>());
    return r;
}

std::optional<std::string> SessionMemory::first_violation() const {
    if (session_id.empty()) return "session_id: must be non-empty";
    std::optional<int> last;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (auto bad = r.violations(); !bad.empty()) return "records/" + std::to_string(i) + ": " + bad.front();
        if (last && r.iteration <= *last)
            return "records/" + std::to_string(i) + ": iteration " + std::to_string(r.iteration) +
                   " not after " + std::to_string(*last);
        last = r.iteration;
    }
    for (std::size_t i = 0; i < user_turns.size(); ++i) {
        if (auto bad = user_turns[i].violations(); !bad.empty())
            return "user_turns/" + std::to_string(i) + ": " + bad.front();
    }
    return std::nullopt;
}

json SessionMemory::to_json() const {
    json jr = json::array(), ju = json::array();
    for (const auto& r : records) jr.push_back(r.to_json());
    for (const auto& u : user_turns) ju.push_back(u.to_json(true));
    return {{"version", 1}, {"session_id", session_id}, {"records", jr}, {"user_turns", ju}};
}

SessionMemory SessionMemory::from_json(const json& j) {
    SessionMemory m;
    m.session_id = j.at("session_id").get<std::string>();
    for (const auto& r : j.at("records")) m.records.push_back(MemoryRecord::from_json(r));
    for (const auto& u : j.value("user_turns", json::array()))
        m.user_turns.push_back(StructuredInstruction::from_json(u));
    return m;
}

// ---------------------------------------------------------------------------
// rendering

namespace {

std::string one_line(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) out.push_back(c == '\n' || c == '\r' ? ' ' : c);
    return text::trim(out);
}

std::size_t line_tokens(const std::vector<std::string>& lines) {
    std::size_t n = 0;
    for (const auto& l : lines) n += text::count_tokens(l);
    return n;
}

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    for (const auto& l : lines) {
        if (!out.empty()) out += '\n';
        out += l;
    }
    return out;
}

}  // namespace

std::vector<std::string> render_record(const MemoryRecord& record) {
    std::vector<std::string> lines;
    lines.push_back("[iteration " + std::to_string(record.iteration) + "]");
    if (!record.thoughts.text.empty()) lines.push_back("thought: " + one_line(record.thoughts.text));
    if (record.thoughts.draft_response) lines.push_back("draft: " + one_line(*record.thoughts.draft_response));
    for (const auto& c : record.calls)
        lines.push_back("call " + c.call_id + " " + c.tool_name + " " + c.args.dump());
    for (const auto& r : record.results) {
        std::string line = "result " + r.call_id + " " + std::string(tools::to_string(r.status)) + " ";
        line += r.status == tools::ToolStatus::ok ? r.payload.dump() : one_line(r.error);
        lines.push_back(std::move(line));
    }
    for (const auto& k : record.knowledge) {
        const auto p = k.provenance();
        lines.push_back("knowledge [" + p.book_title + " p." + std::to_string(p.page) + "] " +
                        one_line(k.chunk.text()));
    }
    return lines;
}

std::string render_user_turn(const StructuredInstruction& turn) {
    std::string s = "user: " + one_line(turn.query);
    for (const auto& img : turn.images)
        s += " [image " + img.image_id + ": " + std::string(to_string(img.modality.value)) + "]";
    return s;
}

std::string sanitize_session_id(const std::string& id) {
    // '_' is the escape character, so distinct ids never share a file name
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-';
        if (ok) {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back('_');
            out.push_back(hex[c >> 4]);
            out.push_back(hex[c & 0xf]);
        }
    }
    return out.empty() ? "_" : out;
}

// ---------------------------------------------------------------------------
// store

MemoryStore::MemoryStore(std::optional<fs::path> persist_dir) : dir_(std::move(persist_dir)) {
    if (dir_) fs::create_directories(*dir_);
}

SessionMemory& MemoryStore::entry(const std::string& session_id) const {
    if (session_id.empty()) throw ValidationError("session_id", "must be non-empty");
    auto it = sessions_.find(session_id);
    if (it != sessions_.end()) return it->second;
    SessionMemory m;
    m.session_id = session_id;
    if (dir_) {
        const fs::path file = *dir_ / (sanitize_session_id(session_id) + ".json");
        if (fs::exists(file)) {
            m = load(file);
            if (m.session_id != session_id)
                throw CorruptFileError(file.string() + ": holds session " + m.session_id);
        }
    }
    return sessions_.emplace(session_id, std::move(m)).first->second;
}

void MemoryStore::persist(const SessionMemory& memory) const {
    if (!dir_) return;
    const fs::path file = *dir_ / (sanitize_session_id(memory.session_id) + ".json");
    const fs::path tmp = file.string() + ".tmp";
    const std::string body = memory.to_json().dump();
    int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd < 0) throw Error("cannot open " + tmp.string() + ": " + std::strerror(errno));
    std::size_t off = 0;
    while (off < body.size()) {
        ssize_t n = ::write(fd, body.data() + off, body.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            ::close(fd);
            throw Error("cannot write " + tmp.string() + ": " + std::strerror(errno));
        }
        off += static_cast<std::size_t>(n);
    }
    ::fsync(fd);
    ::close(fd);
    fs::rename(tmp, file);
    if (int dfd = ::open(dir_->c_str(), O_RDONLY | O_DIRECTORY); dfd >= 0) {
        ::fsync(dfd);
        ::close(dfd);
    }
}

std::size_t MemoryStore::append(const std::string& session_id, MemoryRecord record) {
    if (auto bad = record.violations(); !bad.empty()) throw ValidationError(std::move(bad));
    std::lock_guard lock(mu_);
    SessionMemory& m = entry(session_id);
    for (const auto& r : m.records)
        if (r.iteration == record.iteration)
            throw ConflictError("iteration " + std::to_string(record.iteration) + " already recorded");
    if (!m.records.empty() && record.iteration < m.records.back().iteration)
        throw ValidationError("iteration", "must increase within a session");
    SessionMemory next = m;
    next.records.push_back(std::move(record));
    persist(next);
    m = std::move(next);
    return m.records.size();
}

void MemoryStore::add_user_turn(const std::string& session_id, StructuredInstruction turn) {
    std::lock_guard lock(mu_);
    SessionMemory& m = entry(session_id);
    SessionMemory next = m;
    next.user_turns.push_back(std::move(turn));
    persist(next);
    m = std::move(next);
}

SessionMemory MemoryStore::snapshot(const std::string& session_id) const {
    std::lock_guard lock(mu_);
    return entry(session_id);
}

bool MemoryStore::contains(const std::string& session_id) const {
    std::lock_guard lock(mu_);
    if (sessions_.count(session_id)) return true;
    return dir_ && fs::exists(*dir_ / (sanitize_session_id(session_id) + ".json"));
}

int MemoryStore::next_iteration(const std::string& session_id) const {
    std::lock_guard lock(mu_);
    const SessionMemory& m = entry(session_id);
    return m.records.empty() ? 1 : m.records.back().iteration + 1;
}

std::string MemoryStore::context_window(const std::string& session_id, std::size_t token_budget) const {
    if (token_budget == 0) throw ValidationError("token_budget", "must be > 0");
    const SessionMemory m = snapshot(session_id);

    std::string user;
    std::size_t used = 0;
    if (!m.user_turns.empty()) {
        user = render_user_turn(m.user_turns.back());
        used = text::count_tokens(user);
        if (used >= token_budget) return text::trim(text::truncate_tokens(user, token_budget));
    }

    std::vector<std::vector<std::string>> picked;  // newest first
    for (auto it = m.records.rbegin(); it != m.records.rend(); ++it) {
        auto lines = render_record(*it);
        const std::size_t need = line_tokens(lines);
        if (used + need <= token_budget) {
            used += need;
            picked.push_back(std::move(lines));
            continue;
        }
        std::vector<std::string> partial;
        std::size_t partial_tokens = 0;
        for (const auto& l : lines) {
            const std::size_t t = text::count_tokens(l);
            if (used + partial_tokens + t > token_budget) break;
            partial.push_back(l);
            partial_tokens += t;
        }
        if (partial.size() > 1) picked.push_back(std::move(partial));
        break;
    }

    std::vector<std::string> out;
    if (!user.empty()) out.push_back(std::move(user));
    for (auto it = picked.rbegin(); it != picked.rend(); ++it)
        out.insert(out.end(), it->begin(), it->end());
    return join_lines(out);
}

void MemoryStore::save(const std::string& session_id, const fs::path& path) const {
    const SessionMemory m = snapshot(session_id);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    out << m.to_json().dump();
    if (!out) throw Error("cannot write " + path.string());
}

SessionMemory MemoryStore::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("no session file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    json j = json::parse(ss.str(), nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw CorruptFileError(path.string() + ": not a complete JSON document");
    SessionMemory m;
    try {
        m = SessionMemory::from_json(j);
    } catch (const std::exception& e) {
        throw CorruptFileError(path.string() + ": " + e.what());
    }
    if (auto bad = m.first_violation()) throw CorruptFileError(path.string() + ": " + *bad);
    return m;
}

void MemoryStore::restore(SessionMemory memory) {
    if (auto bad = memory.first_violation()) throw ValidationError("memory", *bad);
    std::lock_guard lock(mu_);
    persist(memory);
    sessions_[memory.session_id] = std::move(memory);
}

}  // namespace dentra
