// SPDX-License-Identifier: Apache-2.0
#include "dentra/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <regex>
#include <thread>

#include "dentra/error.hpp"
#include "dentra/text.hpp"

namespace dentra::eval {

void MCQItem::validate() const {
    std::vector<std::string> bad;
    if (item_id.empty()) bad.push_back("item_id: must be non-empty");
    if (category.empty()) bad.push_back("category: must be non-empty");
    if (text::trim(stem).empty()) bad.push_back("stem: must be non-empty");
    if (options.empty()) bad.push_back("options: must be non-empty");
    for (const auto& [letter, _] : options)
        if (letter.size() != 1 || !std::isupper(static_cast<unsigned char>(letter[0])))
            bad.push_back("options: key \"" + letter + "\" is not a capital letter");
    if (gold.empty()) bad.push_back("gold: must be non-empty");
    for (const auto& g : gold)
        if (!options.count(g)) bad.push_back("gold: \"" + g + "\" is not an option");
    if (!bad.empty()) {
        for (auto& b : bad) b = item_id + ": " + b;
        throw ValidationError(std::move(bad));
    }
}

json MCQItem::to_json() const {
    return {{"item_id", item_id}, {"category", category}, {"stem", stem}, {"options", options}, {"gold", gold}};
}

MCQItem MCQItem::from_json(const json& j) {
    MCQItem m;
    m.item_id = j.value("item_id", std::string{});
    try {
        m.category = j.at("category").get<std::string>();
        m.stem = j.at("stem").get<std::string>();
        m.options = j.at("options").get<std::map<std::string, std::string>>();
        const auto& g = j.at("gold");
        if (g.is_string()) {
            for (char c : g.get<std::string>())
                if (!std::isspace(static_cast<unsigned char>(c)) && c != ',') m.gold.insert(std::string(1, c));
        } else {
            m.gold = g.get<std::set<std::string>>();
        }
    } catch (const json::exception& e) {
        throw ValidationError(m.item_id.empty() ? "item" : m.item_id, e.what());
    }
    m.validate();
    return m;
}

std::vector<MCQItem> load_benchmark(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("no benchmark file " + path.string());
    std::vector<MCQItem> items;
    std::set<std::string> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw ValidationError("line " + std::to_string(lineno), "not a JSON object");
        try {
            items.push_back(MCQItem::from_json(j));
        } catch (const ValidationError& e) {
            throw ValidationError("line " + std::to_string(lineno), e.what());
        }
        if (!ids.insert(items.back().item_id).second)
            throw ValidationError("line " + std::to_string(lineno), "duplicate item_id " + items.back().item_id);
    }
    return items;
}

bool score_item(const std::set<std::string>& predicted, const std::set<std::string>& gold) {
    return predicted == gold;
}

std::string question_prompt(const MCQItem& item) {
    std::string p = "Multiple-choice question (" + item.category + "). One or more options may be correct.\n\n";
    p += item.stem + "\n";
    for (const auto& [letter, t] : item.options) p += letter + ". " + t + "\n";
    p += "\nEnd your reply with a line of the form \"Answer: <letters>\", for example \"Answer: AC\".";
    return p;
}

std::string repair_prompt(const MCQItem& item) {
    std::string letters;
    for (const auto& [letter, _] : item.options) letters += letter;
    return "Your reply did not end with a usable answer line. Reply with exactly one line "
           "\"Answer: <letters>\" using only the option letters " + letters + ".";
}

std::optional<std::set<std::string>> extract_answer(std::string_view response, const MCQItem& item) {
    static const std::regex kLine("(?:answer|答案)\\s*(?::|：)\\s*([^\\n]*)", std::regex::icase);
    const std::string s(response);
    std::optional<std::string> last;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), kLine); it != std::sregex_iterator(); ++it)
        last = (*it)[1].str();
    if (!last) return std::nullopt;

    std::string rest = *last;
    for (const char* sep : {"、", "，", "和", "及"}) {
        for (auto pos = rest.find(sep); pos != std::string::npos; pos = rest.find(sep)) rest.replace(pos, std::strlen(sep), " ");
    }
    std::set<std::string> letters;
    std::string word;
    auto take = [&]() -> bool {
        if (word.empty()) return true;
        const std::string w = word;
        word.clear();
        if (w == "and" || w == "AND") return true;
        for (char c : w)
            if (!std::isupper(static_cast<unsigned char>(c))) return false;
        for (char c : w) letters.insert(std::string(1, c));
        return true;
    };
    for (char c : rest) {
        if (std::isalpha(static_cast<unsigned char>(c))) {
            word.push_back(c);
        } else if (std::isspace(static_cast<unsigned char>(c)) || c == ',' || c == '/' || c == '&' || c == ';') {
            if (!take()) return std::nullopt;
        } else if (c == '.' || c == '*' || c == '`' || c == '"' || c == '\'' || c == '(' || c == ')' || c == '[' ||
                   c == ']') {
            if (!take()) return std::nullopt;
        } else {
            return std::nullopt;
        }
    }
    if (!take()) return std::nullopt;
    if (letters.empty()) return std::nullopt;
    for (const auto& l : letters)
        if (!item.options.count(l)) return std::nullopt;
    return letters;
}

// ---------------------------------------------------------------------------
// subjects

BareChatSubject::BareChatSubject(std::shared_ptr<gateway::ChatModel> model, std::string name)
    : model_(std::move(model)), name_(std::move(name)) {
    if (!model_) throw ValidationError("model", "required");
}

SubjectTurn BareChatSubject::ask(const std::string& key, const std::string& prompt) {
    std::vector<gateway::ChatMessage> messages;
    {
        std::lock_guard lock(mu_);
        auto& h = history_[key];
        h.push_back({"user", prompt, {}});
        messages = h;
    }
    SubjectTurn turn;
    try {
        turn.text = model_->chat(messages).text;
    } catch (const GatewayError& e) {
        turn.text.clear();
        turn.trace.push_back({{"error", e.what()}});
    }
    std::lock_guard lock(mu_);
    history_[key].push_back({"assistant", turn.text, {}});
    return turn;
}

AgentSubject::AgentSubject(const Agent& agent, SessionConfig config, std::shared_ptr<const Clock> clock,
                           std::string name)
    : agent_(agent), config_(std::move(config)), clock_(std::move(clock)), name_(std::move(name)) {
    if (!clock_) clock_ = system_clock();
}

SubjectTurn AgentSubject::ask(const std::string& key, const std::string& prompt) {
    std::shared_ptr<EventLog> log;
    {
        std::lock_guard lock(mu_);
        auto& slot = logs_[key];
        if (!slot) slot = std::make_shared<EventLog>();
        log = slot;
    }
    const std::uint64_t before = log->last_seq();
    const StructuredInstruction instruction = build_structured_instruction(prompt, {}, {Intent::education}, *clock_);
    const FinalResponse resp = agent_.run_session("eval-" + key, instruction, config_, *log);

    SubjectTurn turn;
    turn.text = resp.text;
    for (const auto& e : log->after(before)) {
        if (e.kind == EventKind::tool_call) turn.tool_names.push_back(e.payload["call"].value("tool_name", ""));
        turn.trace.push_back(e.to_json());
    }
    return turn;
}

// ---------------------------------------------------------------------------
// running

namespace {

ItemOutcome evaluate(Subject& subject, const MCQItem& item) {
    ItemOutcome o;
    o.item_id = item.item_id;
    o.category = item.category;
    o.gold = item.gold;
    auto turn = [&](const std::string& prompt) {
        SubjectTurn t = subject.ask(item.item_id, prompt);
        o.prompts.push_back(prompt);
        o.responses.push_back(t.text);
        o.tool_names.insert(o.tool_names.end(), t.tool_names.begin(), t.tool_names.end());
        for (auto& e : t.trace) o.trace.push_back(std::move(e));
        return t.text;
    };
    auto letters = extract_answer(turn(question_prompt(item)), item);
    if (!letters) {
        o.repaired = true;
        letters = extract_answer(turn(repair_prompt(item)), item);
    }
    if (letters) {
        o.predicted = *letters;
    } else {
        o.flagged = true;
    }
    o.correct = letters && score_item(*letters, item.gold);
    return o;
}

}  // namespace

EvalReport run_eval(Subject& subject, const std::vector<MCQItem>& items, const EvalOptions& options) {
    EvalReport report;
    report.subject = subject.name();
    report.items.resize(items.size());

    const std::size_t workers = std::max<std::size_t>(1, std::min(options.parallelism, items.size()));
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < items.size(); i = next++) report.items[i] = evaluate(subject, items[i]);
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    for (const auto& o : report.items) {
        auto& s = report.per_category[o.category];
        ++s.total;
        ++report.overall.total;
        if (o.correct) {
            ++s.correct;
            ++report.overall.correct;
        }
    }
    return report;
}

json EvalReport::to_json(bool with_traces) const {
    auto score = [](const Score& s) {
        return json{{"correct", s.correct}, {"total", s.total}, {"accuracy", s.accuracy()}};
    };
    json cats = json::object();
    for (const auto& [c, s] : per_category) cats[c] = score(s);
    json jitems = json::array();
    for (const auto& o : items) {
        json ji = {{"item_id", o.item_id},
                   {"category", o.category},
                   {"predicted", o.predicted},
                   {"gold", o.gold},
                   {"correct", o.correct},
                   {"repaired", o.repaired},
                   {"flagged", o.flagged},
                   {"prompts", o.prompts},
                   {"responses", o.responses},
                   {"tool_calls", o.tool_names}};
        if (with_traces) ji["trace"] = o.trace;
        jitems.push_back(std::move(ji));
    }
    return {{"subject", subject}, {"per_category", cats}, {"overall", score(overall)}, {"items", jitems}};
}

std::string render_table(const std::vector<EvalReport>& reports) {
    std::set<std::string> categories;
    for (const auto& r : reports)
        for (const auto& [c, _] : r.per_category) categories.insert(c);
    std::size_t name_width = 5;
    for (const auto& r : reports) name_width = std::max(name_width, r.subject.size());

    auto cell = [](const std::string& s, std::size_t w) {
        return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
    };
    std::string out = "Model" + std::string(name_width - 5, ' ');
    for (const auto& c : categories) out += " | " + cell(c, std::max<std::size_t>(c.size(), 6));
    out += " | Overall\n";
    out += std::string(out.size() - 1, '-') + "\n";
    for (const auto& r : reports) {
        out += r.subject + std::string(name_width - r.subject.size(), ' ');
        for (const auto& c : categories) {
            auto it = r.per_category.find(c);
            char buf[32];
            if (it == r.per_category.end()) std::snprintf(buf, sizeof buf, "-");
            else std::snprintf(buf, sizeof buf, "%.2f", 100.0 * it->second.accuracy());
            out += " | " + cell(buf, std::max<std::size_t>(c.size(), 6));
        }
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", 100.0 * r.overall.accuracy());
        out += " | " + cell(buf, 7) + "\n";
    }
    return out;
}

json ToolUsageStats::to_json() const {
    json j = {{"per_tool_counts", per_tool_counts}, {"cases", cases}};
    j["mean_calls_per_case"] = mean_calls_per_case ? json(*mean_calls_per_case) : json(nullptr);
    return j;
}

ToolUsageStats tool_usage_stats(const std::vector<std::vector<std::string>>& traces) {
    ToolUsageStats s;
    s.cases = traces.size();
    std::size_t total = 0;
    for (const auto& t : traces) {
        for (const auto& name : t) ++s.per_tool_counts[name];
        total += t.size();
    }
    if (s.cases > 0) s.mean_calls_per_case = static_cast<double>(total) / static_cast<double>(s.cases);
    return s;
}

ToolUsageStats tool_usage_stats(const EvalReport& report) {
    std::vector<std::vector<std::string>> traces;
    for (const auto& o : report.items) traces.push_back(o.tool_names);
    return tool_usage_stats(traces);
}

}  // namespace dentra::eval
