// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
// Everything runs against the in-repo mock gateway, mock tool server and
// in-process stand-ins; nothing leaves the loopback interface.
#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "dentra/crypto.hpp"
#include "dentra/error.hpp"
#include "dentra/eval.hpp"
#include "dentra/mock_tools.hpp"
#include "dentra/service.hpp"
#include "support.hpp"

using namespace dentra;
using namespace std::chrono_literals;
using steady = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

// Every KnowledgeItem any criterion produces is checked for provenance.
struct ProvenanceLedger {
    std::size_t seen = 0;
    std::size_t complete = 0;
    void add(const rag::KnowledgeItem& k) {
        ++seen;
        complete += !k.chunk.book_title().empty() && k.chunk.page() >= 1;
    }
    void add(const std::vector<rag::KnowledgeItem>& items) {
        for (const auto& k : items) add(k);
    }
    void add_events(const std::vector<AgentEvent>& events) {
        for (const auto& e : events) {
            if (e.kind != EventKind::knowledge) continue;
            for (const auto& j : e.payload["items"]) add(rag::KnowledgeItem::from_json(j));
        }
    }
    void add_memory(const SessionMemory& m) {
        for (const auto& r : m.records) add(r.knowledge);
    }
};

ProvenanceLedger g_provenance;

double seconds_since(steady::time_point t0) {
    return std::chrono::duration<double>(steady::now() - t0).count();
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

tools::ToolDescriptor http_tool(const std::string& name, const std::string& endpoint, tools::Millis timeout) {
    tools::ToolDescriptor d;
    d.name = name;
    d.modalities = {Modality::panoramic_radiograph};
    d.task = tools::Task::detection;
    d.description = name;
    d.arg_schema = {{"type", "object"},
                    {"properties", {{"image_id", {{"type", "string"}, {"minLength", 1}}}}},
                    {"required", {"image_id"}}};
    d.output_schema = {{"type", "object"}, {"required", {"detections"}}};
    d.endpoint = endpoint;
    d.timeout = timeout;
    return d;
}

StructuredInstruction panoramic_instruction(const std::string& q) {
    FixedClock c(testkit::fixed_time());
    return build_structured_instruction(q, {{"img-1", "ref", {Modality::panoramic_radiograph, 0.95, false}}},
                                        {Intent::anomaly_diagnosis}, c);
}

// ---------------------------------------------------------------------------

Outcome loop_conformance() {
    mock::MockScript script;
    mock::MockEntry first;
    first.role = gateway::Role::chat;
    first.ordinal = 1;
    first.body = mock::chat_tool_calls_body(
        {{"tooth_numbering", {{"image_id", "img-1"}}}, {"periapical_lesion_detector", {{"image_id", "img-1"}}}});
    mock::MockEntry second = first;
    second.ordinal = 2;
    second.body = mock::chat_text_body("Tooth 36 shows a periapical lesion.");
    script.entries = {first, second};
    mock::MockGatewayServer gw(script);
    gw.start();

    mock::MockToolServer tools_server;
    tools_server.add_tool("tooth_numbering", tools::Task::detection, mock::ToolBehavior::with(mock::ToolBehavior::Mode::ok, {{"detections", json::array()}}));
    tools_server.add_tool("periapical_lesion_detector", tools::Task::detection,
                          mock::ToolBehavior::with(mock::ToolBehavior::Mode::ok, {{"detections", json::array()}}));
    tools_server.start();

    auto clock = std::make_shared<FixedClock>(testkit::fixed_time());
    tools::ToolRegistry registry(clock);
    for (const char* n : {"tooth_numbering", "periapical_lesion_detector"})
        registry.register_tool(http_tool(n, tools_server.endpoint_for(n), 5000ms));
    MemoryStore memory;
    Agent agent({std::make_shared<gateway::HttpChatModel>(gw.endpoint(gateway::Role::chat)), &registry, nullptr,
                 &memory, nullptr, clock});
    EventLog log;
    const auto t0 = steady::now();
    auto resp = agent.run_session("conformance", panoramic_instruction("Any lesions on this panoramic film?"),
                                  SessionConfig{}, log);
    const double elapsed = seconds_since(t0);

    std::vector<EventKind> got;
    for (const auto& e : log.after(0)) got.push_back(e.kind);
    const std::vector<EventKind> want = {EventKind::instruction, EventKind::thought,     EventKind::tool_call,
                                         EventKind::tool_call,   EventKind::tool_result, EventKind::tool_result,
                                         EventKind::thought,     EventKind::response};
    std::string seq;
    for (auto k : got) seq += (seq.empty() ? "" : ">") + std::string(to_string(k));
    const std::size_t records = memory.snapshot("conformance").records.size();
    const bool pass = got == want && records == 2 && elapsed <= 5.0 && !resp.timed_out;
    return {pass, seq + " records=" + std::to_string(records) + " t=" + fmt("%.3fs", elapsed)};
}

Outcome time_budget() {
    mock::MockScript script;
    mock::MockEntry hang;
    hang.role = gateway::Role::chat;
    hang.body = mock::chat_text_body("never seen");
    hang.delay = 120s;
    script.entries = {hang};
    mock::MockGatewayServer gw(script);
    gw.start();

    auto clock = std::make_shared<FixedClock>(testkit::fixed_time());
    tools::ToolRegistry registry(clock);
    MemoryStore memory;
    const auto gateway_timeout = 3s;
    Agent agent({std::make_shared<gateway::HttpChatModel>(gw.endpoint(gateway::Role::chat, "mock", gateway_timeout)),
                 &registry, nullptr, &memory, nullptr, clock});
    SessionConfig cfg;
    cfg.t_max = std::chrono::duration<double>(1.0);
    EventLog log;
    const auto t0 = steady::now();
    auto resp = agent.run_session("budget", panoramic_instruction("Describe this film."), cfg, log);
    const double elapsed = seconds_since(t0);
    const bool pass = resp.timed_out && elapsed <= 4.0 && log.after(0).back().kind == EventKind::timeout;
    gw.stop();
    return {pass, "timed_out=" + std::string(resp.timed_out ? "true" : "false") + " t=" + fmt("%.3fs", elapsed) +
                      " (limit 4s)"};
}

Outcome retrieval_oracle() {
    const auto t0 = steady::now();
    std::mt19937_64 rng(20250101);
    std::size_t mismatches = 0;
    std::size_t count_errors = 0;
    std::size_t queries = 0;
    std::size_t k7_checks = 0;
    for (int corpus = 0; corpus < 50; ++corpus) {
        const std::size_t dim = 16 + rng() % 48;
        auto embedder = std::make_shared<mock::HashEmbedder>(dim, rng());
        const std::size_t n = 1 + rng() % 1000;
        std::vector<std::string> texts;
        for (std::size_t i = 0; i < n; ++i) texts.push_back(testkit::random_text(rng, 1, 16));
        auto index = std::make_shared<rag::VectorIndex>(testkit::make_index("c" + std::to_string(corpus), texts, *embedder));
        rag::KnowledgeBase kb(embedder, std::make_shared<mock::LexicalReranker>());
        kb.set_main_index(index);

        for (int q = 0; q < 10; ++q) {
            const std::size_t k = q == 0 ? 7 : 1 + rng() % 25;
            const std::string query = testkit::random_text(rng, 1, 6);
            const auto qv = rag::l2_normalize(embedder->embed_one(query));
            const rag::VectorIndex* ptrs[] = {index.get()};
            const auto got = rag::retrieve(qv, k, ptrs);

            std::vector<std::pair<double, std::string>> brute;
            for (const auto& c : index->chunks()) {
                double s = 0;
                for (std::size_t d = 0; d < dim; ++d) s += double(qv[d]) * double(c.embedding()[d]);
                brute.emplace_back(s, c.chunk_id());
            }
            std::sort(brute.begin(), brute.end(), [](const auto& a, const auto& b) {
                return a.first != b.first ? a.first > b.first : a.second < b.second;
            });
            const std::size_t want = std::min(2 * k, brute.size());
            if (got.size() != want) ++mismatches;
            for (std::size_t i = 0; i < std::min(got.size(), want); ++i)
                if (got[i].chunk.chunk_id() != brute[i].second || got[i].score != brute[i].first) ++mismatches;
            if (k == 7 && index->size() >= 14) {
                ++k7_checks;
                if (got.size() != 14) ++count_errors;
            }

            const auto items = kb.query_knowledge(query, k);
            g_provenance.add(items);
            if (items.size() != std::min(k, want)) ++count_errors;
            ++queries;
        }
    }
    const double elapsed = seconds_since(t0);
    const bool pass = mismatches == 0 && count_errors == 0 && elapsed < 30.0;
    return {pass, std::to_string(queries) + " queries over 50 corpora, mismatches=" + std::to_string(mismatches) +
                      " count_errors=" + std::to_string(count_errors) + " k7_checks=" + std::to_string(k7_checks) +
                      " t=" + fmt("%.2fs", elapsed)};
}

Outcome ingestion_rules() {
    std::size_t cases = 0;
    std::size_t passed = 0;
    auto read_json = [](const std::filesystem::path& p) {
        std::ifstream in(p);
        return json::parse(in);
    };
    for (const char* name : {"parsed_textbook", "parsed_textbook_zh"}) {
        const auto dir = testkit::data_dir() / "fixtures";
        auto doc = rag::ParsedDocument::from_json(read_json(dir / (std::string(name) + ".json")));
        std::vector<rag::Paragraph> got;
        for (auto p : rag::postprocess_parsed(doc)) {
            p.text = rag::clean_paragraph(p, nullptr, {}).cleaned_text;
            got.push_back(p);
        }
        std::vector<rag::Paragraph> want;
        std::ifstream in(dir / (std::string(name) + ".expected.jsonl"));
        std::string line;
        while (std::getline(in, line))
            if (!line.empty()) want.push_back(rag::Paragraph::from_json(json::parse(line)));
        ++cases;
        passed += got == want;
    }
    // hand-computed figure-reference cases
    const std::vector<std::pair<std::string, std::string>> strip = {
        {"Caries progresses as shown in Figure 3-2 through enamel.", "Caries progresses through enamel."},
        {"The cusp is worn (Fig. 2).", "The cusp is worn."},
        {"Bone loss is measured (see Table 4) at six sites.", "Bone loss is measured at six sites."},
        {"Sealants protect fissures (Figures 3-5 and 3-6) in molars.", "Sealants protect fissures in molars."},
        {"Risk is graded, as illustrated in Table 3-1.", "Risk is graded."},
        {"龋病的发展过程如图3-2所示，从釉质开始。", "龋病的发展过程，从釉质开始。"},
        {"Table salt contains sodium.", "Table salt contains sodium."},
    };
    for (const auto& [in, out] : strip) {
        ++cases;
        passed += rag::strip_figure_references(in) == out;
    }
    // header/footer drop, unnumbered-page drop, fragment merge across a page break
    rag::ParsedDocument doc;
    doc.book_title = "B";
    doc.blocks = {{rag::BlockKind::header, "Head", 4},         {rag::BlockKind::paragraph, "The pulp chamber", 4},
                  {rag::BlockKind::footer, "40", 4},            {rag::BlockKind::paragraph, "Caption.", std::nullopt},
                  {rag::BlockKind::paragraph, "narrows with age.", 5}};
    auto merged = rag::postprocess_parsed(doc);
    ++cases;
    passed += merged.size() == 1 && merged[0].text == "The pulp chamber narrows with age." && merged[0].page == 4;
    return {passed == cases, std::to_string(passed) + "/" + std::to_string(cases) + " fixture cases"};
}

Outcome exact_match() {
    using L = std::set<std::string>;
    struct Case {
        L p, g;
        bool ok;
    };
    const std::vector<Case> table = {
        {{"A"}, {"A"}, true},           {{"B"}, {"A"}, false},          {{"A"}, {"A", "C"}, false},
        {{"A", "C"}, {"A"}, false},     {{"A", "C"}, {"A", "C"}, true}, {{"C", "A"}, {"A", "C"}, true},
        {{"A", "B", "C"}, {"A", "C"}, false}, {{"A", "B"}, {"A", "C"}, false}, {{"B", "D"}, {"A", "C"}, false},
        {{"A", "B", "C", "D"}, {"A", "B", "C", "D"}, true}, {{"A", "B", "C"}, {"A", "B", "C", "D"}, false},
        {{}, {"A"}, false},             {{"D"}, {"D"}, true},           {{"E"}, {"E"}, true},
        {{"A", "D"}, {"D", "A"}, true}, {{"B", "C", "D"}, {"B", "C"}, false}, {{"C"}, {"B", "C", "D"}, false},
        {{"B", "C", "D"}, {"B", "C", "D"}, true}, {{"A", "E"}, {"A"}, false}, {{"A"}, {"A", "B", "C", "D", "E"}, false},
    };
    int errors = 0;
    for (const auto& c : table) errors += eval::score_item(c.p, c.g) != c.ok;

    auto items = eval::load_benchmark(testkit::data_dir() / "fixtures" / "mcq_sample.jsonl");
    const std::map<std::string, std::string> replies = {
        {"q1", "Answer: A"}, {"q2", "Answer: A, C"}, {"q3", "Answer: B"}, {"q4", "Answer: AB"}};
    struct Scripted final : eval::Subject {
        const std::map<std::string, std::string>& r;
        explicit Scripted(const std::map<std::string, std::string>& m) : r(m) {}
        std::string name() const override { return "scripted"; }
        eval::SubjectTurn ask(const std::string& key, const std::string&) override { return {r.at(key), {}, json::array()}; }
    } subject(replies);
    auto report = eval::run_eval(subject, items);
    const double endo = report.per_category.at("Endo").accuracy();
    const double perio = report.per_category.at("Perio").accuracy();
    const double overall = report.overall.accuracy();
    const bool pass = errors == 0 && table.size() == 20 && endo == 1.0 && perio == 0.5 && overall == 0.75;
    return {pass, "score table errors=" + std::to_string(errors) + "/20, Endo=" + fmt("%.2f", endo) +
                      " Perio=" + fmt("%.2f", perio) + " overall=" + fmt("%.2f", overall)};
}

Outcome registry_isolation() {
    mock::MockToolServer server;
    server.add_tool("healthy", tools::Task::detection, mock::ToolBehavior::with(mock::ToolBehavior::Mode::ok, {{"detections", json::array()}}));
    server.add_tool("broken", tools::Task::detection, mock::ToolBehavior::with(mock::ToolBehavior::Mode::http_error));
    mock::ToolBehavior hang;
    hang.mode = mock::ToolBehavior::Mode::sleep;
    hang.delay = 30s;
    server.add_tool("stuck", tools::Task::detection, hang);
    server.start();

    tools::ToolRegistry registry;
    const std::map<std::string, tools::Millis> timeouts = {{"healthy", 2000ms}, {"broken", 2000ms}, {"stuck", 1500ms}};
    for (const auto& [n, t] : timeouts) registry.register_tool(http_tool(n, server.endpoint_for(n), t));
    std::vector<tools::ToolCall> calls;
    for (const char* n : {"broken", "healthy", "stuck"}) calls.push_back(registry.format_call(n, {{"image_id", "img-1"}}));
    const auto t0 = steady::now();
    auto results = registry.execute_parallel(calls);
    const double wall = seconds_since(t0);
    server.stop();
    const double limit = 2.0 + 1.0;
    const bool pass = results[1].status == tools::ToolStatus::ok && results[0].status == tools::ToolStatus::tool_error &&
                      results[2].status == tools::ToolStatus::timeout && wall <= limit;
    return {pass, std::string("healthy=") + std::string(tools::to_string(results[1].status)) +
                      " 500=" + std::string(tools::to_string(results[0].status)) +
                      " hung=" + std::string(tools::to_string(results[2].status)) + " wall=" + fmt("%.3fs", wall) +
                      " (limit " + fmt("%.1fs", limit) + ")"};
}

Outcome rag_uplift() {
    const std::vector<testkit::PlantedFact> facts = {
        {"Kelvorin", "The Kelvorin protocol recommends a chlorhexidine rinse before scaling.", "C", "A"},
        {"Dastrel", "The Dastrel index scores gingival recession in quarter millimetres.", "B", "D"},
        {"Movanix", "Movanix splints are worn nightly for six weeks after trauma.", "D", "A"},
        {"Trelund", "The Trelund classification has exactly five furcation grades.", "A", "B"},
        {"Quorvex", "Quorvex cement requires a dry field for ninety seconds.", "B", "C"},
    };
    std::vector<eval::MCQItem> items;
    for (std::size_t i = 0; i < facts.size(); ++i) {
        eval::MCQItem m;
        m.item_id = "u" + std::to_string(i + 1);
        m.category = i < 3 ? "Perio" : "Prosth";
        m.stem = "According to the " + facts[i].trigger + " protocol, which option is correct?";
        m.options = {{"A", "first"}, {"B", "second"}, {"C", "third"}, {"D", "fourth"}};
        m.gold = {facts[i].correct};
        items.push_back(m);
    }
    auto model = std::make_shared<testkit::PlantedFactChat>(facts);
    eval::BareChatSubject bare(model);
    const double bare_acc = eval::run_eval(bare, items).overall.accuracy();

    auto clock = std::make_shared<FixedClock>(testkit::fixed_time());
    auto embedder = std::make_shared<mock::HashEmbedder>(64);
    rag::KnowledgeBase kb(embedder, std::make_shared<mock::LexicalReranker>());
    std::vector<std::string> corpus;
    for (const auto& f : facts) corpus.push_back(f.fact);
    std::mt19937_64 rng(23);
    for (int i = 0; i < 200; ++i) corpus.push_back(testkit::random_text(rng, 5, 15) + ".");
    kb.set_main_index(std::make_shared<rag::VectorIndex>(testkit::make_index("main", corpus, *embedder)));
    tools::ToolRegistry registry(clock);
    registry.register_tool(kb.tool_descriptor(7));
    registry.bind_local("rag", kb.tool_handler(7));
    MemoryStore memory;
    Agent agent({model, &registry, &kb, &memory, nullptr, clock});
    SessionConfig cfg;
    cfg.rag_mode = RagMode::as_tool;
    eval::AgentSubject subject(agent, cfg, clock);
    auto report = eval::run_eval(subject, items);
    for (const auto& i : items) g_provenance.add_memory(memory.snapshot("eval-" + i.item_id));
    const double agent_acc = report.overall.accuracy();
    return {bare_acc == 0.0 && agent_acc == 1.0,
            "bare_chat=" + fmt("%.2f", bare_acc) + " agent(rag as-tool)=" + fmt("%.2f", agent_acc) + " on 5 items"};
}

Outcome catalog_fidelity() {
    tools::ToolRegistry registry;
    const std::size_t n = registry.load_catalog(testkit::data_dir() / "catalog" / "dental_tools.jsonl");
    auto pano = registry.list_tools({{Modality::panoramic_radiograph}, std::nullopt});
    std::set<std::string> nos;
    for (const auto& t : pano) nos.insert(t.catalog_no);
    const std::set<std::string> want = {"T17", "T18", "T19", "T20", "T21", "T22"};
    return {n == 22 && pano.size() == 6 && nos == want,
            "registered=" + std::to_string(n) + " panoramic_radiograph=" + std::to_string(pano.size())};
}

// Random valid session memory; timestamps are whole milliseconds like the wire format.
SessionMemory random_session(std::mt19937_64& rng, int idx) {
    auto at = [&] { return testkit::fixed_time() + std::chrono::milliseconds(rng() % 100000000); };
    SessionMemory m;
    m.session_id = "acc-" + std::to_string(idx);
    int iteration = 0;
    const int n = static_cast<int>(rng() % 6);
    for (int r = 0; r < n; ++r) {
        MemoryRecord rec;
        rec.iteration = iteration += 1 + static_cast<int>(rng() % 2);
        rec.at = at();
        rec.thoughts.text = testkit::random_text(rng, 1, 12);
        if (r + 1 == n) {
            rec.thoughts.ready_to_respond = true;
            rec.thoughts.draft_response = testkit::random_text(rng, 2, 8);
        } else {
            const int calls = 1 + static_cast<int>(rng() % 3);
            for (int c = 0; c < calls; ++c) {
                const std::string id = "call-" + std::to_string(rec.iteration) + "-" + std::to_string(c + 1);
                rec.thoughts.proposed_actions.push_back({"tool", {{"image_id", "img-1"}}});
                rec.calls.push_back({id, at(), "tool", {{"image_id", "img-1"}}});
                tools::ToolResult res;
                res.call_id = id;
                res.tool_name = "tool";
                res.status = rng() % 4 ? tools::ToolStatus::ok : tools::ToolStatus::timeout;
                if (res.status == tools::ToolStatus::ok) res.payload = {{"detections", {{{"score", 0.5}}}}};
                else res.error = "no response within 30000 ms";
                res.latency = std::chrono::milliseconds(rng() % 9000);
                rec.results.push_back(res);
            }
        }
        if (rng() % 2) {
            rec.knowledge.push_back({rag::KnowledgeChunk("main-" + std::to_string(rng() % 99999),
                                                         testkit::random_text(rng, 3, 9), {},
                                                         {"Book " + std::to_string(rng() % 4), 1 + int(rng() % 300)},
                                                         text::Language::en),
                                     double(rng() % 1000) / 1000.0, double(rng() % 1000) / 1000.0, 1, rng() % 5 == 0});
        }
        m.records.push_back(rec);
    }
    StructuredInstruction turn;
    turn.query = testkit::random_text(rng, 1, 8);
    turn.intents = {Intent::education, Intent::anomaly_diagnosis};
    turn.language = text::Language::en;
    turn.created_at = at();
    m.user_turns.push_back(turn);
    return m;
}

Outcome memory_and_replay() {
    // save∘load identity
    std::mt19937_64 rng(7);
    testkit::TempDir dir;
    int identity = 0;
    for (int i = 0; i < 200; ++i) {
        SessionMemory m = random_session(rng, i);
        MemoryStore store;
        store.restore(m);
        const auto path = dir.path() / ("m" + std::to_string(i) + ".json");
        store.save(m.session_id, path);
        identity += MemoryStore::load(path) == m;
    }

    // live SSE stream vs replay through the HTTP service
    auto clock = std::make_shared<FixedClock>(testkit::fixed_time());
    auto chat = std::make_shared<testkit::DeterministicChat>();
    Comprehension comprehension(chat, std::make_shared<testkit::ConstantClassifier>(Modality::intraoral_image));
    tools::ToolRegistry registry(clock);
    tools::ToolDescriptor d;
    d.name = "caries_detector";
    d.modalities = {Modality::intraoral_image};
    d.task = tools::Task::detection;
    d.description = "caries";
    d.arg_schema = {{"type", "object"}, {"required", {"image_id"}}};
    d.output_schema = {{"type", "object"}};
    d.endpoint = "local:caries";
    registry.register_tool(d);
    registry.bind_local("caries", [](const tools::ToolCall& c) {
        return json{{"status", "ok"}, {"payload", {{"detections", {{{"image", c.args["image_id"]}}}}}}};
    });
    auto embedder = std::make_shared<mock::HashEmbedder>(16);
    rag::KnowledgeBase kb(embedder, nullptr);
    kb.set_main_index(std::make_shared<rag::VectorIndex>(
        testkit::make_index("main", {"Fluoride varnish prevents caries.", "Sealants protect fissures."}, *embedder)));
    MemoryStore memory;
    ArtifactStore artifacts;
    Agent agent({chat, &registry, &kb, &memory, &artifacts, clock});
    ServiceOptions opts;
    opts.stream_idle_poll = 50ms;
    opts.session_defaults.rag_mode = RagMode::both;
    ApiService service({&comprehension, &agent, &registry, &kb, &artifacts, clock}, opts);
    service.start();
    httplib::Client client(service.base_url());
    client.set_read_timeout(10, 0);
    auto stream = [&](const std::string& id) {
        std::string body;
        httplib::Client c(service.base_url());
        c.set_read_timeout(10, 0);
        c.Get("/sessions/" + id + "/events?from_seq=0", httplib::Headers{}, [&](const char* data, std::size_t n) {
            body.append(data, n);
            return true;
        });
        return body;
    };
    int equal = 0;
    int raw_equal = 0;  // the clock is fixed, so even timestamps agree
    for (int i = 0; i < 20; ++i) {
        auto created = client.Post("/sessions", "{}", "application/json");
        if (!created || created->status != 201) continue;
        const std::string id = json::parse(created->body)["session_id"];
        json images = json::array();
        for (int k = 0; k < i % 3; ++k) images.push_back(crypto::base64_encode(testkit::tiny_png(i * 10 + k)));
        const std::string text = i % 5 == 4 ? "pizza toppings?" : "question " + std::to_string(i) + " about my molar";
        auto posted = client.Post("/sessions/" + id + "/messages", json{{"text", text}, {"images", images}}.dump(),
                                  "application/json");
        if (!posted || posted->status != 202) continue;
        const std::string live = stream(id);
        service.wait_idle(id, 10s);
        const std::string replay = stream(id);
        json a = json::array(), b = json::array();
        for (const auto& e : parse_sse_frames(live)) a.push_back(testkit::strip_volatile(e.to_json()));
        for (const auto& e : parse_sse_frames(replay)) b.push_back(testkit::strip_volatile(e.to_json()));
        if (!a.empty() && a.dump() == b.dump()) ++equal;
        raw_equal += live == replay;
        g_provenance.add_events(parse_sse_frames(replay));
    }
    service.stop();
    return {identity == 200 && equal == 20 && raw_equal == 20,
            "save/load identity " + std::to_string(identity) + "/200, replay==live " + std::to_string(equal) +
                "/20 (raw bytes " + std::to_string(raw_equal) + "/20)"};
}

Outcome provenance_totality() {
    // also sweep the knowledge base entry points once more with both languages
    auto embedder = std::make_shared<mock::HashEmbedder>(32);
    rag::KnowledgeBase kb(embedder, std::make_shared<mock::LexicalReranker>());
    kb.set_main_index(std::make_shared<rag::VectorIndex>(testkit::make_index(
        "main", {"Caries affects enamel.", "Pulpitis causes pain.", "Gingivitis bleeds."}, *embedder)));
    kb.add_private_index(std::make_shared<rag::VectorIndex>(testkit::make_index(
        "zh", {"龋病影响釉质。", "牙髓炎引起疼痛。"}, *embedder, 1, text::Language::zh)));
    g_provenance.add(kb.query_knowledge("enamel caries", 7, text::Language::en));
    g_provenance.add(kb.query_knowledge("牙髓炎", 7, text::Language::zh));
    const bool pass = g_provenance.seen > 0 && g_provenance.complete == g_provenance.seen;
    return {pass, std::to_string(g_provenance.complete) + "/" + std::to_string(g_provenance.seen) +
                      " knowledge items carry book_title and page"};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"loop-conformance", loop_conformance},
        {"time-budget", time_budget},
        {"retrieval-oracle", retrieval_oracle},
        {"ingestion-rules", ingestion_rules},
        {"exact-match-protocol", exact_match},
        {"tool-registry-isolation", registry_isolation},
        {"rag-uplift-smoke", rag_uplift},
        {"catalog-fidelity", catalog_fidelity},
        {"memory-and-replay", memory_and_replay},
        // last, so it sees the items produced by every other criterion
        {"provenance-totality", provenance_totality},
    };
    int failures = 0;
    for (const auto& [name, run] : criteria) {
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
