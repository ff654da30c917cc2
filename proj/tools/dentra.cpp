// SPDX-License-Identifier: Apache-2.0
// dentra command line: service, ingestion, indexing, evaluation and mocks.
#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include "dentra/config.hpp"
#include "dentra/error.hpp"
#include "dentra/eval.hpp"
#include "dentra/mock_gateway.hpp"
#include "dentra/mock_tools.hpp"
#include "dentra/service.hpp"

namespace fs = std::filesystem;
using namespace dentra;

namespace {

volatile std::sig_atomic_t g_stop = 0;

void wait_for_signal() {
    std::signal(SIGINT, [](int) { g_stop = 1; });
    std::signal(SIGTERM, [](int) { g_stop = 1; });
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw NotFoundError("cannot open " + p.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ValidationError(p.string(), "not valid JSON");
    return j;
}

std::shared_ptr<gateway::Embedder> make_embedder(const std::string& config_path, std::size_t hash_dim) {
    if (hash_dim > 0) return std::make_shared<mock::HashEmbedder>(hash_dim);
    if (config_path.empty()) throw ValidationError("embedder", "pass --config with a gateway.embed entry or --hash-dim");
    const AppConfig cfg = AppConfig::load(config_path);
    auto it = cfg.endpoints.find(gateway::Role::embed);
    if (it == cfg.endpoints.end()) throw ValidationError("gateway.embed", "required");
    return std::make_shared<gateway::HttpEmbedder>(it->second);
}

rag::CleanMode clean_mode(const std::string& s) {
    if (s == "dry_run") return rag::CleanMode::dry_run;
    if (s == "strict") return rag::CleanMode::strict;
    if (s == "lenient") return rag::CleanMode::lenient;
    throw ValidationError("mode", "must be dry_run, strict or lenient");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dentra: dental multimodal agent service"};
    app.require_subcommand(1);

    // serve
    auto* serve = app.add_subcommand("serve", "Run the HTTP API");
    std::string serve_config;
    int serve_port = -1;
    serve->add_option("--config", serve_config, "Application config JSON")->required()->check(CLI::ExistingFile);
    serve->add_option("--port", serve_port, "Override the configured port");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Post-process and clean a parsed document into paragraphs");
    std::string ingest_input, ingest_out, ingest_mode = "dry_run", ingest_config, ingest_translate, ingest_parser;
    ingest->add_option("--input", ingest_input, "ParsedDocument JSON, or a .txt/.md/.doc/.pdf file")
        ->required()
        ->check(CLI::ExistingFile);
    ingest->add_option("--out", ingest_out, "Paragraphs JSONL output")->required();
    ingest->add_option("--mode", ingest_mode, "dry_run | strict | lenient");
    ingest->add_option("--config", ingest_config, "Config with a chat endpoint for cleaning");
    ingest->add_option("--translate-to", ingest_translate, "en | zh");
    ingest->add_option("--parser-command", ingest_parser, "Command for .doc/.pdf, {input} is the path");

    // build-index
    auto* build = app.add_subcommand("build-index", "Embed paragraphs into a vector index");
    std::string build_in, build_out, build_name = "main", build_config;
    std::size_t build_hash_dim = 0, build_max_tokens = 512, build_batch = 32;
    build->add_option("--paragraphs", build_in, "Paragraphs JSONL")->required()->check(CLI::ExistingFile);
    build->add_option("--out", build_out, "Index directory")->required();
    build->add_option("--name", build_name, "Index name (chunk id prefix)");
    build->add_option("--config", build_config, "Config with a gateway.embed entry");
    build->add_option("--hash-dim", build_hash_dim, "Use the offline hash embedder with this dimension");
    build->add_option("--max-tokens", build_max_tokens, "Chunk size limit");
    build->add_option("--batch-size", build_batch, "Embedding batch size");

    // query
    auto* query = app.add_subcommand("query", "Retrieve and rerank knowledge");
    std::string query_config, query_text;
    std::size_t query_k = 7;
    query->add_option("--config", query_config, "Application config JSON")->required()->check(CLI::ExistingFile);
    query->add_option("--q", query_text, "Query text")->required();
    query->add_option("--k", query_k, "Top-k")->check(CLI::PositiveNumber);

    // eval run
    auto* eval = app.add_subcommand("eval", "Benchmark evaluation");
    eval->require_subcommand(1);
    auto* eval_run = eval->add_subcommand("run", "Run a multiple-choice benchmark");
    std::string eval_subject = "agent", eval_bench, eval_report, eval_config;
    std::size_t eval_k = 7, eval_parallel = 1;
    eval_run->add_option("--subject", eval_subject, "bare_chat | agent")
        ->check(CLI::IsMember({"bare_chat", "agent"}));
    eval_run->add_option("--benchmark", eval_bench, "MCQ JSONL")->required()->check(CLI::ExistingFile);
    eval_run->add_option("--k", eval_k, "Retrieval top-k")->check(CLI::PositiveNumber);
    eval_run->add_option("--report-out", eval_report, "Report JSON path");
    eval_run->add_option("--config", eval_config, "Application config JSON")->required()->check(CLI::ExistingFile);
    eval_run->add_option("--parallel", eval_parallel, "Items evaluated concurrently");

    // mocks
    auto* mock_gw = app.add_subcommand("mock-gateway", "Serve a scripted model gateway");
    std::string mock_script;
    int mock_gw_port = 0;
    mock_gw->add_option("--script", mock_script, "MockScript JSON")->required()->check(CLI::ExistingFile);
    mock_gw->add_option("--port", mock_gw_port, "Port (0 = any)");

    auto* mock_tl = app.add_subcommand("mock-tools", "Serve fixture tool endpoints for a catalog");
    std::string mock_catalog;
    int mock_tl_port = 0;
    mock_tl->add_option("--catalog", mock_catalog, "Catalog JSONL")->required()->check(CLI::ExistingFile);
    mock_tl->add_option("--port", mock_tl_port, "Port (0 = any)");

    // tools list
    auto* tools_cmd = app.add_subcommand("tools", "Tool catalog");
    tools_cmd->require_subcommand(1);
    auto* tools_list = tools_cmd->add_subcommand("list", "List catalog tools");
    std::string list_catalog, list_modality, list_task;
    tools_list->add_option("--catalog", list_catalog, "Catalog JSONL")->required()->check(CLI::ExistingFile);
    tools_list->add_option("--modality", list_modality, "Modality filter");
    tools_list->add_option("--task", list_task, "Task filter");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*serve) {
            AppConfig cfg = AppConfig::load(serve_config);
            auto rt = make_runtime(cfg);
            ServiceOptions opts;
            opts.host = cfg.service.host;
            opts.max_image_bytes = cfg.service.max_image_bytes;
            opts.session_defaults = cfg.session_defaults;
            if (!cfg.service.auth_token_env.empty()) {
                if (const char* tok = std::getenv(cfg.service.auth_token_env.c_str())) opts.auth_token = tok;
            }
            ApiService svc({rt->comprehension.get(), rt->agent.get(), rt->registry.get(), rt->kb.get(),
                            rt->artifacts.get(), rt->clock},
                           opts);
            const int port = svc.start(serve_port >= 0 ? serve_port : cfg.service.port);
            std::cout << "listening on " << opts.host << ":" << port << std::endl;
            wait_for_signal();
            svc.stop();
        } else if (*ingest) {
            std::unique_ptr<gateway::HttpChatModel> cleaner;
            rag::CleanOptions clean{clean_mode(ingest_mode), std::nullopt};
            if (!ingest_translate.empty()) clean.translate_to = text::language_from_string(ingest_translate);
            if (!ingest_config.empty())
                cleaner = std::make_unique<gateway::HttpChatModel>(
                    AppConfig::load(ingest_config).endpoints.at(gateway::Role::chat));

            rag::ParsedDocument doc;
            if (fs::path(ingest_input).extension() == ".json") {
                doc = rag::ParsedDocument::from_json(read_json(ingest_input));
            } else {
                rag::PrivateIngestOptions popts;
                popts.parser_command = ingest_parser;
                doc = rag::parse_private_file(ingest_input, popts);
            }
            std::ofstream out(ingest_out, std::ios::trunc);
            std::size_t kept = 0, dropped = 0;
            for (auto& p : rag::postprocess_parsed(doc)) {
                auto r = rag::clean_paragraph(p, cleaner.get(), clean);
                if (!r.keep || r.cleaned_text.empty()) {
                    ++dropped;
                    continue;
                }
                p.text = r.translated_text.value_or(r.cleaned_text);
                if (r.translated_language) p.language = *r.translated_language;
                out << p.to_json().dump() << '\n';
                ++kept;
            }
            std::cout << kept << " paragraphs written, " << dropped << " dropped" << std::endl;
        } else if (*build) {
            std::vector<rag::Paragraph> paragraphs;
            std::ifstream in(build_in);
            std::string line;
            while (std::getline(in, line))
                if (!text::trim(line).empty()) paragraphs.push_back(rag::Paragraph::from_json(json::parse(line)));
            auto embedder = make_embedder(build_config, build_hash_dim);
            auto index = rag::build_index(paragraphs, *embedder, {build_max_tokens, build_batch}, build_name,
                                          *system_clock());
            index.save(build_out);
            std::cout << index.size() << " chunks, dimension " << index.dimension() << " -> " << build_out
                      << std::endl;
        } else if (*query) {
            auto rt = make_runtime(AppConfig::load(query_config));
            if (!rt->kb) throw ValidationError("gateway.embed", "required for retrieval");
            json items = json::array();
            for (const auto& item : rt->kb->query_knowledge(query_text, query_k, text::detect_language(query_text)))
                items.push_back(item.to_json());
            std::cout << items.dump(2) << std::endl;
        } else if (*eval_run) {
            AppConfig cfg = AppConfig::load(eval_config);
            cfg.session_defaults.k_default = eval_k;
            auto rt = make_runtime(cfg);
            const auto items = eval::load_benchmark(eval_bench);
            std::unique_ptr<eval::Subject> subject;
            if (eval_subject == "bare_chat") subject = std::make_unique<eval::BareChatSubject>(rt->chat);
            else subject = std::make_unique<eval::AgentSubject>(*rt->agent, cfg.session_defaults, rt->clock);
            const auto report = eval::run_eval(*subject, items, {eval_parallel});
            std::cout << eval::render_table({report});
            if (eval_subject == "agent") std::cout << eval::tool_usage_stats(report).to_json().dump() << std::endl;
            if (!eval_report.empty()) {
                json j = report.to_json();
                j["tool_usage"] = eval::tool_usage_stats(report).to_json();
                std::ofstream(eval_report, std::ios::trunc) << j.dump(2) << '\n';
            }
        } else if (*mock_gw) {
            mock::MockGatewayServer server(mock::MockScript::from_json(read_json(mock_script)));
            const int port = server.start(mock_gw_port);
            std::cout << "mock gateway on 127.0.0.1:" << port << std::endl;
            wait_for_signal();
            server.stop();
        } else if (*mock_tl) {
            tools::ToolRegistry registry;
            registry.load_catalog(mock_catalog);
            mock::MockToolServer server;
            for (const auto& d : registry.list_tools()) server.add_tool(d.name, d.task);
            const int port = server.start(mock_tl_port);
            std::cout << "mock tools on 127.0.0.1:" << port << " (" << registry.size() << " tools)" << std::endl;
            wait_for_signal();
            server.stop();
        } else if (*tools_list) {
            tools::ToolRegistry registry;
            registry.load_catalog(list_catalog);
            tools::ToolFilter filter;
            if (!list_modality.empty()) {
                auto m = modality_from_string(list_modality);
                if (!m) throw ValidationError("modality", "unknown modality " + list_modality);
                filter.modalities.insert(*m);
            }
            if (!list_task.empty()) {
                filter.task = tools::task_from_string(list_task);
                if (!filter.task) throw ValidationError("task", "unknown task " + list_task);
            }
            for (const auto& d : registry.list_tools(filter))
                std::cout << d.catalog_no << "  " << d.name << "  " << tools::to_string(d.task) << std::endl;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
