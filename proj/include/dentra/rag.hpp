// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dentra/clock.hpp"
#include "dentra/gateway.hpp"
#include "dentra/json.hpp"
#include "dentra/text.hpp"
#include "dentra/tools.hpp"

namespace dentra::rag {

// ---------------------------------------------------------------------------
// Offline ingestion

enum class BlockKind { title, paragraph, table, header, footer };

std::string_view to_string(BlockKind kind);
std::optional<BlockKind> block_kind_from_string(std::string_view s);

struct Block {
    BlockKind kind = BlockKind::paragraph;
    std::string text;
    std::optional<int> page;
};

// Structured output of an external layout/OCR parser.
struct ParsedDocument {
    std::string book_title;
    text::Language language = text::Language::en;
    std::vector<Block> blocks;  // reading order

    void validate() const;  // page numbers non-decreasing where present
    json to_json() const;
    static ParsedDocument from_json(const json& j);
};

struct Paragraph {
    std::string text;
    int page = 0;
    std::string book_title;
    text::Language language = text::Language::en;

    json to_json() const;
    static Paragraph from_json(const json& j);
    friend bool operator==(const Paragraph&, const Paragraph&) = default;
};

// Rule-based pass over parser output:
//  * header and footer blocks are dropped, and so is every block without a page number;
//  * title blocks are not emitted;
//  * a paragraph block lacking sentence-final punctuation is merged with the next
//    paragraph block (chains merge repeatedly); the merged paragraph keeps the first page;
//  * table blocks pass through as their own paragraphs.
std::vector<Paragraph> postprocess_parsed(const ParsedDocument& doc);

// Removes figure/table cross-references such as "as shown in Figure 3-2",
// "(see Table 4)", "(Fig. 2)", "如图3-2所示" and tidies the leftover spacing.
std::string strip_figure_references(std::string_view s);

enum class CleanMode { dry_run, strict, lenient };

struct CleanOptions {
    CleanMode mode = CleanMode::dry_run;
    std::optional<text::Language> translate_to;
};

struct CleanResult {
    bool keep = true;
    std::string cleaned_text;
    std::optional<std::string> translated_text;
    std::optional<text::Language> translated_language;
    bool warning = false;
};

// The model is asked for {"keep": bool, "cleaned_text": str, "translation": str|null}.
// dry_run never calls the model. Gateway failure throws in strict mode and falls
// back to the raw text (with warning) in lenient mode.
CleanResult clean_paragraph(const Paragraph& paragraph, gateway::ChatModel* model,
                            const CleanOptions& options);

std::string cleaning_system_prompt();

// ---------------------------------------------------------------------------
// Index

struct Provenance {
    std::string book_title;
    int page = 0;
    friend bool operator==(const Provenance&, const Provenance&) = default;
    friend auto operator<=>(const Provenance&, const Provenance&) = default;
};

// A chunk cannot exist without a book title and a positive page number.
class KnowledgeChunk {
public:
    KnowledgeChunk(std::string chunk_id, std::string text, std::vector<float> embedding,
                   Provenance provenance, text::Language language);

    const std::string& chunk_id() const noexcept { return chunk_id_; }
    const std::string& text() const noexcept { return text_; }
    const std::vector<float>& embedding() const noexcept { return embedding_; }
    const Provenance& provenance() const noexcept { return provenance_; }
    const std::string& book_title() const noexcept { return provenance_.book_title; }
    int page() const noexcept { return provenance_.page; }
    text::Language language() const noexcept { return language_; }
    std::size_t token_count() const noexcept { return token_count_; }

    KnowledgeChunk without_embedding() const;
    json to_json(bool with_embedding = true) const;
    static KnowledgeChunk from_json(const json& j);
    friend bool operator==(const KnowledgeChunk&, const KnowledgeChunk&) = default;

private:
    std::string chunk_id_;
    std::string text_;
    std::vector<float> embedding_;
    Provenance provenance_;
    text::Language language_;
    std::size_t token_count_;
};

struct ChunkingConfig {
    std::size_t max_tokens = 512;
    std::size_t batch_size = 32;
};

// Greedy packing of whole sentences into pieces of at most max_tokens; a single
// sentence over the limit is cut on token boundaries.
std::vector<std::string> split_to_chunks(const std::string& text, std::size_t max_tokens);

// Scales to unit L2 norm; throws ValidationError for a zero vector.
std::vector<float> l2_normalize(std::vector<float> v);

double dot(std::span<const float> a, std::span<const float> b);

class VectorIndex {
public:
    VectorIndex(std::string name, std::size_t dimension, std::string embedding_model,
                TimePoint created_at);

    const std::string& name() const noexcept { return name_; }
    std::size_t dimension() const noexcept { return dimension_; }
    const std::string& embedding_model() const noexcept { return embedding_model_; }
    TimePoint created_at() const noexcept { return created_at_; }
    std::size_t size() const noexcept { return chunks_.size(); }
    const std::vector<KnowledgeChunk>& chunks() const noexcept { return chunks_; }

    // Checks dimension, unit norm (1e-6) and chunk_id uniqueness.
    void add(KnowledgeChunk chunk);

    // <dir>/chunks.jsonl (one chunk per line) and <dir>/index.json (metadata).
    void save(const std::filesystem::path& dir) const;
    static VectorIndex load(const std::filesystem::path& dir);

    bool content_equals(const VectorIndex& other) const;

private:
    std::string name_;
    std::size_t dimension_;
    std::string embedding_model_;
    TimePoint created_at_;
    std::vector<KnowledgeChunk> chunks_;
    std::set<std::string> ids_;
};

// Chunks, embeds in batches and normalises. Chunk ids are "<index_name>-<seq>"
// with an 8-digit zero-padded sequence so lexical order is insertion order.
VectorIndex build_index(const std::vector<Paragraph>& paragraphs, gateway::Embedder& embedder,
                        const ChunkingConfig& chunking, std::string index_name, const Clock& clock);

// ---------------------------------------------------------------------------
// Online retrieval

struct Candidate {
    KnowledgeChunk chunk;
    double score;  // cosine == dot product on unit vectors
};

struct RetrieveOptions {
    std::optional<text::Language> language;  // restrict to this language when set
};

// Exact scan over every chunk of every index. Returns min(2K, total) candidates
// by descending score, ties broken by ascending chunk_id.
std::vector<Candidate> retrieve(std::span<const float> query_embedding, std::size_t k,
                                std::span<const VectorIndex* const> indexes,
                                const RetrieveOptions& options = {});
std::vector<Candidate> retrieve(const std::string& query, std::size_t k, const VectorIndex& index,
                                gateway::Embedder& embedder);

struct KnowledgeItem {
    KnowledgeChunk chunk;
    double retrieval_score = 0;
    double rerank_score = 0;
    int rank = 0;  // 1..K
    bool degraded = false;  // reranker unavailable; ordered by retrieval score

    Provenance provenance() const { return chunk.provenance(); }
    json to_json() const;  // embedding omitted
    static KnowledgeItem from_json(const json& j);
    friend bool operator==(const KnowledgeItem&, const KnowledgeItem&) = default;
};

// Top min(K, |candidates|) by rerank score, ties by retrieval score then chunk_id.
// If the reranker throws, falls back to retrieval order with `degraded` set.
std::vector<KnowledgeItem> rerank(const std::string& query, const std::vector<Candidate>& candidates,
                                  std::size_t k, gateway::Reranker* reranker);

struct KnowledgeBaseOptions {
    bool cross_language = false;
};

// Main and private indexes behind a snapshot pointer: queries read a consistent
// snapshot while installs swap it atomically.
class KnowledgeBase {
public:
    static constexpr const char* kToolName = "dental_knowledge_retrieval";

    KnowledgeBase(std::shared_ptr<gateway::Embedder> embedder,
                  std::shared_ptr<gateway::Reranker> reranker, KnowledgeBaseOptions options = {});

    void set_main_index(std::shared_ptr<const VectorIndex> index);
    void add_private_index(std::shared_ptr<const VectorIndex> index);
    std::size_t chunk_count() const;

    // retrieve then rerank over main plus private indexes. With a query language
    // and cross_language off, chunks in that language are searched first; if none
    // exist the whole union is searched.
    std::vector<KnowledgeItem> query_knowledge(const std::string& query, std::size_t k,
                                               std::optional<text::Language> language = std::nullopt) const;

    // Descriptor and handler that expose query_knowledge as a registry tool.
    tools::ToolDescriptor tool_descriptor(std::size_t default_k) const;
    tools::LocalHandler tool_handler(std::size_t default_k) const;

    gateway::Embedder& embedder() const { return *embedder_; }

private:
    struct Snapshot {
        std::vector<std::shared_ptr<const VectorIndex>> indexes;
    };
    std::shared_ptr<const Snapshot> snapshot() const;

    std::shared_ptr<gateway::Embedder> embedder_;
    std::shared_ptr<gateway::Reranker> reranker_;
    KnowledgeBaseOptions options_;
    mutable std::mutex mu_;
    std::shared_ptr<const VectorIndex> main_;
    std::vector<std::shared_ptr<const VectorIndex>> private_;
    std::shared_ptr<const Snapshot> snapshot_;
};

struct PrivateIngestOptions {
    std::string index_name = "private";
    ChunkingConfig chunking;
    CleanOptions cleaning;  // dry run by default
    gateway::ChatModel* cleaner = nullptr;
    // Command for .doc/.pdf; "{input}" is replaced by the file path and stdout
    // must be ParsedDocument JSON.
    std::string parser_command;
};

// .txt/.md read natively: each blank-line separated paragraph becomes a block with
// synthetic page = its 1-based sequence number; markdown headings become titles.
ParsedDocument parse_private_file(const std::filesystem::path& path, const PrivateIngestOptions& options);

// postprocess, clean, then build a named private index.
VectorIndex ingest_private_kb(const std::filesystem::path& path, gateway::Embedder& embedder,
                              const PrivateIngestOptions& options, const Clock& clock);

}  // namespace dentra::rag
