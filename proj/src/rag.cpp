// SPDX-License-Identifier: Apache-2.0
#include "dentra/rag.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <regex>
#include <sstream>

#include "dentra/error.hpp"

namespace dentra::rag {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// documents

namespace {

constexpr std::array<std::pair<BlockKind, std::string_view>, 5> kBlockNames = {{
    {BlockKind::title, "title"},
    {BlockKind::paragraph, "paragraph"},
    {BlockKind::table, "table"},
    {BlockKind::header, "header"},
    {BlockKind::footer, "footer"},
}};

text::Language corpus_language(std::string_view s) {
    auto lang = text::language_from_string(s);
    if (lang == text::Language::other) throw ValidationError("language", "must be en or zh");
    return lang;
}

}  // namespace

std::string_view to_string(BlockKind kind) {
    for (auto [k, n] : kBlockNames)
        if (k == kind) return n;
    return "paragraph";
}

std::optional<BlockKind> block_kind_from_string(std::string_view s) {
    for (auto [k, n] : kBlockNames)
        if (n == s) return k;
    return std::nullopt;
}

void ParsedDocument::validate() const {
    std::vector<std::string> bad;
    if (text::trim(book_title).empty()) bad.push_back("book_title: must be non-empty");
    if (language == text::Language::other) bad.push_back("language: must be en or zh");
    std::optional<int> last;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto& page = blocks[i].page;
        if (!page) continue;
        if (last && *page < *last)
            bad.push_back("blocks/" + std::to_string(i) + "/page: decreases from " + std::to_string(*last));
        last = page;
    }
    if (!bad.empty()) throw ValidationError(std::move(bad));
}

json ParsedDocument::to_json() const {
    json bs = json::array();
    for (const auto& b : blocks) {
        json jb = {{"kind", to_string(b.kind)}, {"text", b.text}};
        jb["page"] = b.page ? json(*b.page) : json(nullptr);
        bs.push_back(std::move(jb));
    }
    return {{"book_title", book_title}, {"language", text::to_string(language)}, {"blocks", bs}};
}

ParsedDocument ParsedDocument::from_json(const json& j) {
    ParsedDocument d;
    d.book_title = j.at("book_title").get<std::string>();
    d.language = corpus_language(j.at("language").get<std::string>());
    for (const auto& jb : j.at("blocks")) {
        Block b;
        auto kind = block_kind_from_string(jb.at("kind").get<std::string>());
        if (!kind) throw ValidationError("blocks/kind", "unknown kind " + jb.at("kind").dump());
        b.kind = *kind;
        b.text = jb.value("text", std::string{});
        if (jb.contains("page") && !jb["page"].is_null()) b.page = jb["page"].get<int>();
        d.blocks.push_back(std::move(b));
    }
    d.validate();
    return d;
}

json Paragraph::to_json() const {
    return {{"text", text}, {"page", page}, {"book_title", book_title}, {"language", text::to_string(language)}};
}

Paragraph Paragraph::from_json(const json& j) {
    Paragraph p;
    p.text = j.at("text").get<std::string>();
    p.page = j.at("page").get<int>();
    p.book_title = j.at("book_title").get<std::string>();
    p.language = corpus_language(j.at("language").get<std::string>());
    return p;
}

std::vector<Paragraph> postprocess_parsed(const ParsedDocument& doc) {
    doc.validate();
    std::vector<Paragraph> out;
    std::optional<Paragraph> pending;
    auto flush = [&] {
        if (pending && !text::trim(pending->text).empty()) {
            pending->text = text::trim(pending->text);
            out.push_back(std::move(*pending));
        }
        pending.reset();
    };
    for (const auto& block : doc.blocks) {
        if (block.kind == BlockKind::header || block.kind == BlockKind::footer) continue;
        if (!block.page) continue;
        if (text::trim(block.text).empty()) continue;
        switch (block.kind) {
            case BlockKind::title:
                flush();
                break;
            case BlockKind::table:
                flush();
                out.push_back({text::trim(block.text), *block.page, doc.book_title, doc.language});
                break;
            case BlockKind::paragraph:
                if (pending) pending->text = text::join_fragments(pending->text, block.text);
                else pending = Paragraph{block.text, *block.page, doc.book_title, doc.language};
                if (text::ends_with_terminator(pending->text)) flush();
                break;
            default:
                break;
        }
    }
    flush();
    return out;
}

std::string strip_figure_references(std::string_view input) {
    static const std::string kNum = R"([0-9]+[A-Za-z]?(?:(?:-|–|\.)[0-9]+[A-Za-z]?)*)";
    static const std::string kRef = R"((?:fig(?:ure)?s?\.?|tables?)\s*)" + kNum +
                                    R"((?:\s*(?:and|,|&)\s*)" + kNum + ")*";
    static const std::regex kParen(R"(\s*\(\s*(?:see\s+)?)" + kRef + R"(\s*\))", std::regex::icase);
    static const std::regex kShown(R"(,?\s*(?:as\s+)?(?:shown|illustrated|seen|depicted|presented|listed|summari[sz]ed)\s+in\s+)" +
                                       kRef,
                                   std::regex::icase);
    static const std::regex kSee(R"(,?\s*see\s+)" + kRef, std::regex::icase);
    // std::regex matches bytes, so full-width digits are spelled out as alternatives
    static const std::string kZhDigit = "(?:[0-9]|０|１|２|３|４|５|６|７|８|９)";
    static const std::regex kZh("(?:\\(|（)?(?:如|见|参见)(?:图|表)\\s*" + kZhDigit + "+(?:(?:-|－|\\.|．)" + kZhDigit +
                                "+)*(?:所示)?(?:\\)|）)?");
    static const std::regex kSpaces(R"([ \t]{2,})");
    static const std::regex kSpaceBeforePunct(R"(\s+([.,;:!?]))");
    static const std::regex kDoublePunct(R"(,\s*([.;:!?]))");

    std::string s(input);
    s = std::regex_replace(s, kParen, "");
    s = std::regex_replace(s, kShown, "");
    s = std::regex_replace(s, kSee, "");
    s = std::regex_replace(s, kZh, "");
    s = std::regex_replace(s, kSpaces, " ");
    s = std::regex_replace(s, kSpaceBeforePunct, "$1");
    s = std::regex_replace(s, kDoublePunct, "$1");
    return text::trim(s);
}

std::string cleaning_system_prompt() {
    return "You curate a dental knowledge base built from textbooks.\n"
           "For the paragraph you receive:\n"
           "1. Decide whether it is dental-domain knowledge worth keeping (keep=false for "
           "copyright notices, prefaces, indexes, publisher information and similar).\n"
           "2. Remove figure and table references such as \"as shown in Figure 3-2\" without "
           "changing anything else.\n"
           "3. If a target language is given, also translate the cleaned text into it.\n"
           "Reply with a single JSON object: {\"keep\": bool, \"cleaned_text\": string, "
           "\"translation\": string or null}.";
}

CleanResult clean_paragraph(const Paragraph& paragraph, gateway::ChatModel* model,
                            const CleanOptions& options) {
    CleanResult rule_based{true, strip_figure_references(paragraph.text), std::nullopt, std::nullopt, false};
    if (options.mode == CleanMode::dry_run) return rule_based;

    const bool translate = options.translate_to && *options.translate_to != paragraph.language;
    auto fail = [&](const std::string& why) -> CleanResult {
        if (options.mode == CleanMode::strict) throw Error("paragraph cleaning failed: " + why);
        CleanResult r{true, text::trim(paragraph.text), std::nullopt, std::nullopt, true};
        return r;
    };
    if (!model) return fail("no cleaning model configured");

    std::string user = "Book: " + paragraph.book_title + " (page " + std::to_string(paragraph.page) +
                       ")\nParagraph language: " + text::to_string(paragraph.language) + "\n";
    if (translate) user += "Target language: " + text::to_string(*options.translate_to) + "\n";
    user += "Paragraph:\n" + paragraph.text;

    gateway::Completion completion;
    try {
        completion = model->chat({{"system", cleaning_system_prompt(), {}}, {"user", user, {}}});
    } catch (const GatewayError& e) {
        return fail(e.what());
    }
    std::string body = text::trim(completion.text);
    if (body.rfind("```", 0) == 0) {
        auto first_nl = body.find('\n');
        auto last_fence = body.rfind("```");
        if (first_nl != std::string::npos && last_fence > first_nl)
            body = body.substr(first_nl + 1, last_fence - first_nl - 1);
    }
    json reply = json::parse(body, nullptr, false);
    if (reply.is_discarded() || !reply.is_object() || !reply.contains("keep") || !reply["keep"].is_boolean())
        return fail("model reply is not the expected JSON object");

    CleanResult r;
    r.keep = reply["keep"].get<bool>();
    r.cleaned_text = reply.contains("cleaned_text") && reply["cleaned_text"].is_string()
                         ? text::trim(reply["cleaned_text"].get<std::string>())
                         : rule_based.cleaned_text;
    if (translate && reply.contains("translation") && reply["translation"].is_string()) {
        r.translated_text = reply["translation"].get<std::string>();
        r.translated_language = options.translate_to;
    }
    return r;
}

// ---------------------------------------------------------------------------
// chunks and index

KnowledgeChunk::KnowledgeChunk(std::string chunk_id, std::string text, std::vector<float> embedding,
                               Provenance provenance, text::Language language)
    : chunk_id_(std::move(chunk_id)),
      text_(std::move(text)),
      embedding_(std::move(embedding)),
      provenance_(std::move(provenance)),
      language_(language),
      token_count_(text::count_tokens(text_)) {
    std::vector<std::string> bad;
    if (chunk_id_.empty()) bad.push_back("chunk_id: must be non-empty");
    if (text::trim(text_).empty()) bad.push_back("text: must be non-empty");
    if (text::trim(provenance_.book_title).empty()) bad.push_back("book_title: must be non-empty");
    if (provenance_.page < 1) bad.push_back("page: must be >= 1");
    if (!bad.empty()) throw ValidationError(std::move(bad));
}

KnowledgeChunk KnowledgeChunk::without_embedding() const {
    KnowledgeChunk copy = *this;
    copy.embedding_.clear();
    return copy;
}

json KnowledgeChunk::to_json(bool with_embedding) const {
    json j = {{"chunk_id", chunk_id_},
              {"text", text_},
              {"book_title", provenance_.book_title},
              {"page", provenance_.page},
              {"language", text::to_string(language_)},
              {"token_count", token_count_}};
    if (with_embedding) j["embedding"] = embedding_;
    return j;
}

KnowledgeChunk KnowledgeChunk::from_json(const json& j) {
    KnowledgeChunk c(j.at("chunk_id").get<std::string>(), j.at("text").get<std::string>(),
                     j.value("embedding", std::vector<float>{}),
                     Provenance{j.at("book_title").get<std::string>(), j.at("page").get<int>()},
                     text::language_from_string(j.value("language", std::string("other"))));
    if (j.contains("token_count") && j["token_count"].get<std::size_t>() != c.token_count())
        throw ValidationError("token_count", "does not match text for chunk " + c.chunk_id());
    return c;
}

std::vector<std::string> split_to_chunks(const std::string& input, std::size_t max_tokens) {
    if (max_tokens == 0) throw ValidationError("max_tokens", "must be > 0");
    const std::string t = text::trim(input);
    if (text::count_tokens(t) <= max_tokens) return {t};

    std::vector<std::string> out;
    std::string current;
    std::size_t current_tokens = 0;
    auto flush = [&] {
        if (!current.empty()) out.push_back(std::move(current));
        current.clear();
        current_tokens = 0;
    };
    for (const auto& sentence : text::split_sentences(t)) {
        const std::size_t n = text::count_tokens(sentence);
        if (n > max_tokens) {
            flush();
            std::string rest = sentence;
            while (!rest.empty()) {
                std::string head = text::trim(text::truncate_tokens(rest, max_tokens));
                if (head.empty()) break;
                rest = text::trim(std::string_view(rest).substr(text::truncate_tokens(rest, max_tokens).size()));
                out.push_back(std::move(head));
            }
            continue;
        }
        if (current_tokens + n > max_tokens) flush();
        current = text::join_fragments(current, sentence);
        current_tokens += n;
    }
    flush();
    return out;
}

std::vector<float> l2_normalize(std::vector<float> v) {
    double sq = 0;
    for (float x : v) sq += static_cast<double>(x) * x;
    if (!(sq > 0)) throw ValidationError("embedding", "zero vector cannot be normalised");
    const double inv = 1.0 / std::sqrt(sq);
    for (float& x : v) x = static_cast<float>(x * inv);
    return v;
}

double dot(std::span<const float> a, std::span<const float> b) {
    double acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * b[i];
    return acc;
}

VectorIndex::VectorIndex(std::string name, std::size_t dimension, std::string embedding_model,
                         TimePoint created_at)
    : name_(std::move(name)), dimension_(dimension), embedding_model_(std::move(embedding_model)),
      created_at_(created_at) {
    if (name_.empty()) throw ValidationError("name", "must be non-empty");
    if (dimension_ == 0) throw ValidationError("dimension", "must be > 0");
}

void VectorIndex::add(KnowledgeChunk chunk) {
    if (chunk.embedding().size() != dimension_)
        throw ValidationError("embedding", "dimension " + std::to_string(chunk.embedding().size()) +
                                               " != index dimension " + std::to_string(dimension_));
    const double norm = std::sqrt(dot(chunk.embedding(), chunk.embedding()));
    if (std::abs(norm - 1.0) > 1e-6)
        throw ValidationError("embedding", "not unit norm (" + std::to_string(norm) + ") for " + chunk.chunk_id());
    if (!ids_.insert(chunk.chunk_id()).second)
        throw ConflictError("duplicate chunk id " + chunk.chunk_id());
    chunks_.push_back(std::move(chunk));
}

void VectorIndex::save(const fs::path& dir) const {
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "chunks.jsonl", std::ios::trunc);
        for (const auto& c : chunks_) out << c.to_json(true).dump() << '\n';
        if (!out) throw Error("cannot write " + (dir / "chunks.jsonl").string());
    }
    json meta = {{"name", name_},
                 {"dimension", dimension_},
                 {"embedding_model", embedding_model_},
                 {"created_at", format_timestamp(created_at_)},
                 {"count", chunks_.size()}};
    std::ofstream(dir / "index.json", std::ios::trunc) << meta.dump(2) << '\n';
}

VectorIndex VectorIndex::load(const fs::path& dir) {
    std::ifstream meta_in(dir / "index.json");
    if (!meta_in) throw NotFoundError("no index metadata in " + dir.string());
    json meta = json::parse(meta_in, nullptr, false);
    if (meta.is_discarded() || !meta.is_object()) throw CorruptFileError("index.json is not valid JSON");
    VectorIndex index(meta.at("name").get<std::string>(), meta.at("dimension").get<std::size_t>(),
                      meta.value("embedding_model", std::string{}),
                      parse_timestamp(meta.at("created_at").get<std::string>()));
    std::ifstream in(dir / "chunks.jsonl");
    if (!in) throw NotFoundError("no chunk store in " + dir.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw CorruptFileError("chunks.jsonl:" + std::to_string(lineno) + ": not valid JSON");
        try {
            index.add(KnowledgeChunk::from_json(j));
        } catch (const std::exception& e) {
            throw CorruptFileError("chunks.jsonl:" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (index.size() != meta.value("count", index.size()))
        throw CorruptFileError("index.json count " + meta["count"].dump() + " != " + std::to_string(index.size()) +
                               " stored chunks");
    return index;
}

bool VectorIndex::content_equals(const VectorIndex& other) const {
    return name_ == other.name_ && dimension_ == other.dimension_ &&
           embedding_model_ == other.embedding_model_ && chunks_ == other.chunks_;
}

VectorIndex build_index(const std::vector<Paragraph>& paragraphs, gateway::Embedder& embedder,
                        const ChunkingConfig& chunking, std::string index_name, const Clock& clock) {
    if (paragraphs.empty()) throw ValidationError("paragraphs", "empty input");
    if (chunking.batch_size == 0) throw ValidationError("batch_size", "must be > 0");

    struct Piece {
        std::string text;
        const Paragraph* source;
    };
    std::vector<Piece> pieces;
    for (const auto& p : paragraphs) {
        for (auto& t : split_to_chunks(p.text, chunking.max_tokens)) pieces.push_back({std::move(t), &p});
    }

    std::optional<VectorIndex> index;
    std::size_t seq = 0;
    for (std::size_t start = 0; start < pieces.size(); start += chunking.batch_size) {
        const std::size_t end = std::min(pieces.size(), start + chunking.batch_size);
        std::vector<std::string> batch;
        for (std::size_t i = start; i < end; ++i) batch.push_back(pieces[i].text);
        auto vectors = embedder.embed(batch);
        if (vectors.size() != batch.size())
            throw GatewayError(GatewayError::Kind::malformed, "embedder returned a different batch size");
        for (std::size_t i = 0; i < vectors.size(); ++i) {
            if (!index) index.emplace(index_name, vectors[i].size(), embedder.model_id(), clock.now());
            if (vectors[i].size() != index->dimension())
                throw GatewayError(GatewayError::Kind::dimension_mismatch,
                                   "embedding dimension changed from " + std::to_string(index->dimension()) +
                                       " to " + std::to_string(vectors[i].size()));
            const Piece& piece = pieces[start + i];
            char id[32];
            std::snprintf(id, sizeof id, "-%08zu", ++seq);
            index->add(KnowledgeChunk(index_name + id, piece.text, l2_normalize(std::move(vectors[i])),
                                      {piece.source->book_title, piece.source->page}, piece.source->language));
        }
    }
    return std::move(*index);
}

// ---------------------------------------------------------------------------
// retrieval

namespace {

bool candidate_before(double sa, const std::string& ia, double sb, const std::string& ib) {
    if (sa != sb) return sa > sb;
    return ia < ib;
}

}  // namespace

std::vector<Candidate> retrieve(std::span<const float> query_embedding, std::size_t k,
                                std::span<const VectorIndex* const> indexes, const RetrieveOptions& options) {
    if (k == 0) throw ValidationError("k", "must be >= 1");
    std::size_t total = 0;
    bool language_hit = false;
    for (const VectorIndex* index : indexes) {
        if (index->size() > 0 && index->dimension() != query_embedding.size())
            throw ValidationError("query", "embedding dimension " + std::to_string(query_embedding.size()) +
                                               " != index dimension " + std::to_string(index->dimension()));
        total += index->size();
        if (options.language) {
            for (const auto& c : index->chunks()) language_hit = language_hit || c.language() == *options.language;
        }
    }
    if (total == 0) throw ValidationError("index", "empty index");
    const bool filter = options.language.has_value() && language_hit;

    std::vector<std::pair<double, const KnowledgeChunk*>> scored;
    scored.reserve(total);
    for (const VectorIndex* index : indexes) {
        for (const auto& c : index->chunks()) {
            if (filter && c.language() != *options.language) continue;
            scored.emplace_back(dot(query_embedding, c.embedding()), &c);
        }
    }
    const std::size_t n = std::min(2 * k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(),
                      [](const auto& a, const auto& b) {
                          return candidate_before(a.first, a.second->chunk_id(), b.first, b.second->chunk_id());
                      });
    std::vector<Candidate> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back({*scored[i].second, scored[i].first});
    return out;
}

std::vector<Candidate> retrieve(const std::string& query, std::size_t k, const VectorIndex& index,
                                gateway::Embedder& embedder) {
    auto vectors = embedder.embed({query});
    const auto q = l2_normalize(std::move(vectors.at(0)));
    const VectorIndex* one[] = {&index};
    return retrieve(q, k, one);
}

json KnowledgeItem::to_json() const {
    json j = chunk.to_json(false);
    j["retrieval_score"] = retrieval_score;
    j["rerank_score"] = rerank_score;
    j["rank"] = rank;
    if (degraded) j["degraded"] = true;
    return j;
}

KnowledgeItem KnowledgeItem::from_json(const json& j) {
    return {KnowledgeChunk::from_json(j), j.value("retrieval_score", 0.0), j.value("rerank_score", 0.0),
            j.value("rank", 0), j.value("degraded", false)};
}

std::vector<KnowledgeItem> rerank(const std::string& query, const std::vector<Candidate>& candidates,
                                  std::size_t k, gateway::Reranker* reranker) {
    if (k == 0) throw ValidationError("k", "must be >= 1");
    if (candidates.empty()) return {};

    std::vector<double> scores;
    bool degraded = reranker == nullptr;
    if (!degraded) {
        std::vector<std::string> docs;
        docs.reserve(candidates.size());
        for (const auto& c : candidates) docs.push_back(c.chunk.text());
        try {
            scores = reranker->rerank_score(query, docs);
            degraded = scores.size() != candidates.size();
        } catch (const std::exception&) {
            degraded = true;
        }
    }
    if (degraded) {
        scores.clear();
        for (const auto& c : candidates) scores.push_back(c.score);
    }

    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        if (candidates[a].score != candidates[b].score) return candidates[a].score > candidates[b].score;
        return candidates[a].chunk.chunk_id() < candidates[b].chunk.chunk_id();
    });

    std::vector<KnowledgeItem> out;
    const std::size_t n = std::min(k, candidates.size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto& c = candidates[order[i]];
        out.push_back({c.chunk.without_embedding(), c.score, scores[order[i]], static_cast<int>(i + 1), degraded});
    }
    return out;
}

// ---------------------------------------------------------------------------
// knowledge base

KnowledgeBase::KnowledgeBase(std::shared_ptr<gateway::Embedder> embedder,
                             std::shared_ptr<gateway::Reranker> reranker, KnowledgeBaseOptions options)
    : embedder_(std::move(embedder)), reranker_(std::move(reranker)), options_(options),
      snapshot_(std::make_shared<const Snapshot>()) {
    if (!embedder_) throw ValidationError("embedder", "required");
}

std::shared_ptr<const KnowledgeBase::Snapshot> KnowledgeBase::snapshot() const {
    std::lock_guard lock(mu_);
    return snapshot_;
}

void KnowledgeBase::set_main_index(std::shared_ptr<const VectorIndex> index) {
    std::lock_guard lock(mu_);
    main_ = std::move(index);
    auto next = std::make_shared<Snapshot>();
    if (main_) next->indexes.push_back(main_);
    next->indexes.insert(next->indexes.end(), private_.begin(), private_.end());
    snapshot_ = std::move(next);
}

void KnowledgeBase::add_private_index(std::shared_ptr<const VectorIndex> index) {
    std::lock_guard lock(mu_);
    private_.push_back(std::move(index));
    auto next = std::make_shared<Snapshot>();
    if (main_) next->indexes.push_back(main_);
    next->indexes.insert(next->indexes.end(), private_.begin(), private_.end());
    snapshot_ = std::move(next);
}

std::size_t KnowledgeBase::chunk_count() const {
    std::size_t n = 0;
    for (const auto& i : snapshot()->indexes) n += i->size();
    return n;
}

std::vector<KnowledgeItem> KnowledgeBase::query_knowledge(const std::string& query, std::size_t k,
                                                          std::optional<text::Language> language) const {
    if (text::trim(query).empty()) throw ValidationError("query", "must be non-empty");
    auto snap = snapshot();
    std::vector<const VectorIndex*> indexes;
    for (const auto& i : snap->indexes) indexes.push_back(i.get());

    auto vectors = embedder_->embed({query});
    if (vectors.size() != 1) throw GatewayError(GatewayError::Kind::malformed, "expected one query embedding");
    const auto q = l2_normalize(std::move(vectors.front()));

    RetrieveOptions options;
    if (!options_.cross_language && language && *language != text::Language::other) options.language = language;
    auto candidates = retrieve(q, k, indexes, options);
    return rerank(query, candidates, k, reranker_.get());
}

tools::ToolDescriptor KnowledgeBase::tool_descriptor(std::size_t default_k) const {
    tools::ToolDescriptor d;
    d.name = kToolName;
    d.task = tools::Task::retrieval;
    d.functions = {"Retrieve cited passages from the dental textbook corpus"};
    d.description = "Searches the indexed dental textbooks and guidelines and returns the top-k passages "
                    "with book title and page number. Default k is " + std::to_string(default_k) + ".";
    d.arg_schema = {{"type", "object"},
                    {"properties",
                     {{"query", {{"type", "string"}, {"minLength", 1}}},
                      {"k", {{"type", "integer"}, {"minimum", 1}, {"maximum", 50}}}}},
                    {"required", {"query"}},
                    {"additionalProperties", false}};
    const json item = {{"type", "object"},
                       {"required", {"chunk_id", "text", "book_title", "page", "rank"}},
                       {"properties",
                        {{"chunk_id", {{"type", "string"}}},
                         {"text", {{"type", "string"}}},
                         {"book_title", {{"type", "string"}, {"minLength", 1}}},
                         {"page", {{"type", "integer"}, {"minimum", 1}}},
                         {"rank", {{"type", "integer"}, {"minimum", 1}}},
                         {"retrieval_score", {{"type", "number"}}},
                         {"rerank_score", {{"type", "number"}}}}}};
    d.output_schema = {{"type", "object"},
                       {"required", {"items"}},
                       {"properties", {{"items", {{"type", "array"}, {"items", item}}}}}};
    d.endpoint = "local:rag";
    d.performance_note = "exact cosine top-2k, reranked to top-k";
    return d;
}

tools::LocalHandler KnowledgeBase::tool_handler(std::size_t default_k) const {
    return [this, default_k](const tools::ToolCall& call) -> json {
        try {
            const std::size_t k = call.args.contains("k") ? call.args["k"].get<std::size_t>() : default_k;
            json items = json::array();
            for (const auto& item : query_knowledge(call.args.at("query").get<std::string>(), k,
                                                    text::detect_language(call.args.at("query").get<std::string>())))
                items.push_back(item.to_json());
            return {{"status", "ok"}, {"payload", {{"items", items}}}, {"artifacts", json::array()}};
        } catch (const std::exception& e) {
            return {{"status", "error"}, {"error", e.what()}};
        }
    };
}

// ---------------------------------------------------------------------------
// private knowledge bases

ParsedDocument parse_private_file(const fs::path& path, const PrivateIngestOptions& options) {
    if (!fs::exists(path)) throw NotFoundError("no such file " + path.string());
    const std::string ext = text::to_lower(path.extension().string());
    if (ext == ".txt" || ext == ".md") {
        std::ifstream in(path);
        std::stringstream ss;
        ss << in.rdbuf();
        const std::string content = ss.str();

        ParsedDocument doc;
        doc.book_title = path.stem().string();
        doc.language = text::detect_language(content) == text::Language::zh ? text::Language::zh : text::Language::en;

        std::vector<std::string> raw_blocks;
        std::string current;
        std::istringstream lines(content);
        std::string line;
        while (std::getline(lines, line)) {
            if (text::trim(line).empty()) {
                if (!text::trim(current).empty()) raw_blocks.push_back(current);
                current.clear();
                continue;
            }
            if (ext == ".md" && text::trim(line).rfind('#', 0) == 0) {
                if (!text::trim(current).empty()) raw_blocks.push_back(current);
                current.clear();
                raw_blocks.push_back(line);
                continue;
            }
            current += (current.empty() ? "" : " ") + text::trim(line);
        }
        if (!text::trim(current).empty()) raw_blocks.push_back(current);

        int page = 0;
        for (const auto& rb : raw_blocks) {
            const std::string t = text::trim(rb);
            if (ext == ".md" && t.rfind('#', 0) == 0) {
                doc.blocks.push_back({BlockKind::title, text::trim(t.substr(t.find_first_not_of('#'))), page + 1});
            } else {
                doc.blocks.push_back({BlockKind::paragraph, t, ++page});
            }
        }
        return doc;
    }
    if (ext == ".doc" || ext == ".pdf") {
        if (options.parser_command.empty())
            throw UnsupportedError("no parser command configured for " + ext + " files");
        std::string cmd = options.parser_command;
        const std::string quoted = "'" + path.string() + "'";
        if (auto pos = cmd.find("{input}"); pos != std::string::npos) cmd.replace(pos, 7, quoted);
        else cmd += " " + quoted;
        FILE* pipe = ::popen(cmd.c_str(), "r");
        if (!pipe) throw Error("cannot run parser command: " + cmd);
        std::string output;
        char buf[4096];
        while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) output.append(buf, n);
        const int status = ::pclose(pipe);
        if (status != 0) throw Error("parser command failed with status " + std::to_string(status) + ": " + cmd);
        json j = json::parse(output, nullptr, false);
        if (j.is_discarded()) throw Error("parser command did not print ParsedDocument JSON");
        return ParsedDocument::from_json(j);
    }
    throw UnsupportedError("unsupported extension \"" + ext + "\" (expected .txt, .md, .doc or .pdf)");
}

VectorIndex ingest_private_kb(const fs::path& path, gateway::Embedder& embedder,
                              const PrivateIngestOptions& options, const Clock& clock) {
    const ParsedDocument doc = parse_private_file(path, options);
    std::vector<Paragraph> kept;
    for (auto& p : postprocess_parsed(doc)) {
        CleanResult r = clean_paragraph(p, options.cleaner, options.cleaning);
        if (!r.keep || text::trim(r.cleaned_text).empty()) continue;
        p.text = r.cleaned_text;
        kept.push_back(std::move(p));
    }
    return build_index(kept, embedder, options.chunking, options.index_name, clock);
}

}  // namespace dentra::rag
