// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "dentra/artifacts.hpp"
#include "dentra/clock.hpp"
#include "dentra/gateway.hpp"
#include "dentra/json.hpp"
#include "dentra/labels.hpp"

namespace dentra::tools {

using Millis = std::chrono::milliseconds;

inline constexpr Millis kDefaultToolTimeout{30000};

enum class Task {
    classification,
    detection,
    segmentation,
    keypoint_detection,
    report_generation,
    visual_qa,
    visual_description,
    retrieval,
};

std::string_view to_string(Task task);
std::optional<Task> task_from_string(std::string_view s);

struct ToolDescriptor {
    std::string name;
    std::string catalog_no;         // e.g. "T01"; informational
    std::set<Modality> modalities;  // empty = modality-agnostic
    Task task = Task::classification;
    std::vector<std::string> functions;
    std::string description;
    json arg_schema = json::object();
    json output_schema = json::object();
    std::string endpoint;  // http(s) URL, a path resolved against a base URL, or local:<name>
    Millis timeout = kDefaultToolTimeout;
    std::string performance_note;

    // Throws ValidationError for field problems and SchemaError naming the
    // offending pointer (prefixed /arg_schema or /output_schema).
    void validate() const;
    json to_json() const;
    static ToolDescriptor from_json(const json& j);
    gateway::ToolSpec to_tool_spec() const;
};

struct ToolCall {
    std::string call_id;
    TimePoint timestamp{};
    std::string tool_name;
    json args = json::object();

    json to_json() const;
    static ToolCall from_json(const json& j);
    friend bool operator==(const ToolCall&, const ToolCall&) = default;
};

enum class ToolStatus { ok, tool_error, timeout, schema_violation };

std::string_view to_string(ToolStatus status);
std::optional<ToolStatus> status_from_string(std::string_view s);

struct ToolResult {
    std::string call_id;
    std::string tool_name;
    ToolStatus status = ToolStatus::tool_error;
    json payload;      // set only when status is ok
    json raw_payload;  // what the tool returned when it failed output validation
    std::string error;
    std::vector<std::string> artifacts;  // artifact-store ids
    Millis latency{0};

    json to_json() const;
    static ToolResult from_json(const json& j);
    friend bool operator==(const ToolResult&, const ToolResult&) = default;
};

struct ToolFilter {
    std::set<Modality> modalities;  // empty = no modality constraint
    std::optional<Task> task;
};

// In-process tool implementation; returns the same {status, payload, artifacts}
// object an HTTP tool endpoint would.
using LocalHandler = std::function<json(const ToolCall&)>;

struct CatalogOptions {
    std::string endpoint_base;  // prefix for endpoints given as bare paths
    bool replace = false;
};

class ToolRegistry {
public:
    explicit ToolRegistry(std::shared_ptr<const Clock> clock = system_clock());

    // Registers a validated descriptor; throws ConflictError on a duplicate name
    // unless `replace` is set.
    std::string register_tool(ToolDescriptor descriptor, bool replace = false);
    bool remove_tool(const std::string& name);
    // Modality filter keeps tools whose modality set intersects the filter; name order.
    std::vector<ToolDescriptor> list_tools(const ToolFilter& filter = {}) const;
    std::optional<ToolDescriptor> find(const std::string& name) const;
    std::size_t size() const;
    std::vector<gateway::ToolSpec> tool_specs() const;

    // Validates (after scalar coercion) and stamps a call. Throws NotFoundError
    // for unknown tools and SchemaError at the offending argument path.
    ToolCall format_call(const std::string& tool_name, const json& raw_args) const;
    ToolCall format_call(const std::string& tool_name, const json& raw_args, std::string call_id) const;

    // Dispatches every call concurrently against a snapshot of the catalog taken
    // at entry. Results come back in input order; failures are per-result.
    std::vector<ToolResult> execute_parallel(const std::vector<ToolCall>& calls,
                                             ArtifactStore* artifacts = nullptr) const;

    // Line-delimited JSON, one descriptor per non-blank line. All entries are
    // validated before any is registered; errors carry the line number.
    std::size_t load_catalog(const std::filesystem::path& path, const CatalogOptions& options = {});

    void bind_local(const std::string& name, LocalHandler handler);
    void set_concurrency_limit(std::size_t limit) { concurrency_limit_ = limit; }

private:
    using Catalog = std::map<std::string, ToolDescriptor>;
    std::shared_ptr<const Catalog> snapshot() const;
    ToolResult dispatch(const ToolDescriptor& tool, const ToolCall& call, ArtifactStore* artifacts) const;

    std::shared_ptr<const Clock> clock_;
    mutable std::shared_mutex mu_;
    std::shared_ptr<const Catalog> catalog_;
    std::map<std::string, LocalHandler> local_;
    std::size_t concurrency_limit_ = 0;
    mutable std::atomic<std::uint64_t> next_call_{1};
};

}  // namespace dentra::tools
