// SPDX-License-Identifier: Apache-2.0
#include "dentra/tools.hpp"

#include <httplib.h>

#include <fstream>
#include <thread>

#include "dentra/crypto.hpp"
#include "dentra/error.hpp"
#include "dentra/schema.hpp"

namespace dentra::tools {

namespace {

constexpr std::array<std::pair<Task, std::string_view>, 8> kTaskNames = {{
    {Task::classification, "classification"},
    {Task::detection, "detection"},
    {Task::segmentation, "segmentation"},
    {Task::keypoint_detection, "keypoint_detection"},
    {Task::report_generation, "report_generation"},
    {Task::visual_qa, "visual_qa"},
    {Task::visual_description, "visual_description"},
    {Task::retrieval, "retrieval"},
}};

constexpr std::array<std::pair<ToolStatus, std::string_view>, 4> kStatusNames = {{
    {ToolStatus::ok, "ok"},
    {ToolStatus::tool_error, "tool_error"},
    {ToolStatus::timeout, "timeout"},
    {ToolStatus::schema_violation, "schema_violation"},
}};

}  // namespace

std::string_view to_string(Task task) {
    for (auto [t, n] : kTaskNames)
        if (t == task) return n;
    return "classification";
}

std::optional<Task> task_from_string(std::string_view s) {
    for (auto [t, n] : kTaskNames)
        if (n == s) return t;
    return std::nullopt;
}

std::string_view to_string(ToolStatus status) {
    for (auto [t, n] : kStatusNames)
        if (t == status) return n;
    return "tool_error";
}

std::optional<ToolStatus> status_from_string(std::string_view s) {
    for (auto [t, n] : kStatusNames)
        if (n == s) return t;
    return std::nullopt;
}

void ToolDescriptor::validate() const {
    std::vector<std::string> bad;
    if (name.empty()) bad.push_back("name: must be non-empty");
    for (char c : name) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) {
            bad.push_back("name: only [A-Za-z0-9_-] allowed");
            break;
        }
    }
    if (endpoint.empty()) bad.push_back("endpoint: must be non-empty");
    if (timeout.count() <= 0) bad.push_back("timeout: must be > 0");
    if (modalities.count(Modality::unknown)) bad.push_back("modalities: unknown is not a tool modality");
    if (!bad.empty()) throw ValidationError(std::move(bad));
    if (auto issue = schema::check_document(arg_schema))
        throw SchemaError("/arg_schema" + issue->path, issue->message);
    if (auto issue = schema::check_document(output_schema))
        throw SchemaError("/output_schema" + issue->path, issue->message);
}

json ToolDescriptor::to_json() const {
    json mods = json::array();
    for (Modality m : modalities) mods.push_back(dentra::to_string(m));
    json j = {{"name", name},
              {"modalities", mods},
              {"task", to_string(task)},
              {"functions", functions},
              {"description", description},
              {"arg_schema", arg_schema},
              {"output_schema", output_schema},
              {"endpoint", endpoint},
              {"timeout_ms", timeout.count()},
              {"performance_note", performance_note}};
    if (!catalog_no.empty()) j["catalog_no"] = catalog_no;
    return j;
}

ToolDescriptor ToolDescriptor::from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("descriptor", "must be a JSON object");
    ToolDescriptor d;
    std::vector<std::string> bad;
    auto str = [&](const char* key, std::string& out, bool required) {
        if (!j.contains(key)) {
            if (required) bad.push_back(std::string(key) + ": missing");
            return;
        }
        if (!j[key].is_string()) bad.push_back(std::string(key) + ": must be a string");
        else out = j[key].get<std::string>();
    };
    str("name", d.name, true);
    str("catalog_no", d.catalog_no, false);
    str("description", d.description, false);
    str("endpoint", d.endpoint, true);
    str("performance_note", d.performance_note, false);
    if (j.contains("task")) {
        auto t = j["task"].is_string() ? task_from_string(j["task"].get<std::string>()) : std::nullopt;
        if (!t) bad.push_back("task: unknown value " + j["task"].dump());
        else d.task = *t;
    } else {
        bad.push_back("task: missing");
    }
    for (const auto& m : j.value("modalities", json::array())) {
        auto mod = m.is_string() ? modality_from_string(m.get<std::string>()) : std::nullopt;
        if (!mod) bad.push_back("modalities: unknown value " + m.dump());
        else d.modalities.insert(*mod);
    }
    if (j.contains("functions")) {
        if (!j["functions"].is_array()) bad.push_back("functions: must be an array");
        else
            for (const auto& f : j["functions"]) {
                if (f.is_string()) d.functions.push_back(f.get<std::string>());
                else bad.push_back("functions: entries must be strings");
            }
    }
    d.arg_schema = j.value("arg_schema", json::object());
    d.output_schema = j.value("output_schema", json::object());
    if (j.contains("timeout_ms")) {
        if (!j["timeout_ms"].is_number_integer()) bad.push_back("timeout_ms: must be an integer");
        else d.timeout = Millis(j["timeout_ms"].get<long long>());
    }
    if (!bad.empty()) throw ValidationError(std::move(bad));
    d.validate();
    return d;
}

gateway::ToolSpec ToolDescriptor::to_tool_spec() const {
    std::string desc = description;
    if (!functions.empty()) {
        desc += " Functions:";
        for (std::size_t i = 0; i < functions.size(); ++i) desc += (i ? ", " : " ") + functions[i];
        desc += ".";
    }
    if (!modalities.empty()) {
        desc += " Modalities:";
        bool first = true;
        for (Modality m : modalities) {
            desc += (first ? " " : ", ") + std::string(dentra::to_string(m));
            first = false;
        }
        desc += ".";
    }
    if (!performance_note.empty()) desc += " Reported performance: " + performance_note + ".";
    return {name, desc, arg_schema};
}

json ToolCall::to_json() const {
    return {{"call_id", call_id},
            {"timestamp", format_timestamp(timestamp)},
            {"tool_name", tool_name},
            {"args", args}};
}

ToolCall ToolCall::from_json(const json& j) {
    ToolCall c;
    c.call_id = j.at("call_id").get<std::string>();
    c.timestamp = parse_timestamp(j.at("timestamp").get<std::string>());
    c.tool_name = j.at("tool_name").get<std::string>();
    c.args = j.value("args", json::object());
    return c;
}

json ToolResult::to_json() const {
    json j = {{"call_id", call_id},
              {"tool_name", tool_name},
              {"status", to_string(status)},
              {"payload", payload},
              {"artifacts", artifacts},
              {"latency_ms", latency.count()}};
    if (!raw_payload.is_null()) j["raw_payload"] = raw_payload;
    if (!error.empty()) j["error"] = error;
    return j;
}

ToolResult ToolResult::from_json(const json& j) {
    ToolResult r;
    r.call_id = j.at("call_id").get<std::string>();
    r.tool_name = j.value("tool_name", std::string{});
    auto status = status_from_string(j.at("status").get<std::string>());
    if (!status) throw ValidationError("status", "unknown value " + j.at("status").dump());
    r.status = *status;
    r.payload = j.value("payload", json());
    r.raw_payload = j.value("raw_payload", json());
    r.error = j.value("error", std::string{});
    r.artifacts = j.value("artifacts", std::vector<std::string>{});
    r.latency = Millis(j.value("latency_ms", 0));
    return r;
}

ToolRegistry::ToolRegistry(std::shared_ptr<const Clock> clock)
    : clock_(std::move(clock)), catalog_(std::make_shared<const Catalog>()) {}

std::shared_ptr<const ToolRegistry::Catalog> ToolRegistry::snapshot() const {
    std::shared_lock lock(mu_);
    return catalog_;
}

std::string ToolRegistry::register_tool(ToolDescriptor descriptor, bool replace) {
    descriptor.validate();
    std::unique_lock lock(mu_);
    if (!replace && catalog_->count(descriptor.name))
        throw ConflictError("tool \"" + descriptor.name + "\" is already registered");
    auto next = std::make_shared<Catalog>(*catalog_);
    std::string name = descriptor.name;
    (*next)[name] = std::move(descriptor);
    catalog_ = std::move(next);
    return name;
}

bool ToolRegistry::remove_tool(const std::string& name) {
    std::unique_lock lock(mu_);
    if (!catalog_->count(name)) return false;
    auto next = std::make_shared<Catalog>(*catalog_);
    next->erase(name);
    catalog_ = std::move(next);
    return true;
}

std::vector<ToolDescriptor> ToolRegistry::list_tools(const ToolFilter& filter) const {
    auto catalog = snapshot();
    std::vector<ToolDescriptor> out;
    for (const auto& [name, d] : *catalog) {
        if (filter.task && d.task != *filter.task) continue;
        if (!filter.modalities.empty()) {
            bool hit = false;
            for (Modality m : filter.modalities) hit = hit || d.modalities.count(m);
            if (!hit) continue;
        }
        out.push_back(d);
    }
    return out;
}

std::optional<ToolDescriptor> ToolRegistry::find(const std::string& name) const {
    auto catalog = snapshot();
    if (auto it = catalog->find(name); it != catalog->end()) return it->second;
    return std::nullopt;
}

std::size_t ToolRegistry::size() const { return snapshot()->size(); }

std::vector<gateway::ToolSpec> ToolRegistry::tool_specs() const {
    std::vector<gateway::ToolSpec> out;
    for (const auto& [name, d] : *snapshot()) out.push_back(d.to_tool_spec());
    return out;
}

ToolCall ToolRegistry::format_call(const std::string& tool_name, const json& raw_args) const {
    return format_call(tool_name, raw_args, "call-" + std::to_string(next_call_++));
}

ToolCall ToolRegistry::format_call(const std::string& tool_name, const json& raw_args,
                                   std::string call_id) const {
    auto tool = find(tool_name);
    if (!tool) throw NotFoundError("unknown tool \"" + tool_name + "\"");
    json args = schema::coerce_scalars(tool->arg_schema, raw_args.is_null() ? json::object() : raw_args);
    if (auto issues = schema::validate(tool->arg_schema, args); !issues.empty())
        throw SchemaError(issues.front().path, issues.front().message);
    return {std::move(call_id), clock_->now(), tool_name, std::move(args)};
}

void ToolRegistry::bind_local(const std::string& name, LocalHandler handler) {
    std::unique_lock lock(mu_);
    local_[name] = std::move(handler);
}

namespace {

ToolResult interpret(const ToolDescriptor& tool, const ToolCall& call, const json& response,
                     ArtifactStore* store) {
    ToolResult r;
    r.call_id = call.call_id;
    r.tool_name = call.tool_name;
    if (!response.is_object()) {
        r.status = ToolStatus::tool_error;
        r.error = "tool response is not a JSON object";
        r.raw_payload = response;
        return r;
    }
    const std::string status = response.value("status", std::string("ok"));
    if (status != "ok") {
        r.status = ToolStatus::tool_error;
        r.error = response.value("error", "tool reported status " + status);
        return r;
    }
    for (const auto& a : response.value("artifacts", json::array())) {
        if (a.is_string()) {
            const auto id = a.get<std::string>();
            if (!store || store->contains(id)) r.artifacts.push_back(id);
        } else if (a.is_object() && a.contains("data_base64") && store) {
            auto bytes = crypto::base64_decode(a["data_base64"].get<std::string>());
            if (bytes)
                r.artifacts.push_back(store->put(*bytes, a.value("media_type", "application/octet-stream")));
        }
    }
    const json payload = response.value("payload", json());
    auto issues = schema::validate(tool.output_schema, payload);
    if (issues.empty()) {
        r.status = ToolStatus::ok;
        r.payload = payload;
    } else {
        r.status = ToolStatus::schema_violation;
        r.raw_payload = payload;
        r.error = "output violates schema at \"" + issues.front().path + "\": " + issues.front().message;
    }
    return r;
}

}  // namespace

ToolResult ToolRegistry::dispatch(const ToolDescriptor& tool, const ToolCall& call,
                                  ArtifactStore* artifacts) const {
    const auto started_wall = clock_->now();
    const auto started = std::chrono::steady_clock::now();
    auto finish = [&](ToolResult r) {
        r.latency = std::chrono::duration_cast<Millis>(clock_->now() - started_wall);
        return r;
    };
    auto failure = [&](ToolStatus status, std::string message) {
        ToolResult r;
        r.call_id = call.call_id;
        r.tool_name = call.tool_name;
        r.status = status;
        r.error = std::move(message);
        return finish(std::move(r));
    };

    if (tool.endpoint.rfind("local:", 0) == 0) {
        LocalHandler handler;
        {
            std::shared_lock lock(mu_);
            if (auto it = local_.find(tool.endpoint.substr(6)); it != local_.end()) handler = it->second;
        }
        if (!handler) return failure(ToolStatus::tool_error, "no local handler bound for " + tool.endpoint);
        try {
            return finish(interpret(tool, call, handler(call), artifacts));
        } catch (const std::exception& e) {
            return failure(ToolStatus::tool_error, e.what());
        }
    }

    const auto scheme = tool.endpoint.find("://");
    if (scheme == std::string::npos)
        return failure(ToolStatus::tool_error, "endpoint is not an absolute URL: " + tool.endpoint);
    const auto slash = tool.endpoint.find('/', scheme + 3);
    const std::string host = tool.endpoint.substr(0, slash);
    const std::string path = slash == std::string::npos ? "/" : tool.endpoint.substr(slash);

    httplib::Client client(host);
    const auto us = std::chrono::duration_cast<std::chrono::microseconds>(tool.timeout).count();
    client.set_connection_timeout(us / 1000000, us % 1000000);
    client.set_read_timeout(us / 1000000, us % 1000000);
    client.set_write_timeout(us / 1000000, us % 1000000);
    auto res = client.Post(path, call.to_json().dump(), "application/json");
    if (!res) {
        const auto elapsed = std::chrono::steady_clock::now() - started;
        if (res.error() == httplib::Error::Read && elapsed >= tool.timeout * 9 / 10)
            return failure(ToolStatus::timeout, "no response within " + std::to_string(tool.timeout.count()) + " ms");
        return failure(ToolStatus::tool_error, "unreachable: " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300)
        return failure(ToolStatus::tool_error, "HTTP " + std::to_string(res->status));
    json body = json::parse(res->body, nullptr, false);
    if (body.is_discarded()) return failure(ToolStatus::tool_error, "response body is not JSON");
    return finish(interpret(tool, call, body, artifacts));
}

std::vector<ToolResult> ToolRegistry::execute_parallel(const std::vector<ToolCall>& calls,
                                                       ArtifactStore* artifacts) const {
    std::vector<ToolResult> results(calls.size());
    if (calls.empty()) return results;
    const auto catalog = snapshot();

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < calls.size(); i = next++) {
            const auto& call = calls[i];
            auto it = catalog->find(call.tool_name);
            if (it == catalog->end()) {
                ToolResult r;
                r.call_id = call.call_id;
                r.tool_name = call.tool_name;
                r.status = ToolStatus::tool_error;
                r.error = "unknown tool \"" + call.tool_name + "\"";
                results[i] = std::move(r);
                continue;
            }
            results[i] = dispatch(it->second, call, artifacts);
        }
    };
    const std::size_t limit = concurrency_limit_ == 0 ? calls.size()
                                                      : std::min(concurrency_limit_, calls.size());
    std::vector<std::thread> pool;
    pool.reserve(limit);
    for (std::size_t i = 0; i < limit; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return results;
}

std::size_t ToolRegistry::load_catalog(const std::filesystem::path& path, const CatalogOptions& options) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open catalog " + path.string());
    std::vector<ToolDescriptor> parsed;
    std::map<std::string, std::size_t> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path.filename().string() + ":" + std::to_string(lineno) + ": ";
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw ValidationError("line " + std::to_string(lineno), where + "not valid JSON");
        ToolDescriptor d;
        try {
            d = ToolDescriptor::from_json(j);
        } catch (const SchemaError& e) {
            throw SchemaError(e.path(), where + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError("line " + std::to_string(lineno), where + e.what());
        }
        if (auto [it, fresh] = seen.emplace(d.name, lineno); !fresh)
            throw ConflictError(where + "duplicate tool name \"" + d.name + "\" (first on line " +
                                std::to_string(it->second) + ")");
        if (!options.endpoint_base.empty() && d.endpoint.rfind("/", 0) == 0) {
            std::string base = options.endpoint_base;
            while (!base.empty() && base.back() == '/') base.pop_back();
            d.endpoint = base + d.endpoint;
        }
        parsed.push_back(std::move(d));
    }
    if (!options.replace) {
        for (const auto& d : parsed)
            if (find(d.name)) throw ConflictError("tool \"" + d.name + "\" is already registered");
    }
    for (auto& d : parsed) register_tool(std::move(d), options.replace);
    return parsed.size();
}

}  // namespace dentra::tools
