// SPDX-License-Identifier: Apache-2.0
#include "dentra/service.hpp"

#include <httplib.h>

#include "http_server.hpp"

#include <cstdio>
#include <random>
#include <sstream>

#include "dentra/crypto.hpp"
#include "dentra/error.hpp"
#include "dentra/text.hpp"

namespace dentra {

std::string_view to_string(SessionStatus status) {
    switch (status) {
        case SessionStatus::idle: return "idle";
        case SessionStatus::running: return "running";
        case SessionStatus::awaiting_user: return "awaiting_user";
        case SessionStatus::closed: return "closed";
    }
    return "idle";
}

json SessionHandle::to_json() const {
    return {{"session_id", session_id},
            {"created_at", format_timestamp(created_at)},
            {"config", config.to_json()},
            {"status", to_string(status)}};
}

std::vector<AgentEvent> parse_sse_frames(const std::string& body) {
    std::vector<AgentEvent> out;
    std::istringstream in(body);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.rfind("data: ", 0) == 0) out.push_back(AgentEvent::from_json(json::parse(line.substr(6))));
    }
    return out;
}

namespace {

bool is_loopback(const std::string& host) {
    return host == "127.0.0.1" || host == "localhost" || host == "::1" || host.rfind("127.", 0) == 0;
}

std::string random_session_id() {
    static std::mutex mu;
    static std::mt19937_64 rng{std::random_device{}()};
    std::lock_guard lock(mu);
    char buf[24];
    std::snprintf(buf, sizeof buf, "s-%016llx", static_cast<unsigned long long>(rng()));
    return buf;
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message, const json& extra = json::object()) {
    json body = extra;
    body["error"] = message;
    send_json(res, status, body);
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
    try {
        fn();
    } catch (const NotFoundError& e) {
        send_error(res, 404, e.what());
    } catch (const ConflictError& e) {
        send_error(res, 409, e.what());
    } catch (const PayloadTooLargeError& e) {
        send_error(res, 413, e.what());
    } catch (const SchemaError& e) {
        send_error(res, 400, e.what(), {{"path", e.path()}});
    } catch (const ValidationError& e) {
        send_error(res, 400, e.what(), {{"fields", e.fields()}});
    } catch (const UnsupportedError& e) {
        send_error(res, 400, e.what());
    } catch (const GatewayError& e) {
        send_error(res, 502, e.what());
    } catch (const std::exception& e) {
        send_error(res, 500, e.what());
    }
}

}  // namespace

ApiService::ApiService(Deps deps, ServiceOptions options) : deps_(std::move(deps)), options_(std::move(options)) {
    if (!deps_.comprehension) throw ValidationError("comprehension", "required");
    if (!deps_.agent) throw ValidationError("agent", "required");
    if (!deps_.registry) throw ValidationError("registry", "required");
    if (!deps_.artifacts) throw ValidationError("artifacts", "required");
    if (!deps_.clock) deps_.clock = system_clock();
    options_.session_defaults.validate();
}

ApiService::~ApiService() { stop(); }

std::shared_ptr<ApiService::Session> ApiService::find(const std::string& session_id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw NotFoundError("unknown session " + session_id);
    return it->second;
}

bool ApiService::running(const std::string& session_id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(session_id);
    return it != sessions_.end() && it->second->handle.status == SessionStatus::running;
}

SessionHandle ApiService::create_session(const json& overrides) {
    SessionHandle h;
    h.config = overrides.is_null() ? options_.session_defaults
                                   : SessionConfig::from_json(overrides, options_.session_defaults);
    h.created_at = deps_.clock->now();
    auto s = std::make_shared<Session>();
    std::lock_guard lock(mu_);
    do {
        h.session_id = random_session_id();
    } while (sessions_.count(h.session_id));
    s->handle = h;
    sessions_[h.session_id] = s;
    return h;
}

SessionHandle ApiService::session(const std::string& session_id) const {
    auto s = find(session_id);
    std::lock_guard lock(mu_);
    return s->handle;
}

std::shared_ptr<EventLog> ApiService::events(const std::string& session_id) const { return find(session_id)->log; }

bool ApiService::wait_idle(const std::string& session_id, std::chrono::milliseconds timeout) const {
    auto s = find(session_id);
    std::unique_lock lock(mu_);
    return idle_cv_.wait_for(lock, timeout, [&] { return s->handle.status != SessionStatus::running; });
}

PostedMessage ApiService::post_message(const std::string& session_id, const std::string& text,
                                       std::vector<Upload> images) {
    auto s = find(session_id);
    if (text::trim(text).empty()) throw ValidationError("text", "must be non-empty");
    std::vector<std::string> media_types;
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (images[i].bytes.size() > options_.max_image_bytes)
            throw PayloadTooLargeError("image " + std::to_string(i + 1) + " is " +
                                       std::to_string(images[i].bytes.size()) + " bytes; limit is " +
                                       std::to_string(options_.max_image_bytes));
        auto type = gateway::sniff_image_type(images[i].bytes);
        if (!type) throw ValidationError("images/" + std::to_string(i), "not a decodable image");
        media_types.push_back(*type);
    }

    PostedMessage posted;
    std::vector<std::vector<std::uint8_t>> bytes;
    {
        std::lock_guard lock(mu_);
        if (s->handle.status == SessionStatus::running) throw ConflictError("a run is already in progress");
        if (s->handle.status == SessionStatus::closed) throw ConflictError("session is closed");
        if (s->worker.joinable()) s->worker.join();
        s->handle.status = SessionStatus::running;
        posted.run_id = "run-" + std::to_string(++s->run_counter);
        for (std::size_t i = 0; i < images.size(); ++i) {
            InstructionImage img;
            img.image_id = "img-" + std::to_string(++s->image_counter);
            img.ref = deps_.artifacts->put(images[i].bytes, media_types[i]);
            posted.images.push_back(img);
            bytes.push_back(std::move(images[i].bytes));
        }
        s->worker = std::thread(&ApiService::execute_run, this, session_id, text, posted.images, std::move(bytes));
    }
    return posted;
}

void ApiService::execute_run(const std::string& session_id, std::string text, std::vector<InstructionImage> images,
                             std::vector<std::vector<std::uint8_t>> bytes) {
    std::shared_ptr<Session> s = find(session_id);
    SessionConfig config;
    {
        std::lock_guard lock(mu_);
        config = s->handle.config;
    }
    SessionStatus next = SessionStatus::idle;
    try {
        const IntentResult intents = deps_.comprehension->recognize_intent(text);
        if (!bytes.empty()) {
            const auto labels = deps_.comprehension->classify_all(bytes);
            for (std::size_t i = 0; i < images.size(); ++i) images[i].modality = labels[i];
        }
        const StructuredInstruction instruction =
            build_structured_instruction(std::move(text), std::move(images), intents.labels, *deps_.clock);
        const FinalResponse resp = deps_.agent->run_session(session_id, instruction, config, *s->log);
        if (resp.awaiting_user) next = SessionStatus::awaiting_user;
    } catch (const std::exception& e) {
        s->log->append(EventKind::error, {{"message", e.what()}}, deps_.clock->now());
    }
    {
        std::lock_guard lock(mu_);
        s->handle.status = next;
    }
    idle_cv_.notify_all();
}

void ApiService::install_routes() {
    auto& svr = *server_;

    svr.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
        if (!options_.auth_token || req.path == "/healthz") return httplib::Server::HandlerResponse::Unhandled;
        if (req.get_header_value("Authorization") != "Bearer " + *options_.auth_token) {
            res.set_header("WWW-Authenticate", "Bearer");
            send_error(res, 401, "missing or invalid bearer token");
            return httplib::Server::HandlerResponse::Handled;
        }
        return httplib::Server::HandlerResponse::Unhandled;
    });

    svr.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, {{"status", "ok"}});
    });

    svr.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            json overrides = json::object();
            if (!text::trim(req.body).empty()) {
                overrides = json::parse(req.body, nullptr, false);
                if (overrides.is_discarded()) throw ValidationError("body", "not valid JSON");
            }
            send_json(res, 201, create_session(overrides).to_json());
        });
    });

    svr.Get(R"(/sessions/([A-Za-z0-9_-]+))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const std::string id = req.matches[1];
            json body = session(id).to_json();
            body["last_seq"] = events(id)->last_seq();
            send_json(res, 200, body);
        });
    });

    svr.Post(R"(/sessions/([A-Za-z0-9_-]+)/messages)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const std::string id = req.matches[1];
            std::string text;
            std::vector<Upload> uploads;
            if (req.is_multipart_form_data()) {
                text = req.get_file_value("text").content;
                for (const auto& f : req.get_file_values("images"))
                    uploads.push_back({std::vector<std::uint8_t>(f.content.begin(), f.content.end()), f.filename});
            } else {
                json body = json::parse(req.body, nullptr, false);
                if (body.is_discarded() || !body.is_object()) throw ValidationError("body", "not a JSON object");
                text = body.value("text", std::string{});
                for (const auto& img : body.value("images", json::array())) {
                    const std::string data = img.is_string() ? img.get<std::string>() : img.value("data", "");
                    auto bytes = crypto::base64_decode(data);
                    if (!bytes) throw ValidationError("images", "not valid base64");
                    uploads.push_back({std::move(*bytes), img.is_object() ? img.value("filename", "") : ""});
                }
            }
            const PostedMessage posted = post_message(id, text, std::move(uploads));
            json imgs = json::array();
            for (const auto& i : posted.images) imgs.push_back({{"image_id", i.image_id}, {"ref", i.ref}});
            send_json(res, 202, {{"session_id", id}, {"run_id", posted.run_id}, {"images", imgs}});
        });
    });

    svr.Get(R"(/sessions/([A-Za-z0-9_-]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const std::string id = req.matches[1];
            auto log = events(id);
            std::uint64_t from = 0;
            if (req.has_param("from_seq")) {
                try {
                    from = std::stoull(req.get_param_value("from_seq"));
                } catch (const std::exception&) {
                    throw ValidationError("from_seq", "must be a non-negative integer");
                }
            }
            auto cursor = std::make_shared<std::uint64_t>(from);
            res.set_header("Cache-Control", "no-cache");
            res.set_chunked_content_provider(
                "text/event-stream", [this, id, log, cursor](std::size_t, httplib::DataSink& sink) {
                    if (stopping_) {
                        sink.done();
                        return true;
                    }
                    for (const auto& e : log->wait_after(*cursor, options_.stream_idle_poll)) {
                        const std::string frame =
                            "id: " + std::to_string(e.seq) + "\ndata: " + e.to_json().dump() + "\n\n";
                        if (!sink.write(frame.data(), frame.size())) return false;
                        *cursor = e.seq;
                    }
                    const std::uint64_t last = log->last_seq();
                    if (*cursor >= last && !running(id)) {
                        const auto tail = log->after(last == 0 ? 0 : last - 1);
                        if (tail.empty() || is_terminal(tail.back().kind)) sink.done();
                    }
                    return true;
                });
        });
    });

    svr.Get("/tools", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            tools::ToolFilter filter;
            if (req.has_param("modality")) {
                std::stringstream ss(req.get_param_value("modality"));
                std::string m;
                while (std::getline(ss, m, ',')) {
                    auto mod = modality_from_string(text::trim(m));
                    if (!mod) throw ValidationError("modality", "unknown modality " + m);
                    filter.modalities.insert(*mod);
                }
            }
            if (req.has_param("task")) {
                filter.task = tools::task_from_string(req.get_param_value("task"));
                if (!filter.task) throw ValidationError("task", "unknown task " + req.get_param_value("task"));
            }
            json out = json::array();
            for (const auto& d : deps_.registry->list_tools(filter)) out.push_back(d.to_json());
            send_json(res, 200, {{"tools", out}});
        });
    });

    svr.Get("/knowledge/search", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            if (!deps_.kb) {
                send_error(res, 503, "no knowledge base configured");
                return;
            }
            const std::string q = req.get_param_value("q");
            if (text::trim(q).empty()) throw ValidationError("q", "must be non-empty");
            std::size_t k = options_.session_defaults.k_default;
            if (req.has_param("k")) {
                long long v = 0;
                try {
                    v = std::stoll(req.get_param_value("k"));
                } catch (const std::exception&) {
                    throw ValidationError("k", "must be an integer");
                }
                if (v < 1) throw ValidationError("k", "must be >= 1");
                k = static_cast<std::size_t>(v);
            }
            json items = json::array();
            for (const auto& item : deps_.kb->query_knowledge(q, k, text::detect_language(q)))
                items.push_back(item.to_json());
            send_json(res, 200, {{"items", items}});
        });
    });

    svr.Get(R"(/artifacts/([0-9a-f]{64}))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto a = deps_.artifacts->get(req.matches[1]);
            if (!a) throw NotFoundError("unknown artifact");
            res.set_content(std::string(a->bytes.begin(), a->bytes.end()), a->media_type);
        });
    });
}

int ApiService::start(int port) {
    if (server_) throw Error("service already started");
    if (!is_loopback(options_.host) && !options_.auth_token)
        throw Error("binding " + options_.host + " requires a bearer token");
    server_ = detail::make_http_server();
    server_->new_task_queue = [] { return new httplib::ThreadPool(32); };
    server_->set_payload_max_length(options_.max_image_bytes * 8 + (1 << 20));
    install_routes();
    port_ = port == 0 ? server_->bind_to_any_port(options_.host)
                      : (server_->bind_to_port(options_.host, port) ? port : -1);
    if (port_ <= 0) {
        server_.reset();
        throw Error("cannot bind " + options_.host + ":" + std::to_string(port));
    }
    stopping_ = false;
    server_thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port_;
}

void ApiService::stop() {
    stopping_ = true;
    if (server_) {
        server_->stop();
        if (server_thread_.joinable()) server_thread_.join();
        server_.reset();
    }
    std::vector<std::shared_ptr<Session>> all;
    {
        std::lock_guard lock(mu_);
        for (auto& [_, s] : sessions_) all.push_back(s);
    }
    for (auto& s : all)
        if (s->worker.joinable()) s->worker.join();
}

std::string ApiService::base_url() const { return "http://" + options_.host + ":" + std::to_string(port_); }

}  // namespace dentra
