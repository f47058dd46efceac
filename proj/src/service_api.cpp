#include "aipersona/service_api.hpp"

#include <set>

#include <httplib.h>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "aipersona/chatbot.hpp"
#include "aipersona/io_util.hpp"
#include "aipersona/text_util.hpp"

namespace aipersona::service {

namespace {

class ApiError : public std::runtime_error {
public:
    ApiError(ErrorCode code, const std::string& message) : std::runtime_error(message), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

nlohmann::json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return nlohmann::json::object();
    auto doc = nlohmann::json::parse(req.body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw ApiError(ErrorCode::BadRequest, "request body must be a JSON object");
    return doc;
}

std::optional<std::string> string_field(const nlohmann::json& body, const char* key) {
    if (!body.contains(key) || body[key].is_null()) return std::nullopt;
    if (!body[key].is_string()) throw ApiError(ErrorCode::BadRequest, fmt::format("'{}' must be a string", key));
    return body[key].get<std::string>();
}

nlohmann::json diff_to_json(const std::vector<FieldDiff>& diff) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& d : diff) out.push_back({{"field", field_name(d.field)}, {"old_value", d.old_value}, {"new_value", d.new_value}});
    return out;
}

}  // namespace

struct Service::UserState {
    PersonaProfile persona;
    chatbot::UpdateSchedule schedule;
    Locale locale = Locale::En;
    std::optional<std::string> last_updated;
};

std::string_view error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::BadRequest: return "bad_request";
        case ErrorCode::NotFound: return "not_found";
        case ErrorCode::Conflict: return "conflict";
        case ErrorCode::UpstreamFailure: return "upstream_failure";
    }
    return "bad_request";
}

int http_status(ErrorCode c) {
    switch (c) {
        case ErrorCode::BadRequest: return 400;
        case ErrorCode::NotFound: return 404;
        case ErrorCode::Conflict: return 409;
        case ErrorCode::UpstreamFailure: return 502;
    }
    return 500;
}

nlohmann::json error_envelope(ErrorCode code, std::string_view message, std::optional<std::string> retry_advice) {
    nlohmann::json err = {{"code", error_code_name(code)}, {"message", message}};
    if (retry_advice) err["retry_advice"] = *retry_advice;
    return {{"error", err}};
}

std::vector<Scene> load_scene_catalog(const std::filesystem::path& common_scenes, const std::filesystem::path& bench_dir) {
    std::vector<Scene> out;
    for (auto s : load_scenes(common_scenes)) {
        s.initial_query.reset();
        s.expected_response.reset();
        out.push_back(std::move(s));
    }
    if (!bench_dir.empty()) {
        std::set<std::string> seen;
        for (const auto& s : out) seen.insert(s.scene_id);
        for (const auto& p : datagen::load_bench(bench_dir).personas) {
            for (auto s : p.scenes) {
                if (!seen.insert(s.scene_id).second) continue;
                s.initial_query.reset();
                s.expected_response.reset();
                out.push_back(std::move(s));
            }
        }
    }
    return out;
}

Service::Service(ServiceConfig config, bench::Clients clients, SessionStore::Clock clock)
    : config_(std::move(config)), clients_(std::move(clients)), store_(config_.store_root, std::move(clock)) {
    if (config_.k < 1) throw ConfigurationError("update frequency k must be at least 1");
    std::filesystem::create_directories(config_.store_root / "users");
}

Service::~Service() = default;

std::mutex& Service::user_mutex(const std::string& user_id) {
    std::lock_guard lock(users_mutex_);
    auto& m = user_mutexes_[user_id];
    if (!m) m = std::make_unique<std::mutex>();
    return *m;
}

const Scene& Service::scene(const std::string& scene_id) const {
    for (const auto& s : config_.scenes) {
        if (s.scene_id == scene_id) return s;
    }
    throw ApiError(ErrorCode::NotFound, fmt::format("unknown scene '{}'", scene_id));
}

Service::UserState Service::load_state(const std::string& user_id) const {
    if (!store_.has_user(user_id)) throw ApiError(ErrorCode::NotFound, fmt::format("unknown user '{}'", user_id));
    const auto dir = store_.user_dir(user_id);
    UserState state;
    state.persona = load_profile(dir / "persona.json");
    auto doc = io::read_json(dir / "persona_state.json");
    state.schedule.k = doc.value("k", config_.k);
    state.schedule.sessions_since_update = doc.value("sessions_since_update", 0);
    state.locale = parse_locale(doc.value("locale", std::string("en")));
    if (doc.contains("last_updated") && !doc["last_updated"].is_null()) state.last_updated = doc["last_updated"].get<std::string>();
    return state;
}

void Service::save_state(const UserState& state) const {
    const auto dir = store_.user_dir(state.persona.user_id());
    save_profile(state.persona, dir / "persona.json");
    io::write_json_atomic(dir / "persona_state.json",
                          {{"k", state.schedule.k},
                           {"sessions_since_update", state.schedule.sessions_since_update},
                           {"locale", locale_name(state.locale)},
                           {"last_updated", state.last_updated ? nlohmann::json(*state.last_updated) : nlohmann::json(nullptr)}});
}

nlohmann::json Service::create_user(const nlohmann::json& body) {
    auto name = string_field(body, "name");
    if (name && text::trim(*name).empty()) throw ApiError(ErrorCode::BadRequest, "'name' must not be blank");
    auto locale = config_.default_locale;
    if (auto l = string_field(body, "locale")) {
        try {
            locale = parse_locale(*l);
        } catch (const Error&) {
            throw ApiError(ErrorCode::BadRequest, fmt::format("unsupported locale '{}'", *l));
        }
    }
    std::string user_id;
    {
        std::lock_guard lock(users_mutex_);
        auto n = store_.list_users().size() + 1;
        do user_id = fmt::format("u{:06}", n++);
        while (store_.has_user(user_id));
        store_.register_user(user_id);
    }
    UserState state;
    state.persona = PersonaProfile::cold_start(user_id, name ? std::optional(text::trim_copy(*name)) : std::nullopt);
    state.schedule.k = config_.k;
    state.locale = locale;
    save_state(state);
    return {{"user_id", user_id}, {"persona", profile_to_json(state.persona)}};
}

nlohmann::json Service::get_persona(const std::string& user_id) {
    auto state = load_state(user_id);
    return {{"user_id", user_id},
            {"persona", profile_to_json(state.persona)},
            {"last_updated", state.last_updated ? nlohmann::json(*state.last_updated) : nlohmann::json(nullptr)},
            {"k", state.schedule.k},
            {"sessions_since_update", state.schedule.sessions_since_update},
            {"locale", locale_name(state.locale)}};
}

nlohmann::json Service::create_session(const nlohmann::json& body) {
    auto user_id = string_field(body, "user_id");
    auto scene_id = string_field(body, "scene_id");
    if (!user_id || !scene_id) throw ApiError(ErrorCode::BadRequest, "'user_id' and 'scene_id' are required");
    if (!store_.has_user(*user_id)) throw ApiError(ErrorCode::NotFound, fmt::format("unknown user '{}'", *user_id));
    scene(*scene_id);
    auto session = store_.create_session(*user_id, *scene_id, Setting::PersonaLearning);
    return {{"session_id", session.session_id}};
}

nlohmann::json Service::post_message(const std::string& session_id, const nlohmann::json& body) {
    auto text_in = string_field(body, "text");
    if (!text_in || text::trim(*text_in).empty()) throw ApiError(ErrorCode::BadRequest, "'text' is required");
    auto user_id = user_of_session(session_id);
    if (user_id.empty() || !store_.has_user(user_id)) throw ApiError(ErrorCode::NotFound, fmt::format("unknown session '{}'", session_id));

    std::lock_guard lock(user_mutex(user_id));
    auto session = store_.load_session(session_id);
    if (session.closed()) throw ApiError(ErrorCode::Conflict, fmt::format("session '{}' is closed", session_id));
    auto state = load_state(user_id);
    const auto& sc = scene(session.scene_id);

    auto reply = chatbot::respond(chatbot::PersonaView::learned(state.persona), *text_in, session.turns, sc, *clients_.chatbot,
                                  *clients_.tool_executor, nullptr, {config_.max_tool_rounds, state.locale});

    Turn turn;
    turn.index = static_cast<int>(session.turns.size());
    turn.user_text = *text_in;
    turn.assistant_text = reply.text;
    turn.tool_calls = reply.tool_records;
    turn.timestamp = store_.now();
    store_.append_turn(session_id, turn);

    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : reply.tool_records) records.push_back(tools::tool_result_to_json(r));
    return {{"assistant_text", reply.text}, {"tool_records", records}, {"turn_index", turn.index}};
}

nlohmann::json Service::close_session(const std::string& session_id) {
    auto user_id = user_of_session(session_id);
    if (user_id.empty() || !store_.has_user(user_id)) throw ApiError(ErrorCode::NotFound, fmt::format("unknown session '{}'", session_id));

    std::lock_guard lock(user_mutex(user_id));
    auto session = store_.load_session(session_id);
    if (session.closed()) throw ApiError(ErrorCode::Conflict, fmt::format("session '{}' is already closed", session_id));
    if (session.turns.empty()) throw ApiError(ErrorCode::Conflict, fmt::format("session '{}' has no turns to close", session_id));
    auto state = load_state(user_id);

    auto [next, fire] = chatbot::tick_schedule(state.schedule);
    std::vector<FieldDiff> diff;
    if (fire) {
        std::vector<Session> recent;
        for (auto& s : store_.list_sessions(user_id)) {
            if (s.closed()) recent.push_back(std::move(s));
        }
        auto keep = static_cast<std::size_t>(state.schedule.k) - 1;
        if (recent.size() > keep) recent.erase(recent.begin(), recent.end() - static_cast<std::ptrdiff_t>(keep));
        session.outcome = Outcome::Satisfied;
        recent.push_back(session);
        auto updates = chatbot::extract_field_updates(chatbot::PersonaView::learned(state.persona), recent, *clients_.chatbot,
                                                      state.locale);
        auto [profile, used] = chatbot::apply_learned_updates(state.persona, updates);
        diff = diff_profiles(state.persona, profile);
        state.persona = std::move(profile);
        state.last_updated = format_rfc3339(store_.now());
    }
    session = store_.close_session(session_id, Outcome::Satisfied);
    state.schedule = next;
    save_state(state);
    return {{"session_id", session_id},
            {"outcome", outcome_name(*session.outcome)},
            {"update_fired", fire},
            {"diff", diff_to_json(diff)},
            {"persona", profile_to_json(state.persona)}};
}

nlohmann::json Service::get_session(const std::string& session_id) {
    auto user_id = user_of_session(session_id);
    if (user_id.empty() || !store_.has_user(user_id)) throw ApiError(ErrorCode::NotFound, fmt::format("unknown session '{}'", session_id));
    return session_to_json(store_.load_session(session_id));
}

nlohmann::json Service::list_sessions(const std::string& user_id) {
    if (!store_.has_user(user_id)) throw ApiError(ErrorCode::NotFound, fmt::format("unknown user '{}'", user_id));
    nlohmann::json out = nlohmann::json::array();
    for (const auto& s : store_.list_sessions(user_id)) {
        out.push_back({{"session_id", s.session_id},
                       {"scene_id", s.scene_id},
                       {"created_at", format_rfc3339(s.created_at)},
                       {"turns", s.turns.size()},
                       {"status", s.closed() ? "closed" : "open"},
                       {"outcome", s.outcome ? nlohmann::json(outcome_name(*s.outcome)) : nlohmann::json(nullptr)}});
    }
    return {{"user_id", user_id}, {"sessions", out}};
}

void Service::mount(httplib::Server& server) {
    auto wrap = [this](int ok_status, auto handler) {
        return [this, ok_status, handler](const httplib::Request& req, httplib::Response& res) {
            nlohmann::json body;
            int status = ok_status;
            try {
                body = handler(req);
            } catch (const ApiError& e) {
                status = http_status(e.code());
                body = error_envelope(e.code(), e.what());
            } catch (const NotFoundError& e) {
                status = 404;
                body = error_envelope(ErrorCode::NotFound, e.what());
            } catch (const ConflictError& e) {
                status = 409;
                body = error_envelope(ErrorCode::Conflict, e.what());
            } catch (const PreconditionError& e) {
                status = 400;
                body = error_envelope(ErrorCode::BadRequest, e.what());
            } catch (const Error& e) {
                spdlog::error("upstream failure on {} {}: {}", req.method, req.path, e.what());
                status = 502;
                body = error_envelope(ErrorCode::UpstreamFailure, e.what(),
                                      fmt::format("retry after {} seconds", config_.retry_after_seconds));
                res.set_header("Retry-After", std::to_string(config_.retry_after_seconds));
            } catch (const std::exception& e) {
                status = 400;
                body = error_envelope(ErrorCode::BadRequest, e.what());
            }
            res.status = status;
            res.set_content(body.dump(), "application/json");
        };
    };

    server.set_default_headers({{"Access-Control-Allow-Origin", config_.cors_origin},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Post("/users", wrap(201, [this](const httplib::Request& req) { return create_user(parse_body(req)); }));
    server.Get(R"(/users/([^/]+)/persona)", wrap(200, [this](const httplib::Request& req) { return get_persona(req.matches[1]); }));
    server.Get(R"(/users/([^/]+)/sessions)", wrap(200, [this](const httplib::Request& req) { return list_sessions(req.matches[1]); }));
    server.Get("/scenes", wrap(200, [this](const httplib::Request&) {
                   nlohmann::json scenes = nlohmann::json::array();
                   for (const auto& s : config_.scenes) scenes.push_back(scene_to_json(s, false));
                   return nlohmann::json{{"scenes", scenes}};
               }));
    server.Post("/sessions", wrap(201, [this](const httplib::Request& req) { return create_session(parse_body(req)); }));
    server.Post(R"(/sessions/([^/]+)/messages)",
                wrap(200, [this](const httplib::Request& req) { return post_message(req.matches[1], parse_body(req)); }));
    server.Post(R"(/sessions/([^/]+)/close)", wrap(200, [this](const httplib::Request& req) { return close_session(req.matches[1]); }));
    server.Get(R"(/sessions/([^/]+))", wrap(200, [this](const httplib::Request& req) { return get_session(req.matches[1]); }));

    server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (!res.body.empty()) return;
        auto code = res.status == 404 ? ErrorCode::NotFound : ErrorCode::BadRequest;
        res.set_content(error_envelope(code, fmt::format("no route for {} {}", req.method, req.path)).dump(), "application/json");
    });
}

void serve(Service& service, const std::string& host, int port) {
    httplib::Server server;
    service.mount(server);
    spdlog::info("listening on {}:{}", host, port);
    if (!server.listen(host, port)) throw ConfigurationError(fmt::format("cannot listen on {}:{}", host, port));
}

}  // namespace aipersona::service
