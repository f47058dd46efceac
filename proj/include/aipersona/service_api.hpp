#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aipersona/bench_runner.hpp"
#include "aipersona/scene.hpp"
#include "aipersona/session_store.hpp"

namespace httplib {
class Server;
}

namespace aipersona::service {

struct ServiceConfig {
    std::filesystem::path store_root = "service-data";
    std::vector<Scene> scenes;
    int k = 3;
    int max_tool_rounds = 3;
    Locale default_locale = Locale::En;
    std::string cors_origin = "*";
    int retry_after_seconds = 5;
};

/// Scenes for live users: the common roster plus every scene of a bench
/// directory when one is given. Queries are stripped.
std::vector<Scene> load_scene_catalog(const std::filesystem::path& common_scenes, const std::filesystem::path& bench_dir = {});

enum class ErrorCode { BadRequest, NotFound, Conflict, UpstreamFailure };
std::string_view error_code_name(ErrorCode c);
int http_status(ErrorCode c);

/// `{"error": {"code": ..., "message": ..., "retry_advice"?: ...}}`
nlohmann::json error_envelope(ErrorCode code, std::string_view message, std::optional<std::string> retry_advice = std::nullopt);

/// HTTP facade over the framework for live sessions. Learned personas and
/// their update schedules persist next to the session store:
///     users/<user_id>/persona.json
///     users/<user_id>/persona_state.json
class Service {
public:
    Service(ServiceConfig config, bench::Clients clients, SessionStore::Clock clock = SessionStore::system_clock());
    ~Service();

    /// Registers every route (and CORS handling) on `server`.
    void mount(httplib::Server& server);

    const ServiceConfig& config() const noexcept { return config_; }

private:
    struct UserState;

    nlohmann::json create_user(const nlohmann::json& body);
    nlohmann::json get_persona(const std::string& user_id);
    nlohmann::json create_session(const nlohmann::json& body);
    nlohmann::json post_message(const std::string& session_id, const nlohmann::json& body);
    nlohmann::json close_session(const std::string& session_id);
    nlohmann::json get_session(const std::string& session_id);
    nlohmann::json list_sessions(const std::string& user_id);

    const Scene& scene(const std::string& scene_id) const;
    UserState load_state(const std::string& user_id) const;
    void save_state(const UserState& state) const;
    std::mutex& user_mutex(const std::string& user_id);

    ServiceConfig config_;
    bench::Clients clients_;
    SessionStore store_;
    std::mutex users_mutex_;
    std::map<std::string, std::unique_ptr<std::mutex>> user_mutexes_;
};

/// Blocks serving on host:port until the process is stopped.
void serve(Service& service, const std::string& host, int port);

}  // namespace aipersona::service
