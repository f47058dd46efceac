#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "aipersona/tool_executor.hpp"

namespace aipersona {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

/// RFC 3339 UTC with millisecond precision, e.g. 2024-05-01T09:30:00.000Z.
std::string format_rfc3339(Timestamp t);
Timestamp parse_rfc3339(std::string_view s);  // throws ParseError

enum class Setting { NoPersona, GoldenPersona, ConversationsRag, PersonaLearning };
enum class Outcome { Satisfied, MaxTurnsReached };

std::string_view setting_name(Setting s);
Setting parse_setting(std::string_view s);  // throws ConfigurationError
std::string_view outcome_name(Outcome o);
Outcome parse_outcome(std::string_view s);

/// One user message (x_t) and the assistant reply (y_t), plus the tool calls
/// the assistant made while producing it.
struct Turn {
    int index = 0;
    std::string user_text;
    std::string assistant_text;
    std::vector<tools::ToolResult> tool_calls;
    Timestamp timestamp{};
};

struct Session {
    std::string session_id;
    std::string user_id;
    std::string scene_id;
    Setting setting = Setting::NoPersona;
    std::vector<Turn> turns;
    std::optional<Outcome> outcome;
    Timestamp created_at{};

    bool closed() const noexcept { return outcome.has_value(); }
};

bool operator==(const Turn& a, const Turn& b);
bool operator==(const Session& a, const Session& b);

nlohmann::json turn_to_json(const Turn& turn);
Turn turn_from_json(const nlohmann::json& doc);
nlohmann::json session_to_json(const Session& session);
Session session_from_json(const nlohmann::json& doc);

/// Durable per-user conversation history.
///
/// Layout under the root directory:
///
///     users/<user_id>/user.json
///     users/<user_id>/sessions/<session_id>.header.json
///     users/<user_id>/sessions/<session_id>.turns.jsonl
///
/// Every write goes through a temp file and a rename, so an interrupted
/// append leaves the previous state intact. Writes to one session are
/// serialized; readers never block on other users.
class SessionStore {
public:
    using Clock = std::function<Timestamp()>;

    explicit SessionStore(std::filesystem::path root, Clock clock = system_clock());

    static Clock system_clock();
    /// Deterministic clock: `start`, then one second later on every call.
    static Clock logical_clock(Timestamp start);

    const std::filesystem::path& root() const noexcept { return root_; }

    void register_user(const std::string& user_id);
    bool has_user(const std::string& user_id) const;
    std::vector<std::string> list_users() const;
    std::filesystem::path user_dir(const std::string& user_id) const;

    Session create_session(const std::string& user_id, const std::string& scene_id, Setting setting);
    Session append_turn(const std::string& session_id, Turn turn);
    Session close_session(const std::string& session_id, Outcome outcome);

    Session load_session(const std::string& session_id) const;
    /// Oldest first, ordered by (created_at, session_id).
    std::vector<Session> list_sessions(const std::string& user_id) const;
    /// The min(k, count) most recent sessions, oldest first.
    std::vector<Session> last_k_sessions(const std::string& user_id, std::size_t k) const;

    Timestamp now() const { return clock_(); }

private:
    std::mutex& session_mutex(const std::string& session_id) const;
    std::filesystem::path header_path(const std::string& user_id, const std::string& session_id) const;
    std::filesystem::path turns_path(const std::string& user_id, const std::string& session_id) const;
    void write_header(const Session& session) const;
    Session read_session(const std::string& user_id, const std::string& session_id) const;

    std::filesystem::path root_;
    Clock clock_;
    mutable std::mutex index_mutex_;
    mutable std::map<std::string, std::unique_ptr<std::mutex>> session_mutexes_;
    mutable std::mutex create_mutex_;
};

/// Session ids are `<user_id>--<6-digit sequence>`.
std::string user_of_session(std::string_view session_id);

}  // namespace aipersona
