#include "aipersona/session_store.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <ctime>
#include <sstream>

#include <fmt/format.h>

#include "aipersona/io_util.hpp"
#include "aipersona/text_util.hpp"

namespace aipersona {

namespace {

constexpr auto kDumpHandler = nlohmann::json::error_handler_t::replace;

bool valid_user_id(std::string_view id) {
    if (id.empty() || id.size() > 128 || id == "." || id == "..") return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' || c == '@';
    });
}

int parse_int(std::string_view s, std::string_view whole) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) throw ParseError("bad RFC 3339 timestamp", std::string(whole));
    return v;
}

}  // namespace

std::string format_rfc3339(Timestamp t) {
    auto secs = std::chrono::floor<std::chrono::seconds>(t);
    auto ms = (t - secs).count();
    std::time_t tt = std::chrono::system_clock::to_time_t(secs);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}.{:03}Z", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                       tm.tm_min, tm.tm_sec, ms);
}

Timestamp parse_rfc3339(std::string_view s) {
    // YYYY-MM-DDTHH:MM:SS[.fff]Z
    if (s.size() < 20 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != 't') || s[13] != ':' || s[16] != ':' ||
        (s.back() != 'Z' && s.back() != 'z')) {
        throw ParseError("bad RFC 3339 timestamp", std::string(s));
    }
    std::tm tm{};
    tm.tm_year = parse_int(s.substr(0, 4), s) - 1900;
    tm.tm_mon = parse_int(s.substr(5, 2), s) - 1;
    tm.tm_mday = parse_int(s.substr(8, 2), s);
    tm.tm_hour = parse_int(s.substr(11, 2), s);
    tm.tm_min = parse_int(s.substr(14, 2), s);
    tm.tm_sec = parse_int(s.substr(17, 2), s);
    int ms = 0;
    auto rest = s.substr(19, s.size() - 20);
    if (!rest.empty()) {
        if (rest[0] != '.' || rest.size() < 2) throw ParseError("bad RFC 3339 fraction", std::string(s));
        auto frac = std::string(rest.substr(1));
        frac.resize(3, '0');
        ms = parse_int(frac, s);
    }
    auto secs = std::chrono::system_clock::from_time_t(timegm(&tm));
    return std::chrono::time_point_cast<std::chrono::milliseconds>(secs) + std::chrono::milliseconds(ms);
}

std::string_view setting_name(Setting s) {
    switch (s) {
        case Setting::NoPersona: return "no_persona";
        case Setting::GoldenPersona: return "golden_persona";
        case Setting::ConversationsRag: return "conversations_rag";
        case Setting::PersonaLearning: return "persona_learning";
    }
    return "";
}

Setting parse_setting(std::string_view s) {
    for (auto v : {Setting::NoPersona, Setting::GoldenPersona, Setting::ConversationsRag, Setting::PersonaLearning}) {
        if (setting_name(v) == s) return v;
    }
    throw ConfigurationError(fmt::format("unknown setting '{}'", s));
}

std::string_view outcome_name(Outcome o) { return o == Outcome::Satisfied ? "satisfied" : "max_turns_reached"; }

Outcome parse_outcome(std::string_view s) {
    if (s == "satisfied") return Outcome::Satisfied;
    if (s == "max_turns_reached") return Outcome::MaxTurnsReached;
    throw ConfigurationError(fmt::format("unknown outcome '{}'", s));
}

bool operator==(const Turn& a, const Turn& b) {
    if (a.index != b.index || a.user_text != b.user_text || a.assistant_text != b.assistant_text ||
        a.timestamp != b.timestamp || a.tool_calls.size() != b.tool_calls.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.tool_calls.size(); ++i) {
        const auto& x = a.tool_calls[i];
        const auto& y = b.tool_calls[i];
        if (!(x.call == y.call) || x.call.span_begin != y.call.span_begin || x.call.span_end != y.call.span_end ||
            x.content != y.content || x.simulated != y.simulated) {
            return false;
        }
    }
    return true;
}

bool operator==(const Session& a, const Session& b) {
    return a.session_id == b.session_id && a.user_id == b.user_id && a.scene_id == b.scene_id && a.setting == b.setting &&
           a.turns == b.turns && a.outcome == b.outcome && a.created_at == b.created_at;
}

nlohmann::json turn_to_json(const Turn& turn) {
    nlohmann::json calls = nlohmann::json::array();
    for (const auto& r : turn.tool_calls) calls.push_back(tools::tool_result_to_json(r));
    return {{"index", turn.index},
            {"user_text", turn.user_text},
            {"assistant_text", turn.assistant_text},
            {"tool_calls", calls},
            {"timestamp", format_rfc3339(turn.timestamp)}};
}

Turn turn_from_json(const nlohmann::json& doc) {
    Turn t;
    t.index = doc.at("index").get<int>();
    t.user_text = doc.at("user_text").get<std::string>();
    t.assistant_text = doc.at("assistant_text").get<std::string>();
    for (const auto& c : doc.value("tool_calls", nlohmann::json::array())) t.tool_calls.push_back(tools::tool_result_from_json(c));
    t.timestamp = parse_rfc3339(doc.at("timestamp").get<std::string>());
    return t;
}

namespace {

nlohmann::json header_to_json(const Session& s) {
    return {{"session_id", s.session_id},
            {"user_id", s.user_id},
            {"scene_id", s.scene_id},
            {"setting", setting_name(s.setting)},
            {"outcome", s.outcome ? nlohmann::json(outcome_name(*s.outcome)) : nlohmann::json(nullptr)},
            {"created_at", format_rfc3339(s.created_at)}};
}

Session header_from_json(const nlohmann::json& doc) {
    Session s;
    s.session_id = doc.at("session_id").get<std::string>();
    s.user_id = doc.at("user_id").get<std::string>();
    s.scene_id = doc.at("scene_id").get<std::string>();
    s.setting = parse_setting(doc.at("setting").get<std::string>());
    if (!doc.at("outcome").is_null()) s.outcome = parse_outcome(doc["outcome"].get<std::string>());
    s.created_at = parse_rfc3339(doc.at("created_at").get<std::string>());
    return s;
}

}  // namespace

nlohmann::json session_to_json(const Session& session) {
    auto doc = header_to_json(session);
    doc["turns"] = nlohmann::json::array();
    for (const auto& t : session.turns) doc["turns"].push_back(turn_to_json(t));
    return doc;
}

Session session_from_json(const nlohmann::json& doc) {
    auto s = header_from_json(doc);
    for (const auto& t : doc.value("turns", nlohmann::json::array())) s.turns.push_back(turn_from_json(t));
    return s;
}

std::string user_of_session(std::string_view session_id) {
    auto pos = session_id.rfind("--");
    if (pos == std::string_view::npos || pos == 0) return {};
    return std::string(session_id.substr(0, pos));
}

// ---------------------------------------------------------------------------

SessionStore::SessionStore(std::filesystem::path root, Clock clock) : root_(std::move(root)), clock_(std::move(clock)) {
    std::filesystem::create_directories(root_ / "users");
}

SessionStore::Clock SessionStore::system_clock() {
    return [] { return std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now()); };
}

SessionStore::Clock SessionStore::logical_clock(Timestamp start) {
    auto state = std::make_shared<std::pair<std::mutex, Timestamp>>();
    state->second = start;
    return [state] {
        std::lock_guard lock(state->first);
        auto t = state->second;
        state->second += std::chrono::seconds(1);
        return t;
    };
}

std::filesystem::path SessionStore::user_dir(const std::string& user_id) const {
    if (!valid_user_id(user_id)) throw PreconditionError(fmt::format("invalid user id '{}'", user_id));
    return root_ / "users" / user_id;
}

void SessionStore::register_user(const std::string& user_id) {
    auto dir = user_dir(user_id);
    std::lock_guard lock(create_mutex_);
    if (std::filesystem::exists(dir / "user.json")) return;
    std::filesystem::create_directories(dir / "sessions");
    io::write_json_atomic(dir / "user.json", {{"user_id", user_id}, {"created_at", format_rfc3339(clock_())}});
}

bool SessionStore::has_user(const std::string& user_id) const {
    return valid_user_id(user_id) && std::filesystem::exists(root_ / "users" / user_id / "user.json");
}

std::vector<std::string> SessionStore::list_users() const {
    std::vector<std::string> users;
    for (const auto& entry : std::filesystem::directory_iterator(root_ / "users")) {
        if (std::filesystem::exists(entry.path() / "user.json")) users.push_back(entry.path().filename().string());
    }
    std::sort(users.begin(), users.end());
    return users;
}

std::filesystem::path SessionStore::header_path(const std::string& user_id, const std::string& session_id) const {
    return user_dir(user_id) / "sessions" / (session_id + ".header.json");
}

std::filesystem::path SessionStore::turns_path(const std::string& user_id, const std::string& session_id) const {
    return user_dir(user_id) / "sessions" / (session_id + ".turns.jsonl");
}

std::mutex& SessionStore::session_mutex(const std::string& session_id) const {
    std::lock_guard lock(index_mutex_);
    auto& m = session_mutexes_[session_id];
    if (!m) m = std::make_unique<std::mutex>();
    return *m;
}

void SessionStore::write_header(const Session& session) const {
    io::write_file_atomic(header_path(session.user_id, session.session_id),
                          header_to_json(session).dump(2, ' ', false, kDumpHandler) + "\n");
}

Session SessionStore::create_session(const std::string& user_id, const std::string& scene_id, Setting setting) {
    if (!has_user(user_id)) throw NotFoundError(fmt::format("unknown user '{}'", user_id));
    std::lock_guard lock(create_mutex_);
    std::size_t seq = 1;
    for (const auto& entry : std::filesystem::directory_iterator(user_dir(user_id) / "sessions")) {
        if (entry.path().string().ends_with(".header.json")) ++seq;
    }
    Session s;
    s.session_id = fmt::format("{}--{:06}", user_id, seq);
    s.user_id = user_id;
    s.scene_id = scene_id;
    s.setting = setting;
    s.created_at = clock_();
    io::write_file_atomic(turns_path(user_id, s.session_id), "");
    write_header(s);
    return s;
}

Session SessionStore::read_session(const std::string& user_id, const std::string& session_id) const {
    auto header = header_path(user_id, session_id);
    if (!std::filesystem::exists(header)) throw NotFoundError(fmt::format("unknown session '{}'", session_id));
    auto s = header_from_json(io::read_json(header));
    auto content = io::read_file(turns_path(user_id, session_id));
    for (const auto& line : text::split_lines(content)) {
        if (text::trim(line).empty()) continue;
        s.turns.push_back(turn_from_json(nlohmann::json::parse(line)));
    }
    return s;
}

Session SessionStore::load_session(const std::string& session_id) const {
    auto user = user_of_session(session_id);
    if (user.empty() || !valid_user_id(user)) throw NotFoundError(fmt::format("unknown session '{}'", session_id));
    std::lock_guard lock(session_mutex(session_id));
    return read_session(user, session_id);
}

Session SessionStore::append_turn(const std::string& session_id, Turn turn) {
    auto user = user_of_session(session_id);
    if (user.empty() || !valid_user_id(user)) throw NotFoundError(fmt::format("unknown session '{}'", session_id));
    std::lock_guard lock(session_mutex(session_id));
    auto s = read_session(user, session_id);
    if (s.closed()) throw ConflictError(fmt::format("session '{}' is closed", session_id));
    if (turn.index != static_cast<int>(s.turns.size())) {
        throw PreconditionError(fmt::format("turn index {} does not follow {} existing turn(s)", turn.index, s.turns.size()));
    }
    auto path = turns_path(user, session_id);
    auto content = io::read_file(path);
    content += turn_to_json(turn).dump(-1, ' ', false, kDumpHandler);
    content += '\n';
    io::write_file_atomic(path, content);
    s.turns.push_back(std::move(turn));
    return s;
}

Session SessionStore::close_session(const std::string& session_id, Outcome outcome) {
    auto user = user_of_session(session_id);
    if (user.empty() || !valid_user_id(user)) throw NotFoundError(fmt::format("unknown session '{}'", session_id));
    std::lock_guard lock(session_mutex(session_id));
    auto s = read_session(user, session_id);
    if (s.closed()) throw ConflictError(fmt::format("session '{}' is already closed", session_id));
    if (s.turns.empty()) throw ConflictError(fmt::format("session '{}' has no turns and cannot be closed", session_id));
    s.outcome = outcome;
    write_header(s);
    return s;
}

std::vector<Session> SessionStore::list_sessions(const std::string& user_id) const {
    std::vector<Session> sessions;
    if (!has_user(user_id)) return sessions;
    for (const auto& entry : std::filesystem::directory_iterator(user_dir(user_id) / "sessions")) {
        auto name = entry.path().filename().string();
        constexpr std::string_view suffix = ".header.json";
        if (!name.ends_with(suffix)) continue;
        auto id = name.substr(0, name.size() - suffix.size());
        std::lock_guard lock(session_mutex(id));
        sessions.push_back(read_session(user_id, id));
    }
    std::sort(sessions.begin(), sessions.end(), [](const Session& a, const Session& b) {
        return std::tie(a.created_at, a.session_id) < std::tie(b.created_at, b.session_id);
    });
    return sessions;
}

std::vector<Session> SessionStore::last_k_sessions(const std::string& user_id, std::size_t k) const {
    if (k == 0) throw PreconditionError("k must be at least 1");
    auto all = list_sessions(user_id);
    if (all.size() > k) all.erase(all.begin(), all.end() - static_cast<std::ptrdiff_t>(k));
    return all;
}

}  // namespace aipersona
