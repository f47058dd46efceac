#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "aipersona/errors.hpp"

namespace aipersona::llm {

enum class Role { User, Assistant };

struct ChatMessage {
    Role role = Role::User;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
    std::string system;
    std::vector<ChatMessage> messages;  // non-empty, alternating, user first
    double temperature = 0.7;
    int max_tokens = 1024;
    std::string model_tag;

    bool operator==(const ChatRequest&) const = default;
};

struct Usage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
};

struct ChatResponse {
    std::string content;
    Usage usage;
    std::int64_t latency_ms = 0;
};

/// Throws PreconditionError describing the first broken invariant.
void validate_request(const ChatRequest& request);

/// Retryable transport failure (connection reset, 5xx, rate limiting).
class TransientError : public TransportError {
public:
    using TransportError::TransportError;
};

/// Non-retryable provider-side rejection that is not a configuration problem.
class ProviderError : public Error {
public:
    using Error::Error;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual ChatResponse send(const ChatRequest& request) = 0;
};

/// Rule of a scripted backend. Matches when every `contains` substring and
/// none of the `not_contains` substrings occur in the request text (system
/// prompt followed by every message, newline separated).
struct ScriptRule {
    std::vector<std::string> contains;
    std::vector<std::string> not_contains;
    std::string reply;
};

/// Deterministic offline backend: first matching rule wins, otherwise the
/// default reply. A pure function of the request.
class ScriptedBackend : public ChatBackend {
public:
    ScriptedBackend(std::vector<ScriptRule> rules, std::string default_reply);

    static ScriptedBackend from_json(const nlohmann::json& doc);
    static ScriptedBackend load(const std::filesystem::path& fixture);

    ChatResponse send(const ChatRequest& request) override;

    const std::string& reply_for(const ChatRequest& request) const;
    static std::string request_text(const ChatRequest& request);

private:
    std::vector<ScriptRule> rules_;
    std::string default_reply_;
};

/// OpenAI-compatible `/v1/chat/completions` endpoint over HTTP(S).
class OpenAiCompatibleBackend : public ChatBackend {
public:
    struct Options {
        std::string base_url;  // e.g. https://api.openai.com
        std::string path = "/v1/chat/completions";
        std::string model;
        std::string api_key;
        std::chrono::seconds timeout{120};
    };

    explicit OpenAiCompatibleBackend(Options options);
    ChatResponse send(const ChatRequest& request) override;

    static nlohmann::json encode(const ChatRequest& request, const std::string& model);
    /// Maps an HTTP status and body to a response or the matching error type.
    static ChatResponse decode(int status, const std::string& body);

private:
    Options options_;
};

/// Enforces a minimum spacing between request starts.
class RateLimiter {
public:
    explicit RateLimiter(std::chrono::milliseconds min_interval) : min_interval_(min_interval) {}
    void acquire();

private:
    std::chrono::milliseconds min_interval_;
    std::mutex mutex_;
    std::chrono::steady_clock::time_point next_{};
};

struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds base_delay{500};
    double multiplier = 2.0;
};

using RequestObserver = std::function<void(const ChatRequest&, const ChatResponse&)>;

/// The only way the rest of the system talks to a model. Shareable across
/// threads; the backend must itself be thread-safe.
class LlmClient {
public:
    LlmClient(std::shared_ptr<ChatBackend> backend, RetryPolicy retry = {},
              std::shared_ptr<RateLimiter> limiter = nullptr);

    ChatResponse complete(const ChatRequest& request) const;

    /// Request pre-filled with this client's sampling defaults.
    ChatRequest make_request(std::string system, std::vector<ChatMessage> messages) const;

    /// Single-turn convenience: system + one user message, returns content.
    std::string ask(std::string system, std::string user) const;

    void set_defaults(double temperature, int max_tokens, std::string model_tag);
    void set_observer(RequestObserver observer) { observer_ = std::move(observer); }

    double temperature() const noexcept { return temperature_; }

private:
    std::shared_ptr<ChatBackend> backend_;
    RetryPolicy retry_;
    std::shared_ptr<RateLimiter> limiter_;
    RequestObserver observer_;
    double temperature_ = 0.7;
    int max_tokens_ = 1024;
    std::string model_tag_;
};

/// ceil(code points / 4).
std::size_t estimate_tokens(std::string_view text);
std::size_t estimate_tokens(const ChatRequest& request);

/// Drops the oldest user/assistant pairs until the estimate fits. The system
/// prompt and the final user message are never dropped.
ChatRequest with_budget(const ChatRequest& request, std::size_t token_budget);

// ---------------------------------------------------------------------------
// Provider profiles

enum class ModelRole { Chatbot, Simulator, ToolExecutor, Judge, Datagen };

std::string_view model_role_name(ModelRole r);
ModelRole parse_model_role(std::string_view s);

/// Judges run at 0.0; every generating role at 0.7.
double default_temperature(ModelRole r);

struct ProviderProfile {
    std::string name;
    std::string kind;  // "scripted" | "openai"
    std::filesystem::path fixture;
    std::string base_url;
    std::string model;
    std::string api_key_env;
    int max_retries = 3;
    std::chrono::milliseconds base_delay{500};
    std::chrono::milliseconds min_interval{0};
    std::chrono::seconds timeout{120};
};

/// Named providers plus a role → provider map. Backends and rate limiters are
/// shared per provider so roles on the same provider share one limiter.
class ProviderRegistry {
public:
    /// `{"providers": {name: {...}}, "roles": {role: name}}`. Relative
    /// fixture paths resolve against `base_dir`.
    static ProviderRegistry from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);

    /// Every role served by one scripted fixture.
    static ProviderRegistry scripted(const std::filesystem::path& fixture);

    std::shared_ptr<LlmClient> client_for(ModelRole role) const;
    const ProviderProfile& profile_for(ModelRole role) const;

private:
    std::map<std::string, ProviderProfile> providers_;
    std::map<ModelRole, std::string> roles_;
    std::unique_ptr<std::mutex> mutex_ = std::make_unique<std::mutex>();
    mutable std::map<std::string, std::shared_ptr<ChatBackend>> backends_;
    mutable std::map<std::string, std::shared_ptr<RateLimiter>> limiters_;
};

}  // namespace aipersona::llm
