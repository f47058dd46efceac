#include "aipersona/llm_gateway.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include "aipersona/io_util.hpp"
#include "aipersona/text_util.hpp"

namespace aipersona::llm {

void validate_request(const ChatRequest& request) {
    if (request.messages.empty()) throw PreconditionError("chat request has no messages");
    for (std::size_t i = 0; i < request.messages.size(); ++i) {
        auto expected = i % 2 == 0 ? Role::User : Role::Assistant;
        if (request.messages[i].role != expected) {
            throw PreconditionError(fmt::format("message {} breaks user/assistant alternation (user first)", i));
        }
    }
    if (!(request.temperature >= 0.0 && request.temperature <= 2.0)) {
        throw PreconditionError(fmt::format("temperature {} outside [0, 2]", request.temperature));
    }
    if (request.max_tokens <= 0) throw PreconditionError("max_tokens must be positive");
}

// ---------------------------------------------------------------------------

ScriptedBackend::ScriptedBackend(std::vector<ScriptRule> rules, std::string default_reply)
    : rules_(std::move(rules)), default_reply_(std::move(default_reply)) {}

ScriptedBackend ScriptedBackend::from_json(const nlohmann::json& doc) {
    std::vector<ScriptRule> rules;
    for (const auto& r : doc.value("rules", nlohmann::json::array())) {
        ScriptRule rule;
        auto strings = [](const nlohmann::json& v) {
            if (v.is_string()) return std::vector<std::string>{v.get<std::string>()};
            return v.get<std::vector<std::string>>();
        };
        if (r.contains("contains")) rule.contains = strings(r["contains"]);
        if (r.contains("not_contains")) rule.not_contains = strings(r["not_contains"]);
        rule.reply = r.at("reply").get<std::string>();
        rules.push_back(std::move(rule));
    }
    return ScriptedBackend(std::move(rules), doc.value("default_reply", std::string{}));
}

ScriptedBackend ScriptedBackend::load(const std::filesystem::path& fixture) {
    try {
        return from_json(io::read_json(fixture));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigurationError(fmt::format("{}: malformed scripted fixture: {}", fixture.string(), e.what()));
    }
}

std::string ScriptedBackend::request_text(const ChatRequest& request) {
    std::string text = request.system;
    for (const auto& m : request.messages) {
        text += '\n';
        text += m.content;
    }
    return text;
}

const std::string& ScriptedBackend::reply_for(const ChatRequest& request) const {
    const auto text = request_text(request);
    for (const auto& rule : rules_) {
        bool ok = true;
        for (const auto& s : rule.contains) ok = ok && text.find(s) != std::string::npos;
        for (const auto& s : rule.not_contains) ok = ok && text.find(s) == std::string::npos;
        if (ok) return rule.reply;
    }
    return default_reply_;
}

ChatResponse ScriptedBackend::send(const ChatRequest& request) {
    ChatResponse response;
    response.content = reply_for(request);
    response.usage.prompt_tokens = static_cast<std::int64_t>(estimate_tokens(request));
    response.usage.completion_tokens = static_cast<std::int64_t>(estimate_tokens(response.content));
    return response;
}

// ---------------------------------------------------------------------------

OpenAiCompatibleBackend::OpenAiCompatibleBackend(Options options) : options_(std::move(options)) {
    if (options_.base_url.empty()) throw ConfigurationError("provider base_url is empty");
    if (options_.model.empty()) throw ConfigurationError("provider model is empty");
}

nlohmann::json OpenAiCompatibleBackend::encode(const ChatRequest& request, const std::string& model) {
    nlohmann::json messages = nlohmann::json::array();
    if (!request.system.empty()) messages.push_back({{"role", "system"}, {"content", request.system}});
    for (const auto& m : request.messages) {
        messages.push_back({{"role", m.role == Role::User ? "user" : "assistant"}, {"content", m.content}});
    }
    return {{"model", model},
            {"messages", messages},
            {"temperature", request.temperature},
            {"max_tokens", request.max_tokens}};
}

ChatResponse OpenAiCompatibleBackend::decode(int status, const std::string& body) {
    if (status == 401 || status == 403) throw ConfigurationError(fmt::format("provider rejected credentials (HTTP {})", status));
    if (status == 429) {
        if (body.find("insufficient_quota") != std::string::npos) throw ConfigurationError("provider quota exhausted");
        throw TransientError("provider rate limited (HTTP 429)");
    }
    if (status >= 500) throw TransientError(fmt::format("provider server error (HTTP {})", status));
    if (status != 200) throw ProviderError(fmt::format("provider returned HTTP {}: {}", status, text::utf8_truncate(body, 300)));

    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error&) {
        throw TransientError("provider returned a non-JSON body");
    }
    ChatResponse response;
    const auto& choices = doc.value("choices", nlohmann::json::array());
    if (choices.empty() || !choices[0].contains("message")) throw TransientError("provider response has no choices");
    const auto& content = choices[0]["message"].value("content", nlohmann::json());
    if (!content.is_string() || content.get<std::string>().empty()) throw TransientError("provider returned empty content");
    response.content = content.get<std::string>();
    if (doc.contains("usage")) {
        response.usage.prompt_tokens = doc["usage"].value("prompt_tokens", 0);
        response.usage.completion_tokens = doc["usage"].value("completion_tokens", 0);
    }
    return response;
}

ChatResponse OpenAiCompatibleBackend::send(const ChatRequest& request) {
    httplib::Client client(options_.base_url);
    client.set_connection_timeout(std::chrono::seconds(10));
    client.set_read_timeout(options_.timeout);
    client.set_write_timeout(options_.timeout);
    httplib::Headers headers;
    if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);

    auto body = encode(request, options_.model).dump();
    auto result = client.Post(options_.path, headers, body, "application/json");
    if (!result) throw TransientError(fmt::format("request to {} failed: {}", options_.base_url, httplib::to_string(result.error())));
    return decode(result->status, result->body);
}

// ---------------------------------------------------------------------------

void RateLimiter::acquire() {
    if (min_interval_.count() <= 0) return;
    std::chrono::steady_clock::time_point slot;
    {
        std::lock_guard lock(mutex_);
        auto now = std::chrono::steady_clock::now();
        slot = std::max(now, next_);
        next_ = slot + min_interval_;
    }
    std::this_thread::sleep_until(slot);
}

LlmClient::LlmClient(std::shared_ptr<ChatBackend> backend, RetryPolicy retry, std::shared_ptr<RateLimiter> limiter)
    : backend_(std::move(backend)), retry_(retry), limiter_(std::move(limiter)) {
    if (!backend_) throw ConfigurationError("LlmClient requires a backend");
}

void LlmClient::set_defaults(double temperature, int max_tokens, std::string model_tag) {
    temperature_ = temperature;
    max_tokens_ = max_tokens;
    model_tag_ = std::move(model_tag);
}

ChatRequest LlmClient::make_request(std::string system, std::vector<ChatMessage> messages) const {
    ChatRequest r;
    r.system = std::move(system);
    r.messages = std::move(messages);
    r.temperature = temperature_;
    r.max_tokens = max_tokens_;
    r.model_tag = model_tag_;
    return r;
}

std::string LlmClient::ask(std::string system, std::string user) const {
    return complete(make_request(std::move(system), {{Role::User, std::move(user)}})).content;
}

ChatResponse LlmClient::complete(const ChatRequest& request) const {
    validate_request(request);
    auto delay = retry_.base_delay;
    for (int attempt = 0;; ++attempt) {
        if (limiter_) limiter_->acquire();
        auto start = std::chrono::steady_clock::now();
        try {
            auto response = backend_->send(request);
            response.latency_ms =
                std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
            if (observer_) observer_(request, response);
            return response;
        } catch (const TransientError& e) {
            if (attempt >= retry_.max_retries) {
                throw TransportError(fmt::format("giving up after {} attempt(s): {}", attempt + 1, e.what()));
            }
            spdlog::warn("transient provider failure (attempt {}): {}", attempt + 1, e.what());
            std::this_thread::sleep_for(delay);
            delay = std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(delay.count() * retry_.multiplier)));
        }
    }
}

std::size_t estimate_tokens(std::string_view text) { return (text::utf8_length(text) + 3) / 4; }

std::size_t estimate_tokens(const ChatRequest& request) {
    auto total = estimate_tokens(request.system);
    for (const auto& m : request.messages) total += estimate_tokens(m.content);
    return total;
}

ChatRequest with_budget(const ChatRequest& request, std::size_t token_budget) {
    if (token_budget == 0) throw PreconditionError("token budget must be positive");
    validate_request(request);
    if (request.messages.back().role != Role::User) throw PreconditionError("request must end with a user message");

    ChatRequest out = request;
    auto total = estimate_tokens(out);
    std::size_t drop = 0;
    while (total > token_budget && out.messages.size() - drop > 1) {
        total -= estimate_tokens(out.messages[drop].content) + estimate_tokens(out.messages[drop + 1].content);
        drop += 2;
    }
    if (total > token_budget) {
        throw PreconditionError(fmt::format("final user message needs ~{} tokens with the system prompt; budget is {}", total,
                                            token_budget));
    }
    out.messages.erase(out.messages.begin(), out.messages.begin() + static_cast<std::ptrdiff_t>(drop));
    return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::pair<ModelRole, std::string_view> kRoleNames[] = {
    {ModelRole::Chatbot, "chatbot"}, {ModelRole::Simulator, "simulator"}, {ModelRole::ToolExecutor, "tool_executor"},
    {ModelRole::Judge, "judge"},     {ModelRole::Datagen, "datagen"},
};

}  // namespace

std::string_view model_role_name(ModelRole r) {
    for (auto [role, name] : kRoleNames) {
        if (role == r) return name;
    }
    return "";
}

ModelRole parse_model_role(std::string_view s) {
    for (auto [role, name] : kRoleNames) {
        if (name == s) return role;
    }
    throw ConfigurationError(fmt::format("unknown model role '{}'", s));
}

double default_temperature(ModelRole r) { return r == ModelRole::Judge ? 0.0 : 0.7; }

ProviderRegistry ProviderRegistry::from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
    ProviderRegistry reg;
    try {
        for (const auto& [name, p] : doc.at("providers").items()) {
            ProviderProfile profile;
            profile.name = name;
            profile.kind = p.at("kind").get<std::string>();
            if (profile.kind == "scripted") {
                std::filesystem::path fixture = p.at("fixture").get<std::string>();
                profile.fixture = fixture.is_absolute() ? fixture : base_dir / fixture;
            } else if (profile.kind == "openai") {
                profile.base_url = p.at("base_url").get<std::string>();
                profile.model = p.at("model").get<std::string>();
                profile.api_key_env = p.value("api_key_env", std::string("OPENAI_API_KEY"));
            } else {
                throw ConfigurationError(fmt::format("provider '{}': unknown kind '{}'", name, profile.kind));
            }
            profile.max_retries = p.value("max_retries", profile.max_retries);
            profile.base_delay = std::chrono::milliseconds(p.value("base_delay_ms", 500));
            profile.min_interval = std::chrono::milliseconds(p.value("min_interval_ms", 0));
            profile.timeout = std::chrono::seconds(p.value("timeout_s", 120));
            reg.providers_[name] = std::move(profile);
        }
        const auto& roles = doc.at("roles");
        for (auto [role, role_name] : kRoleNames) {
            std::string provider;
            if (roles.contains(std::string(role_name))) provider = roles[std::string(role_name)].get<std::string>();
            else if (roles.contains("default")) provider = roles["default"].get<std::string>();
            else continue;
            if (!reg.providers_.count(provider)) {
                throw ConfigurationError(fmt::format("role '{}' refers to unknown provider '{}'", role_name, provider));
            }
            reg.roles_[role] = provider;
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigurationError(fmt::format("malformed provider configuration: {}", e.what()));
    }
    return reg;
}

ProviderRegistry ProviderRegistry::scripted(const std::filesystem::path& fixture) {
    nlohmann::json doc = {{"providers", {{"scripted", {{"kind", "scripted"}, {"fixture", fixture.string()}}}}},
                          {"roles", {{"default", "scripted"}}}};
    return from_json(doc, {});
}

const ProviderProfile& ProviderRegistry::profile_for(ModelRole role) const {
    auto it = roles_.find(role);
    if (it == roles_.end()) throw ConfigurationError(fmt::format("no provider configured for role '{}'", model_role_name(role)));
    return providers_.at(it->second);
}

std::shared_ptr<LlmClient> ProviderRegistry::client_for(ModelRole role) const {
    const auto& profile = profile_for(role);
    std::lock_guard lock(*mutex_);
    auto& backend = backends_[profile.name];
    if (!backend) {
        if (profile.kind == "scripted") {
            backend = std::make_shared<ScriptedBackend>(ScriptedBackend::load(profile.fixture));
        } else {
            const char* key = std::getenv(profile.api_key_env.c_str());
            if (!key || !*key) {
                throw ConfigurationError(fmt::format("provider '{}' needs ${}", profile.name, profile.api_key_env));
            }
            backend = std::make_shared<OpenAiCompatibleBackend>(
                OpenAiCompatibleBackend::Options{profile.base_url, "/v1/chat/completions", profile.model, key, profile.timeout});
        }
    }
    auto& limiter = limiters_[profile.name];
    if (!limiter) limiter = std::make_shared<RateLimiter>(profile.min_interval);

    RetryPolicy retry;
    retry.max_retries = profile.max_retries;
    retry.base_delay = profile.base_delay;
    auto client = std::make_shared<LlmClient>(backend, retry, limiter);
    client->set_defaults(default_temperature(role), 1024, profile.kind == "scripted" ? profile.name : profile.model);
    return client;
}

}  // namespace aipersona::llm
