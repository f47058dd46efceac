#include <gtest/gtest.h>

#include <httplib.h>

#include <fstream>
#include <thread>

#include "aipersona/llm_gateway.hpp"
#include "test_support.hpp"

using namespace aipersona;
using namespace aipersona::llm;

namespace {

ChatRequest request_with(std::vector<ChatMessage> messages, std::string system = "sys") {
    ChatRequest r;
    r.system = std::move(system);
    r.messages = std::move(messages);
    return r;
}

ChatRequest user_says(const std::string& text) { return request_with({{Role::User, text}}); }

class FlakyBackend : public ChatBackend {
public:
    explicit FlakyBackend(int failures) : failures_(failures) {}
    ChatResponse send(const ChatRequest&) override {
        ++calls;
        if (calls <= failures_) throw TransientError("connection reset");
        return {"ok", {}, 0};
    }
    int calls = 0;

private:
    int failures_;
};

class RefusingBackend : public ChatBackend {
public:
    ChatResponse send(const ChatRequest&) override {
        ++calls;
        throw ConfigurationError("bad key");
    }
    int calls = 0;
};

RetryPolicy fast_retry(int n) { return {n, std::chrono::milliseconds(1), 2.0}; }

}  // namespace

TEST(Scripted, FirstMatchingRuleWins) {
    auto client = testing_support::scripted({
        {"default_reply", "fallback"},
        {"rules",
         {{{"contains", {"SATCHECK-DONE"}}, {"reply", "<Satisfied>"}},
          {{"contains", {"SATCHECK"}}, {"reply", "<Continue>"}},
          {{"contains", {"alpha"}}, {"not_contains", {"beta"}}, {"reply", "alpha only"}}}},
    });
    EXPECT_EQ(client->complete(user_says("x SATCHECK-DONE")).content, "<Satisfied>");
    EXPECT_EQ(client->complete(user_says("x SATCHECK")).content, "<Continue>");
    EXPECT_EQ(client->complete(user_says("alpha")).content, "alpha only");
    EXPECT_EQ(client->complete(user_says("alpha beta")).content, "fallback");
    EXPECT_EQ(client->complete(user_says("nothing")).content, "fallback");
}

TEST(Scripted, MatchesSystemPromptAndPureFunction) {
    ScriptedBackend backend({{{"in-system"}, {}, "sys hit"}}, "none");
    auto r = request_with({{Role::User, "q"}}, "this is in-system text");
    EXPECT_EQ(backend.reply_for(r), "sys hit");
    EXPECT_EQ(backend.send(r).content, backend.send(r).content);
    EXPECT_EQ(ScriptedBackend::request_text(r), "this is in-system text\nq");
}

TEST(Request, Validation) {
    EXPECT_THROW(validate_request(request_with({})), PreconditionError);
    EXPECT_THROW(validate_request(request_with({{Role::Assistant, "a"}})), PreconditionError);
    EXPECT_THROW(validate_request(request_with({{Role::User, "a"}, {Role::User, "b"}})), PreconditionError);
    auto hot = user_says("x");
    hot.temperature = 2.5;
    EXPECT_THROW(validate_request(hot), PreconditionError);
    EXPECT_NO_THROW(validate_request(request_with({{Role::User, "a"}, {Role::Assistant, "b"}, {Role::User, "c"}})));

    auto client = testing_support::constant("x");
    EXPECT_THROW(client->complete(request_with({})), PreconditionError);
}

TEST(Client, RetriesTransientFailures) {
    auto backend = std::make_shared<FlakyBackend>(2);
    LlmClient client(backend, fast_retry(3));
    EXPECT_EQ(client.complete(user_says("x")).content, "ok");
    EXPECT_EQ(backend->calls, 3);
}

TEST(Client, ExhaustedRetriesRaiseTransportError) {
    auto backend = std::make_shared<FlakyBackend>(100);
    LlmClient client(backend, fast_retry(2));
    EXPECT_THROW(client.complete(user_says("x")), TransportError);
    EXPECT_EQ(backend->calls, 3);
}

TEST(Client, ConfigurationErrorsAreNotRetried) {
    auto backend = std::make_shared<RefusingBackend>();
    LlmClient client(backend, fast_retry(5));
    EXPECT_THROW(client.complete(user_says("x")), ConfigurationError);
    EXPECT_EQ(backend->calls, 1);
}

TEST(Client, ObserverSeesEveryCompletion) {
    auto client = *testing_support::constant("hi");
    int seen = 0;
    client.set_observer([&](const ChatRequest& req, const ChatResponse& resp) {
        ++seen;
        EXPECT_EQ(req.messages.back().content, "q");
        EXPECT_EQ(resp.content, "hi");
    });
    client.ask("s", "q");
    client.ask("s", "q");
    EXPECT_EQ(seen, 2);
}

TEST(Decode, StatusMapping) {
    EXPECT_THROW(OpenAiCompatibleBackend::decode(401, ""), ConfigurationError);
    EXPECT_THROW(OpenAiCompatibleBackend::decode(429, "{\"error\":{\"code\":\"insufficient_quota\"}}"), ConfigurationError);
    EXPECT_THROW(OpenAiCompatibleBackend::decode(429, "slow down"), TransientError);
    EXPECT_THROW(OpenAiCompatibleBackend::decode(503, ""), TransientError);
    EXPECT_THROW(OpenAiCompatibleBackend::decode(400, "content policy"), ProviderError);
    EXPECT_THROW(OpenAiCompatibleBackend::decode(200, "not json"), TransientError);
    EXPECT_THROW(OpenAiCompatibleBackend::decode(200, R"({"choices":[{"message":{"content":""}}]})"), TransientError);

    auto ok = OpenAiCompatibleBackend::decode(
        200, R"({"choices":[{"message":{"role":"assistant","content":"hello"}}],"usage":{"prompt_tokens":5,"completion_tokens":2}})");
    EXPECT_EQ(ok.content, "hello");
    EXPECT_EQ(ok.usage.prompt_tokens, 5);
    EXPECT_EQ(ok.usage.completion_tokens, 2);
}

TEST(Encode, SystemFirstThenMessages) {
    auto r = request_with({{Role::User, "a"}, {Role::Assistant, "b"}, {Role::User, "c"}});
    r.temperature = 0.0;
    auto doc = OpenAiCompatibleBackend::encode(r, "m1");
    EXPECT_EQ(doc["model"], "m1");
    ASSERT_EQ(doc["messages"].size(), 4u);
    EXPECT_EQ(doc["messages"][0]["role"], "system");
    EXPECT_EQ(doc["messages"][2]["role"], "assistant");
    EXPECT_EQ(doc["temperature"], 0.0);
}

TEST(OpenAiBackend, TalksToLocalServer) {
    httplib::Server server;
    std::string seen_auth;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        auto body = nlohmann::json::parse(req.body);
        std::string last = body["messages"].back()["content"];
        res.set_content(nlohmann::json{{"choices", {{{"message", {{"content", "echo:" + last}}}}}}}.dump(),
                        "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    OpenAiCompatibleBackend backend({"http://127.0.0.1:" + std::to_string(port), "/v1/chat/completions", "m", "k123"});
    auto r = backend.send(user_says("ping"));
    server.stop();
    t.join();
    EXPECT_EQ(r.content, "echo:ping");
    EXPECT_EQ(seen_auth, "Bearer k123");
}

TEST(Budget, UnderBudgetUnchanged) {
    auto r = request_with({{Role::User, "short"}});
    EXPECT_EQ(with_budget(r, 100), r);
}

TEST(Budget, DropsOldestPairsFirst) {
    std::vector<ChatMessage> msgs;
    for (int i = 0; i < 9; ++i) msgs.push_back({i % 2 == 0 ? Role::User : Role::Assistant, std::string(40, 'a' + i)});
    auto r = request_with(msgs, "");
    ASSERT_EQ(estimate_tokens(r), 90u);
    auto cut = with_budget(r, 35);
    ASSERT_EQ(cut.messages.size(), 3u);
    EXPECT_EQ(cut.messages[0].content, msgs[6].content);
    EXPECT_EQ(cut.messages.back().content, msgs[8].content);
    EXPECT_NO_THROW(validate_request(cut));
    EXPECT_EQ(cut.system, r.system);
}

TEST(Budget, OversizeFinalMessageFails) {
    EXPECT_THROW(with_budget(request_with({{Role::User, std::string(400, 'x')}}), 10), PreconditionError);
    EXPECT_THROW(with_budget(user_says("x"), 0), PreconditionError);
}

TEST(Budget, EstimateIsQuarterCodePoints) {
    EXPECT_EQ(estimate_tokens(""), 0u);
    EXPECT_EQ(estimate_tokens("abcd"), 1u);
    EXPECT_EQ(estimate_tokens("abcde"), 2u);
    EXPECT_EQ(estimate_tokens("满意满意"), 1u);
}

TEST(Registry, RolesAndTemperatures) {
    testing_support::TempDir dir;
    std::ofstream(dir / "fx.json") << R"({"default_reply": "scripted"})";
    nlohmann::json doc = {
        {"providers",
         {{"local", {{"kind", "scripted"}, {"fixture", "fx.json"}}},
          {"remote", {{"kind", "openai"}, {"base_url", "https://example.invalid"}, {"model", "m"},
                      {"api_key_env", "AIPERSONA_TEST_UNSET_KEY"}}}}},
        {"roles", {{"default", "local"}, {"judge", "local"}, {"datagen", "remote"}}},
    };
    auto reg = ProviderRegistry::from_json(doc, dir.path());
    auto judge = reg.client_for(ModelRole::Judge);
    EXPECT_EQ(judge->temperature(), 0.0);
    EXPECT_EQ(reg.client_for(ModelRole::Chatbot)->temperature(), 0.7);
    EXPECT_EQ(judge->ask("s", "u"), "scripted");
    EXPECT_THROW(reg.client_for(ModelRole::Datagen), ConfigurationError);
}

TEST(Registry, BadDocuments) {
    EXPECT_THROW(ProviderRegistry::from_json({{"providers", {{"x", {{"kind", "carrier-pigeon"}}}}}, {"roles", {}}}, {}),
                 ConfigurationError);
    EXPECT_THROW(ProviderRegistry::from_json({{"providers", nlohmann::json::object()}, {"roles", {{"default", "ghost"}}}}, {}),
                 ConfigurationError);
    EXPECT_THROW(ProviderRegistry::from_json(nlohmann::json::object(), {}), ConfigurationError);
    auto empty = ProviderRegistry::from_json({{"providers", nlohmann::json::object()}, {"roles", nlohmann::json::object()}}, {});
    EXPECT_THROW(empty.client_for(ModelRole::Judge), ConfigurationError);
}
