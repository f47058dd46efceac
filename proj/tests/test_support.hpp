#pragma once

#include <atomic>
#include <functional>
#include <mutex>
#include <filesystem>
#include <memory>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "aipersona/llm_gateway.hpp"
#include "aipersona/profile.hpp"
#include "aipersona/scene.hpp"
#include "aipersona/session_store.hpp"

namespace testing_support {

inline std::filesystem::path resources() { return AIPERSONA_RESOURCE_DIR; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("aipersona-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
    std::filesystem::path path_;
};

inline std::shared_ptr<aipersona::llm::LlmClient> scripted(const nlohmann::json& fixture) {
    auto backend = std::make_shared<aipersona::llm::ScriptedBackend>(aipersona::llm::ScriptedBackend::from_json(fixture));
    return std::make_shared<aipersona::llm::LlmClient>(backend);
}

inline std::shared_ptr<aipersona::llm::LlmClient> scripted_file(const std::filesystem::path& path) {
    auto backend = std::make_shared<aipersona::llm::ScriptedBackend>(aipersona::llm::ScriptedBackend::load(path));
    return std::make_shared<aipersona::llm::LlmClient>(backend);
}

/// Client whose every reply is `reply`.
inline std::shared_ptr<aipersona::llm::LlmClient> constant(const std::string& reply) {
    return scripted({{"default_reply", reply}, {"rules", nlohmann::json::array()}});
}

/// Backend that records requests and replies from a fixed queue.
class QueueBackend : public aipersona::llm::ChatBackend {
public:
    explicit QueueBackend(std::vector<std::string> replies) : replies_(std::move(replies)) {}
    aipersona::llm::ChatResponse send(const aipersona::llm::ChatRequest& request) override {
        requests.push_back(request);
        aipersona::llm::ChatResponse r;
        r.content = next_ < replies_.size() ? replies_[next_++] : replies_.back();
        return r;
    }
    std::vector<aipersona::llm::ChatRequest> requests;

private:
    std::vector<std::string> replies_;
    std::size_t next_ = 0;
};

/// Backend answering through a function of the request text.
class FnBackend : public aipersona::llm::ChatBackend {
public:
    using Fn = std::function<std::string(const std::string&)>;
    explicit FnBackend(Fn fn) : fn_(std::move(fn)) {}
    aipersona::llm::ChatResponse send(const aipersona::llm::ChatRequest& request) override {
        std::lock_guard lock(mutex_);
        aipersona::llm::ChatResponse r;
        r.content = fn_(aipersona::llm::ScriptedBackend::request_text(request));
        return r;
    }

private:
    Fn fn_;
    std::mutex mutex_;
};

inline std::shared_ptr<aipersona::llm::LlmClient> fn_client(FnBackend::Fn fn) {
    return std::make_shared<aipersona::llm::LlmClient>(std::make_shared<FnBackend>(std::move(fn)));
}

inline aipersona::PersonaProfile sample_profile(const std::string& uid = "u1") {
    aipersona::PersonaProfile p(uid);
    using aipersona::Field;
    p.set(Field::Name, "Lena Fischer");
    p.set(Field::Age, "29");
    p.set(Field::Gender, "Female");
    p.set(Field::Nationality, "German");
    p.set(Field::Language, "German, English");
    p.set(Field::Career, "Backend software engineer");
    p.set(Field::Mbti, "INTJ");
    p.set(Field::ValuesHobbies, "Values autonomy; enjoys bouldering and sci-fi novels");
    p.set(Field::Pattern, "Works late evenings and reads reviews before buying");
    p.set(Field::Preference, "Prefers concise answers with code snippets");
    return p;
}

inline aipersona::Scene sample_scene() {
    aipersona::Scene s;
    s.scene_id = "job_seeking";
    s.title = "Job Seeking";
    s.description = "The user is preparing applications and interviews for a new role.";
    s.context_items = {"Has an interview next week", "Wants salary benchmarks"};
    s.api_specs = {{"web_search", "Search the web", {{"query", "string", true}}, "result list"},
                   {"search_jobs", "Search job listings", {{"role", "string", true}, {"city", "string", false}}, "listings"}};
    s.initial_query = "How should I prepare for my interview?";
    s.expected_response = "A structured preparation plan.";
    return s;
}

inline aipersona::Turn make_turn(int index, std::string user, std::string assistant) {
    aipersona::Turn t;
    t.index = index;
    t.user_text = std::move(user);
    t.assistant_text = std::move(assistant);
    return t;
}

}  // namespace testing_support
