#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aipersona/chatbot.hpp"
#include "aipersona/datagen.hpp"
#include "aipersona/evalkit.hpp"
#include "aipersona/llm_gateway.hpp"
#include "aipersona/session_store.hpp"

namespace aipersona::bench {

struct RunConfig {
    std::filesystem::path bench_dir;
    std::filesystem::path out_dir = "runs/latest";
    std::vector<Setting> settings = {Setting::NoPersona, Setting::GoldenPersona, Setting::ConversationsRag,
                                     Setting::PersonaLearning};
    std::vector<int> ks = {3};
    int max_turns = 8;
    int max_tool_rounds = 3;
    int rag_top_n = 3;
    Locale locale = Locale::En;
    nlohmann::json providers;  // ProviderRegistry document
    std::filesystem::path providers_base;
    std::uint64_t rng_seed = 42;
    bool include_aborted_in_update = true;
    int workers = 4;

    /// Throws ConfigurationError on a broken invariant.
    void validate() const;
};

/// Overlays the keys present in `doc` onto `base`. Relative paths resolve
/// against `base_dir`. `k` may be a single integer or a list.
RunConfig apply_config_json(RunConfig base, const nlohmann::json& doc, const std::filesystem::path& base_dir);
nlohmann::json run_config_to_json(const RunConfig& config);

struct Clients {
    std::shared_ptr<llm::LlmClient> chatbot;
    std::shared_ptr<llm::LlmClient> simulator;
    std::shared_ptr<llm::LlmClient> tool_executor;
    std::shared_ptr<llm::LlmClient> judge;

    static Clients from_registry(const llm::ProviderRegistry& registry);
    /// Every role answered by one client.
    static Clients uniform(std::shared_ptr<llm::LlmClient> client);
};

/// Mutable per-persona state of one setting label.
struct PersonaState {
    PersonaProfile ground_truth;
    PersonaProfile learned;
    chatbot::UpdateSchedule schedule;
    int ordinal = 0;
    int updates_fired = 0;
    std::vector<FieldDiff> last_diff;
};

struct SessionResult {
    Session session;
    eval::EvalRecord eval;
};

/// Called with every chatbot request; used for leak audits.
using ChatbotAudit = std::function<void(Setting, const PersonaProfile&, const llm::ChatRequest&)>;

/// One benchmark conversation: simulated query, personalized reply,
/// satisfaction check, until satisfied or `max_turns`. Closes and persists
/// the session, judges the first utterance, and in the learning setting ticks
/// the update schedule. Provider faults propagate; the session stays open.
SessionResult run_session(Setting setting, int k, const Scene& scene, PersonaState& state, const RunConfig& config,
                          const Clients& clients, SessionStore& store, const ChatbotAudit& audit = {});

struct LeakFinding {
    std::string session_label;  // "<label> <user_id> <scene_id>"
    std::string value;
};

struct RunResult {
    eval::Report report;
    std::vector<eval::EvalRecord> records;
    std::map<std::string, std::map<std::string, int>> updates_fired;  // label -> user -> count
    std::vector<LeakFinding> leaks;
};

/// Every configured setting for every persona and scene of the bench, then
/// similarity judging and pairwise win rates. Writes report.json,
/// report.txt, curve.csv and results.json into `out_dir`; session stores
/// live under `out_dir/store/<setting>` and are recreated on every run.
RunResult run_benchmark(const RunConfig& config, const Clients& clients);
RunResult run_benchmark(const RunConfig& config);

/// No-persona system prompts must not carry any persona value of four or
/// more code points.
std::vector<std::string> scan_for_leaks(std::string_view prompt, const PersonaProfile& profile);

}  // namespace aipersona::bench
