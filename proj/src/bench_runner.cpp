#include "aipersona/bench_runner.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include "aipersona/io_util.hpp"
#include "aipersona/text_util.hpp"
#include "aipersona/user_sim.hpp"

namespace aipersona::bench {

namespace {

constexpr auto kEpoch = std::chrono::sys_days{std::chrono::year{2025} / 1 / 1};

struct RunLabel {
    Setting setting;
    int k;
    std::string label;
};

std::vector<RunLabel> run_labels(const RunConfig& config) {
    std::vector<RunLabel> out;
    for (auto s : config.settings) {
        if (s == Setting::PersonaLearning) {
            for (int k : config.ks) out.push_back({s, k, eval::setting_label(s, k)});
        } else {
            out.push_back({s, 0, eval::setting_label(s, 0)});
        }
    }
    return out;
}

std::string store_slug(const RunLabel& l) {
    if (l.setting == Setting::PersonaLearning) return fmt::format("persona_learning_k{}", l.k);
    return std::string(setting_name(l.setting));
}

chatbot::PersonaView view_for(Setting setting, const PersonaState& state) {
    switch (setting) {
        case Setting::GoldenPersona: return chatbot::PersonaView::golden(state.ground_truth);
        case Setting::PersonaLearning: return chatbot::PersonaView::learned(state.learned);
        default: return chatbot::PersonaView::none();
    }
}

struct PersonaRun {
    std::vector<eval::EvalRecord> records;
    std::vector<std::string> failures;
    std::map<std::string, int> updates;
    std::vector<LeakFinding> leaks;
};

PersonaRun run_persona(const datagen::BenchPersona& persona, const std::vector<RunLabel>& labels, const RunConfig& config,
                       const Clients& clients) {
    PersonaRun out;
    const auto& gt = persona.profile;
    const auto& uid = gt.user_id();
    for (const auto& l : labels) {
        SessionStore store(config.out_dir / "store" / store_slug(l), SessionStore::logical_clock(Timestamp{kEpoch}));
        store.register_user(uid);
        PersonaState state;
        state.ground_truth = gt;
        state.learned = PersonaProfile::cold_start(uid);
        state.schedule.k = l.setting == Setting::PersonaLearning ? l.k : 1;

        std::string current_scene;
        std::mutex leak_mutex;
        ChatbotAudit audit = [&](Setting s, const PersonaProfile& profile, const llm::ChatRequest& request) {
            if (s != Setting::NoPersona) return;
            for (auto& v : scan_for_leaks(request.system, profile)) {
                std::lock_guard lock(leak_mutex);
                out.leaks.push_back({fmt::format("{} {} {}", l.label, uid, current_scene), std::move(v)});
            }
        };

        for (const auto& scene : persona.scenes) {
            current_scene = scene.scene_id;
            try {
                auto result = run_session(l.setting, l.k, scene, state, config, clients, store, audit);
                out.records.push_back(std::move(result.eval));
            } catch (const Error& e) {
                out.failures.push_back(fmt::format("{} {} {}: {}", l.label, uid, scene.scene_id, e.what()));
                spdlog::warn("session failed: {} {} {}: {}", l.label, uid, scene.scene_id, e.what());
            }
        }

        if (l.setting == Setting::PersonaLearning) {
            out.updates[l.label] = state.updates_fired;
            auto last = std::find_if(out.records.rbegin(), out.records.rend(),
                                     [&](const eval::EvalRecord& r) { return r.setting == l.setting && r.k == l.k; });
            if (last != out.records.rend()) {
                try {
                    last->similarity = eval::judge_similarity(gt, state.learned, *clients.judge, config.locale);
                } catch (const Error& e) {
                    out.failures.push_back(fmt::format("{} {}: similarity judging failed: {}", l.label, uid, e.what()));
                }
            }
            save_profile(state.learned, store.user_dir(uid) / "learned_profile.json");
        }
    }
    return out;
}

std::vector<eval::WinRateBucket> win_rates(const std::vector<eval::EvalRecord>& records, const RunConfig& config,
                                           const Clients& clients, const datagen::BenchManifest& manifest,
                                           std::vector<std::string>& failures) {
    std::map<std::pair<std::string, int>, const eval::EvalRecord*> golden;
    for (const auto& r : records) {
        if (r.setting == Setting::GoldenPersona) golden[{r.user_id, r.ordinal}] = &r;
    }
    std::vector<eval::WinRateBucket> out;
    if (golden.empty()) return out;

    std::map<std::string, const PersonaProfile*> profiles;
    for (const auto& p : manifest.personas) profiles[p.profile.user_id()] = &p.profile;

    for (int k : config.ks) {
        if (std::find(config.settings.begin(), config.settings.end(), Setting::PersonaLearning) == config.settings.end()) break;
        const auto label = eval::setting_label(Setting::PersonaLearning, k);
        std::vector<const eval::EvalRecord*> learning;
        for (const auto& r : records) {
            if (r.setting == Setting::PersonaLearning && r.k == k) learning.push_back(&r);
        }
        std::sort(learning.begin(), learning.end(),
                  [](auto* a, auto* b) { return std::tie(a->user_id, a->ordinal) < std::tie(b->user_id, b->ordinal); });
        std::uint64_t bucket_index = 0;
        for (auto [first, last] : eval::win_rate_buckets()) {
            ++bucket_index;
            std::vector<eval::PairwiseItem> pairs;
            for (const auto* r : learning) {
                if (r->ordinal < first || r->ordinal > last) continue;
                auto g = golden.find({r->user_id, r->ordinal});
                if (g == golden.end() || r->first_answer.empty() || g->second->first_answer.empty()) continue;
                pairs.push_back({r->first_answer, g->second->first_answer, *profiles.at(r->user_id), r->first_query});
            }
            if (pairs.empty()) continue;
            eval::WinRateBucket bucket{label, eval::bucket_name(first, last), first, last, static_cast<int>(pairs.size()), std::nullopt};
            try {
                auto rate = eval::pairwise_winrate(pairs, *clients.judge, config.rng_seed * 1000003ULL + bucket_index * 31ULL + static_cast<std::uint64_t>(k),
                                                   config.locale);
                bucket.rate = rate.rate;
            } catch (const Error& e) {
                failures.push_back(fmt::format("{} bucket {}: pairwise judging failed: {}", label, bucket.bucket, e.what()));
            }
            out.push_back(std::move(bucket));
        }
    }
    return out;
}

}  // namespace

void RunConfig::validate() const {
    if (bench_dir.empty()) throw ConfigurationError("bench_dir is required");
    if (settings.empty()) throw ConfigurationError("at least one setting is required");
    if (ks.empty()) throw ConfigurationError("at least one update frequency k is required");
    for (int k : ks) {
        if (k < 1) throw ConfigurationError(fmt::format("update frequency k must be at least 1, got {}", k));
    }
    if (max_turns < 1) throw ConfigurationError("max_turns must be at least 1");
    if (max_tool_rounds < 1) throw ConfigurationError("max_tool_rounds must be at least 1");
    if (rag_top_n < 1) throw ConfigurationError("rag_top_n must be at least 1");
    if (workers < 1) throw ConfigurationError("workers must be at least 1");
}

RunConfig apply_config_json(RunConfig c, const nlohmann::json& doc, const std::filesystem::path& base_dir) {
    auto resolve = [&](const std::string& p) {
        std::filesystem::path path = p;
        return path.is_absolute() ? path : base_dir / path;
    };
    try {
        if (doc.contains("bench_dir")) c.bench_dir = resolve(doc["bench_dir"].get<std::string>());
        if (doc.contains("out_dir")) c.out_dir = resolve(doc["out_dir"].get<std::string>());
        if (doc.contains("settings")) {
            c.settings.clear();
            for (const auto& s : doc["settings"]) c.settings.push_back(parse_setting(s.get<std::string>()));
        }
        if (doc.contains("k")) {
            c.ks = doc["k"].is_array() ? doc["k"].get<std::vector<int>>() : std::vector<int>{doc["k"].get<int>()};
        }
        if (doc.contains("max_turns")) c.max_turns = doc["max_turns"].get<int>();
        if (doc.contains("max_tool_rounds")) c.max_tool_rounds = doc["max_tool_rounds"].get<int>();
        if (doc.contains("rag_top_n")) c.rag_top_n = doc["rag_top_n"].get<int>();
        if (doc.contains("locale")) c.locale = parse_locale(doc["locale"].get<std::string>());
        if (doc.contains("rng_seed")) c.rng_seed = doc["rng_seed"].get<std::uint64_t>();
        if (doc.contains("include_aborted_in_update")) c.include_aborted_in_update = doc["include_aborted_in_update"].get<bool>();
        if (doc.contains("workers")) c.workers = doc["workers"].get<int>();
        if (doc.contains("providers")) {
            const auto& p = doc["providers"];
            if (p.is_string()) {
                auto path = resolve(p.get<std::string>());
                c.providers = io::read_json(path);
                c.providers_base = path.parent_path();
            } else {
                c.providers = p;
                c.providers_base = base_dir;
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigurationError(fmt::format("malformed run configuration: {}", e.what()));
    }
    return c;
}

nlohmann::json run_config_to_json(const RunConfig& c) {
    std::vector<std::string> settings;
    for (auto s : c.settings) settings.emplace_back(setting_name(s));
    return {{"settings", settings},
            {"k", c.ks},
            {"max_turns", c.max_turns},
            {"max_tool_rounds", c.max_tool_rounds},
            {"rag_top_n", c.rag_top_n},
            {"locale", locale_name(c.locale)},
            {"rng_seed", c.rng_seed},
            {"include_aborted_in_update", c.include_aborted_in_update}};
}

Clients Clients::from_registry(const llm::ProviderRegistry& registry) {
    return {registry.client_for(llm::ModelRole::Chatbot), registry.client_for(llm::ModelRole::Simulator),
            registry.client_for(llm::ModelRole::ToolExecutor), registry.client_for(llm::ModelRole::Judge)};
}

Clients Clients::uniform(std::shared_ptr<llm::LlmClient> client) { return {client, client, client, client}; }

std::vector<std::string> scan_for_leaks(std::string_view prompt, const PersonaProfile& profile) {
    return datagen::leaked_values(prompt, profile);
}

SessionResult run_session(Setting setting, int k, const Scene& scene, PersonaState& state, const RunConfig& config,
                          const Clients& clients, SessionStore& store, const ChatbotAudit& audit) {
    if (!scene.initial_query || !scene.expected_response) {
        throw PreconditionError(fmt::format("scene '{}' lacks its initial query or expected response", scene.scene_id));
    }
    const auto& uid = state.ground_truth.user_id();
    auto session = store.create_session(uid, scene.scene_id, setting);

    llm::LlmClient chat = *clients.chatbot;
    if (audit) {
        const auto& profile = state.ground_truth;
        chat.set_observer([&](const llm::ChatRequest& req, const llm::ChatResponse&) { audit(setting, profile, req); });
    }

    std::vector<Session> retrieved;
    if (setting == Setting::ConversationsRag) {
        std::vector<Session> corpus;
        for (auto& s : store.list_sessions(uid)) {
            if (s.closed()) corpus.push_back(std::move(s));
        }
        retrieved = eval::retrieve_similar(*scene.initial_query, corpus, static_cast<std::size_t>(config.rag_top_n));
    }

    const auto view = view_for(setting, state);
    chatbot::Options options{config.max_tool_rounds, config.locale};
    std::vector<Turn> history;
    auto outcome = Outcome::MaxTurnsReached;
    for (int t = 0; t < config.max_turns; ++t) {
        Turn turn;
        turn.index = t;
        turn.user_text = usersim::next_query(state.ground_truth, scene, history, *clients.simulator, config.locale);
        auto reply = chatbot::respond(view, turn.user_text, history, scene, chat, *clients.tool_executor,
                                      setting == Setting::ConversationsRag ? &retrieved : nullptr, options);
        turn.assistant_text = std::move(reply.text);
        turn.tool_calls = std::move(reply.tool_records);
        turn.timestamp = store.now();
        store.append_turn(session.session_id, turn);
        history.push_back(std::move(turn));

        auto verdict = usersim::check_satisfaction(state.ground_truth, history, *scene.expected_response, *clients.simulator,
                                                   config.locale);
        if (verdict.verdict == usersim::Verdict::Satisfied) {
            outcome = Outcome::Satisfied;
            break;
        }
    }
    session = store.close_session(session.session_id, outcome);
    ++state.ordinal;

    SessionResult result;
    result.eval.session_id = session.session_id;
    result.eval.user_id = uid;
    result.eval.setting = setting;
    result.eval.k = setting == Setting::PersonaLearning ? k : 0;
    result.eval.ordinal = state.ordinal;
    result.eval.utterances = eval::utterance_count(session);
    result.eval.first_query = session.turns.front().user_text;
    result.eval.first_answer = session.turns.front().assistant_text;
    try {
        result.eval.scores = eval::judge_first_utterance(state.ground_truth, result.eval.first_query, result.eval.first_answer,
                                                         *clients.judge, config.locale);
    } catch (const Error& e) {
        spdlog::warn("first-utterance judging failed for {}: {}", session.session_id, e.what());
    }

    if (setting == Setting::PersonaLearning) {
        auto [next, fire] = chatbot::tick_schedule(state.schedule);
        state.schedule = next;
        if (fire) {
            auto recent = store.last_k_sessions(uid, static_cast<std::size_t>(state.schedule.k));
            if (!config.include_aborted_in_update) {
                std::erase_if(recent, [](const Session& s) { return s.outcome != Outcome::Satisfied; });
            }
            state.last_diff.clear();
            if (!recent.empty()) {
                ++state.updates_fired;
                auto updates = chatbot::extract_field_updates(chatbot::PersonaView::learned(state.learned), recent,
                                                              *clients.chatbot, config.locale);
                auto [profile, used] = chatbot::apply_learned_updates(state.learned, updates);
                state.last_diff = diff_profiles(state.learned, profile);
                state.learned = std::move(profile);
            }
        }
    }
    result.session = std::move(session);
    return result;
}

RunResult run_benchmark(const RunConfig& config, const Clients& clients) {
    config.validate();
    auto manifest = datagen::load_bench(config.bench_dir);
    const auto labels = run_labels(config);

    std::filesystem::remove_all(config.out_dir / "store");
    std::filesystem::create_directories(config.out_dir);

    std::vector<PersonaRun> runs(manifest.personas.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < manifest.personas.size(); i = next++) {
            runs[i] = run_persona(manifest.personas[i], labels, config, clients);
        }
    };
    {
        std::vector<std::jthread> pool;
        auto n = std::min<std::size_t>(static_cast<std::size_t>(config.workers), std::max<std::size_t>(manifest.personas.size(), 1));
        for (std::size_t w = 0; w < n; ++w) pool.emplace_back(worker);
    }

    RunResult result;
    std::vector<std::string> failures;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        auto& r = runs[i];
        result.records.insert(result.records.end(), r.records.begin(), r.records.end());
        failures.insert(failures.end(), r.failures.begin(), r.failures.end());
        for (const auto& [label, n] : r.updates) result.updates_fired[label][manifest.personas[i].profile.user_id()] = n;
        result.leaks.insert(result.leaks.end(), r.leaks.begin(), r.leaks.end());
    }
    if (result.records.empty()) {
        throw Error(fmt::format("benchmark run produced no sessions ({} failure(s))", failures.size()));
    }

    result.report = eval::aggregate_report(result.records);
    result.report.win_rates = win_rates(result.records, config, clients, manifest, failures);
    result.report.failures = failures;
    result.report.complete = failures.empty();

    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : result.records) records.push_back(eval::record_to_json(r));
    nlohmann::json leaks = nlohmann::json::array();
    for (const auto& l : result.leaks) leaks.push_back({{"session", l.session_label}, {"value", l.value}});
    nlohmann::json results = {{"config", run_config_to_json(config)},
                              {"records", records},
                              {"updates_fired", result.updates_fired},
                              {"leaks", leaks},
                              {"failures", failures}};

    io::write_json_atomic(config.out_dir / "report.json", eval::report_to_json(result.report));
    io::write_file_atomic(config.out_dir / "report.txt", eval::report_table(result.report));
    io::write_file_atomic(config.out_dir / "curve.csv", eval::curve_csv(result.report));
    io::write_json_atomic(config.out_dir / "results.json", results);
    return result;
}

RunResult run_benchmark(const RunConfig& config) {
    config.validate();
    if (config.providers.is_null()) throw ConfigurationError("no provider configuration given");
    auto registry = llm::ProviderRegistry::from_json(config.providers, config.providers_base);
    return run_benchmark(config, Clients::from_registry(registry));
}

}  // namespace aipersona::bench
