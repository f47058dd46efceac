#include "aipersona/datagen.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include "aipersona/io_util.hpp"
#include "aipersona/text_util.hpp"

namespace aipersona::datagen {

namespace {

std::string strip_list_marker(std::string_view line) {
    auto s = text::trim(line);
    if (s.starts_with("- ") || s.starts_with("* ")) return text::trim_copy(s.substr(2));
    std::size_t i = 0;
    while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
    if (i > 0 && i + 1 < s.size() && (s[i] == '.' || s[i] == ')') && s[i + 1] == ' ') return text::trim_copy(s.substr(i + 2));
    return std::string(s);
}

nlohmann::json exemplar_json(const PersonaProfile& p) {
    auto doc = profile_to_json(p);
    doc.erase("user_id");
    return doc;
}

std::string join_or_none(const std::vector<std::string>& items, std::string_view sep) {
    if (items.empty()) return "(none)";
    return fmt::format("{}", fmt::join(items, sep));
}

std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

std::optional<PersonaProfile> parse_expanded_profile(std::string_view reply, const std::string& user_id) {
    auto object = text::extract_json_object(reply);
    if (!object) return std::nullopt;
    try {
        auto doc = nlohmann::json::parse(*object);
        if (!doc.is_object()) return std::nullopt;
        doc["user_id"] = user_id;
        auto profile = profile_from_json(doc);
        if (!validate_profile(profile).valid) return std::nullopt;
        return profile;
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    } catch (const ConfigurationError&) {
        return std::nullopt;
    }
}

std::vector<Scene> select_commons(const std::vector<Scene>& roster, int count, std::mt19937_64& rng) {
    auto take = std::min<std::size_t>(roster.size(), static_cast<std::size_t>(std::max(count, 0)));
    std::vector<std::size_t> idx(roster.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < take; ++i) std::swap(idx[i], idx[i + rng() % (idx.size() - i)]);
    idx.resize(take);
    std::sort(idx.begin(), idx.end());
    std::vector<Scene> out;
    for (auto i : idx) out.push_back(roster[i]);
    return out;
}

struct PersonaBuild {
    BenchPersona persona;
    std::vector<std::string> failures;
    std::map<std::string, int> neutralize_attempts;
};

PersonaBuild build_persona(const PersonaProfile& profile, std::size_t index, const std::vector<Scene>& common_roster,
                           const BenchConfig& config, const llm::LlmClient& client, const PromptCatalog& catalog) {
    PersonaBuild out;
    out.persona.profile = profile;
    const auto& uid = profile.user_id();
    auto rng = derived_rng(config.rng_seed, index);

    std::vector<Scene> order = select_commons(common_roster, config.common_per_persona, rng);
    try {
        auto specific = generate_scenes(profile, common_roster, config.m_scenes, client, catalog);
        order.insert(order.end(), specific.begin(), specific.end());
    } catch (const Error& e) {
        out.failures.push_back(fmt::format("{}: scene generation failed: {}", uid, e.what()));
    }

    const int span = std::max(0, config.resample_max - config.resample_min);
    auto repeats = static_cast<std::size_t>(std::max(0, config.resample_min) + static_cast<int>(rng() % (span + 1)));
    repeats = std::min(repeats, order.size());
    auto sources = sample_indices(rng(), order.size(), repeats);
    std::vector<std::string> source_ids;
    for (auto i : sources) source_ids.push_back(order[i].scene_id);

    for (std::size_t r = 0; r < source_ids.size(); ++r) {
        auto src_pos = static_cast<std::size_t>(
            std::find_if(order.begin(), order.end(), [&](const Scene& s) { return s.scene_id == source_ids[r]; }) - order.begin());
        auto slots = order.size() - src_pos;
        auto insert_at = src_pos + 1 + static_cast<std::size_t>(rng() % slots);
        try {
            auto variant = generate_scene_variant(profile, order[src_pos], fmt::format("{}-r{:02}", uid, r + 1), client, catalog);
            order.insert(order.begin() + static_cast<std::ptrdiff_t>(insert_at), std::move(variant));
        } catch (const Error& e) {
            out.failures.push_back(fmt::format("{}: variant of '{}' failed: {}", uid, source_ids[r], e.what()));
        }
    }

    for (auto& scene : order) {
        try {
            auto query = generate_initial_query(profile, scene, client, catalog);
            auto verdict = filter_query(query, scene, client, catalog);
            if (!verdict.keep) {
                out.persona.dropped.push_back({scene.scene_id, verdict.reason});
                continue;
            }
            auto neutral = neutralize_query(query, profile, client, catalog);
            if (neutral.flagged) {
                out.persona.dropped.push_back(
                    {scene.scene_id, fmt::format("persona-leak: {}", fmt::join(neutral.leaked, ", "))});
                continue;
            }
            scene.initial_query = neutral.text;
            out.neutralize_attempts[scene.scene_id] = neutral.attempts;
            generate_expected_response(profile, scene, client, catalog);
            out.persona.scenes.push_back(scene);
        } catch (const Error& e) {
            out.persona.dropped.push_back({scene.scene_id, fmt::format("error: {}", e.what())});
            out.failures.push_back(fmt::format("{}: scene '{}' failed: {}", uid, scene.scene_id, e.what()));
        }
    }
    return out;
}

void write_persona(const std::filesystem::path& dir, const PersonaBuild& build) {
    std::filesystem::create_directories(dir);
    save_profile(build.persona.profile, dir / "profile.json");
    nlohmann::json scenes = nlohmann::json::array();
    nlohmann::json queries = nlohmann::json::array();
    for (const auto& s : build.persona.scenes) {
        scenes.push_back(scene_to_json(s, false));
        queries.push_back({{"scene_id", s.scene_id},
                           {"initial_query", s.initial_query.value_or("")},
                           {"expected_response", s.expected_response.value_or("")},
                           {"neutralize_attempts", build.neutralize_attempts.at(s.scene_id)}});
    }
    nlohmann::json dropped = nlohmann::json::array();
    for (const auto& d : build.persona.dropped) dropped.push_back({{"scene_id", d.scene_id}, {"reason", d.reason}});
    io::write_json_atomic(dir / "scenes.json", {{"scenes", scenes}});
    io::write_json_atomic(dir / "queries.json", {{"queries", queries}, {"dropped", dropped}});
}

}  // namespace

std::vector<SeedPersona> load_seeds(const std::filesystem::path& path) {
    auto doc = io::read_json(path);
    std::vector<SeedPersona> seeds;
    try {
        for (const auto& s : doc.is_array() ? doc : doc.at("seeds")) {
            SeedPersona seed;
            seed.profile = profile_from_json(s.at("profile"));
            if (s.contains("hint") && !s["hint"].is_null()) seed.hint = s["hint"].get<std::string>();
            seeds.push_back(std::move(seed));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigurationError(fmt::format("{}: malformed seed list: {}", path.string(), e.what()));
    }
    return seeds;
}

std::string summarize_seed(const SeedPersona& seed, const llm::LlmClient& client, const PromptCatalog& catalog) {
    auto report = validate_profile(seed.profile);
    if (!report.valid) {
        throw PreconditionError(fmt::format("seed '{}' is invalid: {}", seed.profile.user_id(), report.violations.front().message));
    }
    if (seed.hint) return *seed.hint;
    auto prompt = catalog.render({TemplateName::SeedSummary, Locale::En}, {{"persona", profile_to_prompt_text(seed.profile)}});
    auto hint = text::collapse_whitespace(client.ask(prompt.system, prompt.user));
    return text::utf8_truncate(hint, kMaxHintLength);
}

double persona_jaccard(const PersonaProfile& a, const PersonaProfile& b) {
    return text::jaccard(text::token_set(concatenated_values(a)), text::token_set(concatenated_values(b)));
}

std::vector<PersonaProfile> generate_personas(const std::vector<SeedPersona>& seeds, int n, const llm::LlmClient& client,
                                              const PersonaOptions& options, const PromptCatalog& catalog) {
    if (n < 0) throw PreconditionError("persona count must not be negative");
    if (n == 0) return {};
    if (seeds.size() < 2) throw PreconditionError("persona synthesis needs at least two seeds");

    std::vector<std::string> seed_hints;
    nlohmann::json examples = nlohmann::json::array();
    for (const auto& s : seeds) {
        seed_hints.push_back(summarize_seed(s, client, catalog));
        examples.push_back(exemplar_json(s.profile));
    }
    const auto examples_text = examples.dump(2);

    std::vector<PersonaProfile> accepted;
    std::vector<std::string> used_hints;
    std::set<std::string> seen_hints;
    const auto wanted = static_cast<std::size_t>(n);

    for (int round = 0; round <= options.max_hint_rounds && accepted.size() < wanted; ++round) {
        auto prompt = catalog.render({TemplateName::PersonaHints, Locale::En},
                                     {{"count", std::to_string(wanted - accepted.size())},
                                      {"seed_hints", fmt::format("{}", fmt::join(seed_hints, "\n"))},
                                      {"avoid", join_or_none(used_hints, "\n")}});
        std::vector<std::string> hints;
        for (const auto& line : text::split_lines(client.ask(prompt.system, prompt.user))) {
            auto hint = strip_list_marker(line);
            if (!hint.empty() && seen_hints.insert(hint).second) hints.push_back(std::move(hint));
        }
        if (hints.empty()) break;

        for (const auto& hint : hints) {
            if (accepted.size() >= wanted) break;
            used_hints.push_back(hint);
            const auto uid = fmt::format("{}{:03}", options.id_prefix, accepted.size() + 1);
            for (int attempt = 1; attempt <= options.max_expand_attempts; ++attempt) {
                std::vector<std::string> names;
                for (const auto& p : accepted) names.push_back(p.get(Field::Name));
                auto expand = catalog.render({TemplateName::PersonaExpand, Locale::En}, {{"examples", examples_text},
                                                                                          {"hint", hint},
                                                                                          {"attempt", std::to_string(attempt)},
                                                                                          {"avoid", join_or_none(names, ", ")}});
                auto profile = parse_expanded_profile(client.ask(expand.system, expand.user), uid);
                if (!profile) {
                    spdlog::warn("persona expansion for hint '{}' attempt {} was not a valid profile", text::utf8_truncate(hint, 60), attempt);
                    continue;
                }
                auto dup = std::find_if(accepted.begin(), accepted.end(),
                                        [&](const PersonaProfile& p) { return persona_jaccard(p, *profile) >= kDuplicateJaccard; });
                if (dup != accepted.end()) {
                    spdlog::info("persona '{}' duplicates '{}'; regenerating", profile->get(Field::Name), dup->user_id());
                    continue;
                }
                accepted.push_back(std::move(*profile));
                break;
            }
        }
    }
    if (accepted.size() < wanted) {
        throw GenerationError(fmt::format("generated {} of {} unique personas before the retry cap", accepted.size(), wanted));
    }
    return accepted;
}

Scene parse_scene_payload(std::string_view reply) {
    auto object = text::extract_json_object(reply);
    if (!object) throw ParseError("scene payload holds no JSON object", std::string(reply));
    Scene scene;
    try {
        auto doc = nlohmann::json::parse(*object);
        scene.title = doc.at("title").get<std::string>();
        scene.description = doc.at("description").get<std::string>();
        scene.context_items = doc.at("context_items").get<std::vector<std::string>>();
        for (const auto& spec : doc.at("api_specs")) scene.api_specs.push_back(tools::api_spec_from_json(spec));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(fmt::format("malformed scene payload: {}", e.what()), std::string(reply));
    } catch (const Error& e) {
        throw ParseError(fmt::format("malformed scene payload: {}", e.what()), std::string(reply));
    }
    scene.scene_id = "pending";
    scene.kind = SceneKind::PersonaSpecific;
    scene.owner_user_id = "pending";
    auto problems = scene_shape_problems(scene);
    if (!problems.empty()) throw ParseError(fmt::format("invalid scene: {}", fmt::join(problems, "; ")), std::string(reply));
    return scene;
}

std::vector<Scene> generate_scenes(const PersonaProfile& profile, const std::vector<Scene>& common_scenes, int m,
                                   const llm::LlmClient& client, const PromptCatalog& catalog) {
    if (common_scenes.empty()) throw PreconditionError("scene generation needs common scene exemplars");
    if (m <= 0) return {};
    nlohmann::json examples = nlohmann::json::array();
    for (const auto& s : common_scenes) {
        auto doc = scene_to_json(s, false);
        doc.erase("scene_id");
        doc.erase("kind");
        examples.push_back(std::move(doc));
    }
    const auto examples_text = examples.dump(2);
    std::vector<Scene> out;
    std::vector<std::string> titles;
    for (int i = 1; i <= m; ++i) {
        auto prompt = catalog.render({TemplateName::SceneGenerate, Locale::En}, {{"examples", examples_text},
                                                                                 {"persona", profile_to_prompt_text(profile)},
                                                                                 {"index", std::to_string(i)},
                                                                                 {"existing", join_or_none(titles, "; ")}});
        auto scene = parse_scene_payload(client.ask(prompt.system, prompt.user));
        scene.scene_id = fmt::format("{}-s{:02}", profile.user_id(), i);
        scene.owner_user_id = profile.user_id();
        titles.push_back(scene.title);
        out.push_back(std::move(scene));
    }
    return out;
}

Scene generate_scene_variant(const PersonaProfile& profile, const Scene& source, std::string variant_id,
                             const llm::LlmClient& client, const PromptCatalog& catalog) {
    auto source_doc = scene_to_json(source, false);
    source_doc.erase("scene_id");
    source_doc.erase("kind");
    source_doc.erase("owner_user_id");
    source_doc.erase("variant_of");
    auto prompt = catalog.render({TemplateName::SceneVariant, Locale::En},
                                 {{"persona", profile_to_prompt_text(profile)}, {"scene", source_doc.dump(2)}});
    auto scene = parse_scene_payload(client.ask(prompt.system, prompt.user));
    scene.scene_id = std::move(variant_id);
    scene.owner_user_id = profile.user_id();
    scene.variant_of = source.variant_of.value_or(source.scene_id);
    return scene;
}

std::string generate_initial_query(const PersonaProfile& profile, Scene& scene, const llm::LlmClient& client,
                                   const PromptCatalog& catalog) {
    if (text::trim(scene.description).empty() || scene.context_items.empty()) {
        throw PreconditionError(fmt::format("scene '{}' is incomplete", scene.scene_id));
    }
    auto prompt = catalog.render({TemplateName::InitialQuery, Locale::En}, {{"persona", profile_to_prompt_text(profile)},
                                                                            {"scene", scene_summary(scene)},
                                                                            {"scene_context", scene_context_text(scene)}});
    auto query = text::trim_copy(client.ask(prompt.system, prompt.user));
    if (query.empty()) throw GenerationError(fmt::format("empty initial query for scene '{}'", scene.scene_id));
    scene.initial_query = query;
    return query;
}

std::string generate_expected_response(const PersonaProfile& profile, Scene& scene, const llm::LlmClient& client,
                                       const PromptCatalog& catalog) {
    if (text::trim(scene.description).empty() || scene.context_items.empty()) {
        throw PreconditionError(fmt::format("scene '{}' is incomplete", scene.scene_id));
    }
    if (!scene.initial_query) throw PreconditionError(fmt::format("scene '{}' has no initial query", scene.scene_id));
    auto prompt = catalog.render({TemplateName::ExpectedResponse, Locale::En}, {{"persona", profile_to_prompt_text(profile)},
                                                                                {"scene", scene_summary(scene)},
                                                                                {"scene_context", scene_context_text(scene)},
                                                                                {"query", *scene.initial_query}});
    auto expected = text::trim_copy(client.ask(prompt.system, prompt.user));
    if (expected.empty()) throw GenerationError(fmt::format("empty expected response for scene '{}'", scene.scene_id));
    scene.expected_response = expected;
    return expected;
}

FilterVerdict parse_filter_verdict(std::string_view reply) {
    auto keep = reply.find("<Keep>");
    auto drop = reply.find("<Drop>");
    if (keep == std::string_view::npos && drop == std::string_view::npos) return {false, "unparseable-verdict"};
    if (keep < drop) return {true, ""};
    return {false, "unanswerable"};
}

FilterVerdict filter_query(std::string_view query, const Scene& scene, const llm::LlmClient& client,
                           const PromptCatalog& catalog) {
    auto prompt = catalog.render({TemplateName::QueryFilter, Locale::En},
                                 {{"scene", scene_summary(scene)}, {"query", std::string(query)}});
    return parse_filter_verdict(client.ask(prompt.system, prompt.user));
}

std::vector<std::string> leaked_values(std::string_view text_in, const PersonaProfile& profile) {
    std::vector<std::string> out;
    for (auto f : kAllFields) {
        const auto& v = profile.get(f);
        if (v == kUnknown || text::utf8_length(v) < 4) continue;
        if (text_in.find(v) != std::string_view::npos) out.push_back(v);
    }
    return out;
}

NeutralizedQuery neutralize_query(std::string_view query, const PersonaProfile& profile, const llm::LlmClient& client,
                                  const PromptCatalog& catalog) {
    NeutralizedQuery out;
    out.text = std::string(query);
    out.leaked = leaked_values(query, profile);
    for (int attempt = 1; attempt <= 1 + kNeutralizeRetries; ++attempt) {
        auto prompt = catalog.render({TemplateName::QueryNeutralize, Locale::En},
                                     {{"query", std::string(query)},
                                      {"persona", profile_to_prompt_text(profile)},
                                      {"attempt", std::to_string(attempt)},
                                      {"leaked", join_or_none(out.leaked, ", ")}});
        auto rewrite = text::trim_copy(client.ask(prompt.system, prompt.user));
        out.attempts = attempt;
        if (rewrite.empty()) continue;
        out.text = std::move(rewrite);
        out.leaked = leaked_values(out.text, profile);
        if (out.leaked.empty()) return out;
    }
    out.leaked = leaked_values(out.text, profile);
    out.flagged = !out.leaked.empty() || text::trim(out.text).empty();
    if (out.flagged) spdlog::warn("query for '{}' still leaks persona values after {} attempts", profile.user_id(), out.attempts);
    return out;
}

BenchConfig BenchConfig::defaults() {
    BenchConfig c;
    std::filesystem::path resources = AIPERSONA_RESOURCE_DIR;
    if (const char* env = std::getenv("AIPERSONA_RESOURCES"); env && *env) resources = env;
    c.seeds_path = resources / "seeds" / "seed_personas.json";
    c.common_scenes_path = resources / "scenes" / "common_scenes.json";
    c.output_dir = "bench";
    return c;
}

nlohmann::json bench_config_to_json(const BenchConfig& c) {
    return {{"n_personas", c.n_personas},
            {"m_scenes", c.m_scenes},
            {"common_per_persona", c.common_per_persona},
            {"resample_min", c.resample_min},
            {"resample_max", c.resample_max},
            {"rng_seed", c.rng_seed}};
}

std::size_t BenchManifest::scene_count() const {
    std::size_t n = 0;
    for (const auto& p : personas) n += p.scenes.size();
    return n;
}

std::vector<std::size_t> sample_indices(std::uint64_t seed, std::size_t pool, std::size_t count) {
    count = std::min(count, pool);
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> idx(pool);
    for (std::size_t i = 0; i < pool; ++i) idx[i] = i;
    for (std::size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + rng() % (pool - i)]);
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
    return idx;
}

BenchManifest build_bench(const BenchConfig& config, const llm::LlmClient& client, const PromptCatalog& catalog) {
    if (config.n_personas < 0 || config.m_scenes < 0 || config.common_per_persona < 0) {
        throw ConfigurationError("persona and scene counts must not be negative");
    }
    if (config.resample_min < 0 || config.resample_max < config.resample_min) {
        throw ConfigurationError("resample range must satisfy 0 <= min <= max");
    }
    auto seeds = load_seeds(config.seeds_path);
    if (seeds.empty()) throw PreconditionError("no seed personas found");
    auto common = load_scenes(config.common_scenes_path);
    if (common.empty()) throw PreconditionError("no common scenes found");
    for (const auto& s : common) {
        auto problems = scene_shape_problems(s);
        if (!problems.empty()) throw ConfigurationError(fmt::format("common scene '{}': {}", s.scene_id, problems.front()));
    }

    auto profiles = generate_personas(seeds, config.n_personas, client, {}, catalog);

    std::vector<PersonaBuild> builds(profiles.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < profiles.size(); i = next++) {
            builds[i] = build_persona(profiles[i], i, common, config, client, catalog);
        }
    };
    std::vector<std::jthread> pool;
    auto workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(config.workers, 1)), 1, std::max<std::size_t>(profiles.size(), 1));
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    pool.clear();

    BenchManifest manifest;
    manifest.dir = config.output_dir;
    manifest.rng_seed = config.rng_seed;
    std::filesystem::create_directories(config.output_dir);

    nlohmann::json personas = nlohmann::json::array();
    std::size_t scene_total = 0, dropped_total = 0;
    for (auto& b : builds) {
        const auto& uid = b.persona.profile.user_id();
        write_persona(config.output_dir / "personas" / uid, b);
        std::vector<std::string> ids;
        for (const auto& s : b.persona.scenes) ids.push_back(s.scene_id);
        personas.push_back({{"user_id", uid}, {"dir", fmt::format("personas/{}", uid)}, {"scenes", ids}, {"dropped", b.persona.dropped.size()}});
        scene_total += b.persona.scenes.size();
        dropped_total += b.persona.dropped.size();
        manifest.failures.insert(manifest.failures.end(), b.failures.begin(), b.failures.end());
        manifest.personas.push_back(std::move(b.persona));
    }
    manifest.complete = manifest.failures.empty();

    nlohmann::json doc = {{"format", "personabench/1"},
                          {"rng_seed", config.rng_seed},
                          {"config", bench_config_to_json(config)},
                          {"personas", personas},
                          {"counts", {{"personas", manifest.personas.size()}, {"scenes", scene_total}, {"dropped", dropped_total}}},
                          {"complete", manifest.complete},
                          {"failures", manifest.failures}};
    io::write_json_atomic(config.output_dir / "manifest.json", doc);
    return manifest;
}

BenchManifest load_bench(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw ConfigurationError(fmt::format("bench directory '{}' does not exist", dir.string()));
    auto doc = io::read_json(dir / "manifest.json");
    BenchManifest manifest;
    manifest.dir = dir;
    try {
        manifest.rng_seed = doc.at("rng_seed").get<std::uint64_t>();
        manifest.complete = doc.value("complete", true);
        manifest.failures = doc.value("failures", std::vector<std::string>{});
        for (const auto& p : doc.at("personas")) {
            const auto pdir = dir / p.at("dir").get<std::string>();
            BenchPersona persona;
            persona.profile = load_profile(pdir / "profile.json");
            auto scenes_doc = io::read_json(pdir / "scenes.json");
            auto queries_doc = io::read_json(pdir / "queries.json");
            std::map<std::string, Scene> by_id;
            for (const auto& s : scenes_doc.at("scenes")) {
                auto scene = scene_from_json(s);
                by_id[scene.scene_id] = std::move(scene);
            }
            for (const auto& q : queries_doc.at("queries")) {
                auto it = by_id.find(q.at("scene_id").get<std::string>());
                if (it == by_id.end()) continue;
                it->second.initial_query = q.at("initial_query").get<std::string>();
                it->second.expected_response = q.at("expected_response").get<std::string>();
            }
            for (const auto& d : queries_doc.value("dropped", nlohmann::json::array())) {
                persona.dropped.push_back({d.at("scene_id").get<std::string>(), d.at("reason").get<std::string>()});
            }
            for (const auto& id : p.at("scenes")) {
                auto it = by_id.find(id.get<std::string>());
                if (it == by_id.end()) {
                    throw ConfigurationError(fmt::format("manifest lists unknown scene '{}'", id.get<std::string>()));
                }
                persona.scenes.push_back(it->second);
            }
            manifest.personas.push_back(std::move(persona));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigurationError(fmt::format("{}: malformed bench manifest: {}", dir.string(), e.what()));
    }
    return manifest;
}

}  // namespace aipersona::datagen
