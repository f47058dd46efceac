#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "aipersona/datagen.hpp"
#include "aipersona/text_util.hpp"
#include "test_support.hpp"

using namespace aipersona;
using namespace aipersona::datagen;
using testing_support::QueueBackend;
using testing_support::resources;
using testing_support::sample_profile;
using testing_support::TempDir;

namespace {

std::shared_ptr<llm::LlmClient> fixture_client() { return testing_support::scripted_file(resources() / "fixtures" / "datagen.json"); }

std::vector<SeedPersona> seeds() { return load_seeds(resources() / "seeds" / "seed_personas.json"); }

std::vector<Scene> commons() { return load_scenes(resources() / "scenes" / "common_scenes.json"); }

std::string profile_json(const std::string& name, const std::string& career, const std::string& hobbies) {
    nlohmann::json j = {{"name", name},
                        {"age", 41},
                        {"gender", "Male"},
                        {"nationality", "Chilean"},
                        {"language", "Spanish"},
                        {"career", career},
                        {"mbti", "ENTP"},
                        {"values_hobbies", hobbies},
                        {"pattern", "Plans trips around " + hobbies},
                        {"preference", "Wants short lists about " + career}};
    return j.dump();
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::map<std::string, std::string> tree(const std::filesystem::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out[std::filesystem::relative(e.path(), root).string()] = read_file(e.path());
    }
    return out;
}

BenchConfig small_config(const std::filesystem::path& out) {
    auto c = BenchConfig::defaults();
    c.seeds_path = resources() / "seeds" / "seed_personas.json";
    c.common_scenes_path = resources() / "scenes" / "common_scenes.json";
    c.output_dir = out;
    c.n_personas = 2;
    c.m_scenes = 2;
    c.common_per_persona = 2;
    c.resample_min = 1;
    c.resample_max = 1;
    c.rng_seed = 7;
    return c;
}

}  // namespace

TEST(Seeds, LoadAndSummarize) {
    auto s = seeds();
    ASSERT_EQ(s.size(), 6u);
    auto hint = summarize_seed(s[0], *fixture_client());
    EXPECT_NE(hint.find("Backend engineer"), std::string::npos);
    EXPECT_LE(text::utf8_length(hint), kMaxHintLength);
}

TEST(Seeds, ExistingHintNeedsNoModelCall) {
    auto backend = std::make_shared<QueueBackend>(std::vector<std::string>{"unused"});
    llm::LlmClient client(backend);
    SeedPersona seed{sample_profile(), std::string("Engineer who climbs")};
    EXPECT_EQ(summarize_seed(seed, client), "Engineer who climbs");
    EXPECT_TRUE(backend->requests.empty());

    auto invalid = sample_profile();
    invalid.set(Field::Mbti, "XYZW");
    SeedPersona bad{invalid, std::nullopt};
    EXPECT_THROW(summarize_seed(bad, client), PreconditionError);
}

TEST(Personas, ZeroRequested) { EXPECT_TRUE(generate_personas(seeds(), 0, *fixture_client()).empty()); }

TEST(Personas, FixtureProducesDistinctValidProfiles) {
    auto out = generate_personas(seeds(), 3, *fixture_client());
    ASSERT_EQ(out.size(), 3u);
    std::set<std::string> names;
    for (std::size_t i = 0; i < out.size(); ++i) {
        EXPECT_EQ(out[i].user_id(), fmt::format("p{:03}", i + 1));
        EXPECT_TRUE(validate_profile(out[i]).valid);
        names.insert(out[i].get(Field::Name));
        for (std::size_t j = 0; j < i; ++j) EXPECT_LT(persona_jaccard(out[i], out[j]), kDuplicateJaccard);
    }
    EXPECT_EQ(names.size(), 3u);
    EXPECT_EQ(out[0].get(Field::Name), "Margaret Lewis");
}

TEST(Personas, SingleReplyScriptFallsShort) {
    auto client = testing_support::constant(profile_json("Tomas Vidal", "Ferry captain", "sailing and chess"));
    EXPECT_THROW(generate_personas(seeds(), 2, *client), GenerationError);
}

TEST(Personas, DuplicateIsRegenerated) {
    int expansions = 0;
    std::vector<std::string> expand_texts;
    auto client = testing_support::fn_client([&](const std::string& text) -> std::string {
        if (text.find("You summarize user profiles") != std::string::npos) return "a seed";
        if (text.find("Seed descriptions:") != std::string::npos) return "- first hint\n- second hint";
        ++expansions;
        expand_texts.push_back(text);
        if (expansions <= 2) return profile_json("Tomas Vidal", "Ferry captain", "sailing and chess");
        return profile_json("Ines Duarte", "Veterinary surgeon", "pottery and tango");
    });
    auto out = generate_personas(seeds(), 2, *client);
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(expansions, 3);
    EXPECT_EQ(out[1].get(Field::Name), "Ines Duarte");
    EXPECT_NE(expand_texts[2].find("Attempt: 2"), std::string::npos);
    EXPECT_NE(expand_texts[2].find("Tomas Vidal"), std::string::npos);
}

TEST(Personas, DuplicateMeasure) {
    auto a = sample_profile("a");
    EXPECT_DOUBLE_EQ(persona_jaccard(a, sample_profile("b")), 1.0);
    auto b = a;
    b.set(Field::Name, "Someone Else");
    EXPECT_LT(persona_jaccard(a, b), 1.0);
    EXPECT_THROW(generate_personas({seeds()[0]}, 1, *fixture_client()), PreconditionError);
}

TEST(Scenes, GeneratedFromFixture) {
    auto p = sample_profile("p001");
    auto one = generate_scenes(p, commons(), 1, *fixture_client());
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one[0].scene_id, "p001-s01");
    EXPECT_EQ(one[0].title, "Interview Preparation");
    EXPECT_EQ(one[0].owner_user_id, std::optional<std::string>("p001"));
    EXPECT_FALSE(one[0].api_specs.empty());
    EXPECT_TRUE(generate_scenes(p, commons(), 0, *fixture_client()).empty());
    EXPECT_THROW(generate_scenes(p, {}, 1, *fixture_client()), PreconditionError);
}

TEST(Scenes, PayloadShape) {
    nlohmann::json payload = {{"title", "Garden"},
                              {"description", "Plan a balcony garden."},
                              {"context_items", {"small balcony", "north facing"}},
                              {"api_specs", {tools::api_spec_to_json({"web_search", "search", {{"query", "string", true}}, "results"})}}};
    auto ok = parse_scene_payload("Here you go: " + payload.dump() + " done");
    EXPECT_EQ(ok.title, "Garden");
    EXPECT_THROW(parse_scene_payload(R"({"title": "Garden", "description": "d", "context_items": ["x", "y"]})"), ParseError);
    EXPECT_THROW(parse_scene_payload("no json here"), ParseError);
}

TEST(Scenes, VariantKeepsLineage) {
    auto c = commons();
    auto v = generate_scene_variant(sample_profile("p001"), c[0], "p001-r01", *fixture_client());
    EXPECT_EQ(v.scene_id, "p001-r01");
    EXPECT_EQ(v.variant_of, std::optional<std::string>(c[0].scene_id));
    EXPECT_NE(v.title.find("a new occasion"), std::string::npos);
}

TEST(Queries, InitialAndExpectedStoredOnScene) {
    auto scene = commons()[0];
    scene.initial_query.reset();
    scene.expected_response.reset();
    auto p = sample_profile("p001");
    auto q = generate_initial_query(p, scene, *fixture_client());
    EXPECT_EQ(scene.initial_query, std::optional<std::string>(q));
    auto e = generate_expected_response(p, scene, *fixture_client());
    EXPECT_EQ(scene.expected_response, std::optional<std::string>(e));
    EXPECT_FALSE(e.empty());

    auto bare = commons()[0];
    bare.initial_query.reset();
    EXPECT_THROW(generate_expected_response(p, bare, *fixture_client()), PreconditionError);
    bare.context_items.clear();
    EXPECT_THROW(generate_initial_query(p, bare, *fixture_client()), PreconditionError);
}

TEST(Filter, VerdictGrammar) {
    EXPECT_TRUE(parse_filter_verdict("<Keep>").keep);
    auto drop = parse_filter_verdict("<Drop> needs private data");
    EXPECT_FALSE(drop.keep);
    EXPECT_EQ(drop.reason, "unanswerable");
    auto garbled = parse_filter_verdict("keep it");
    EXPECT_FALSE(garbled.keep);
    EXPECT_EQ(garbled.reason, "unparseable-verdict");
    EXPECT_TRUE(parse_filter_verdict("<Keep> not <Drop>").keep);
    EXPECT_FALSE(parse_filter_verdict("<Drop> not <Keep>").keep);
    EXPECT_TRUE(filter_query("Help me plan a trip", commons()[0], *fixture_client()).keep);
}

TEST(Neutralize, LeakRewritten) {
    auto p = sample_profile();
    std::string leaky =
        "As an INTJ I hate wasting time: my laptop got slow after the last update. Help me fix it without losing files.";
    EXPECT_EQ(leaked_values(leaky, p), std::vector<std::string>{"INTJ"});
    auto out = neutralize_query(leaky, p, *fixture_client());
    EXPECT_FALSE(out.flagged);
    EXPECT_EQ(out.attempts, 1);
    EXPECT_EQ(out.text, "My laptop got slow after the last update. Help me fix it without losing files.");
    EXPECT_TRUE(leaked_values(out.text, p).empty());
}

TEST(Neutralize, NeutralQueryPasses) {
    auto out = neutralize_query("My old device broke. Help me pick a replacement without overspending.", sample_profile(),
                                *fixture_client());
    EXPECT_FALSE(out.flagged);
    EXPECT_EQ(out.text, "My old device broke. Help me pick a replacement without overspending.");
}

TEST(Neutralize, StubbornLeakIsFlagged) {
    auto backend = std::make_shared<QueueBackend>(std::vector<std::string>{"I am Lena Fischer, find me a job"});
    llm::LlmClient client(backend);
    auto out = neutralize_query("I am Lena Fischer, find me a job", sample_profile(), client);
    EXPECT_TRUE(out.flagged);
    EXPECT_EQ(out.attempts, 1 + kNeutralizeRetries);
    EXPECT_EQ(backend->requests.size(), 3u);
    EXPECT_EQ(out.leaked, std::vector<std::string>{"Lena Fischer"});
    EXPECT_NE(llm::ScriptedBackend::request_text(backend->requests[2]).find("Attempt: 3"), std::string::npos);
}

TEST(Neutralize, ShortValuesIgnored) {
    auto p = sample_profile();
    EXPECT_TRUE(leaked_values("I am 29 years old", p).empty());
    EXPECT_EQ(leaked_values("an INTJ from German lands", p).size(), 2u);
}

TEST(SampleIndices, DistinctSortedDeterministic) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        for (std::size_t pool = 0; pool < 12; ++pool) {
            for (std::size_t count = 0; count <= pool + 2; ++count) {
                auto a = sample_indices(seed, pool, count);
                EXPECT_EQ(a, sample_indices(seed, pool, count));
                EXPECT_EQ(a.size(), std::min(count, pool));
                EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
                EXPECT_EQ(std::set<std::size_t>(a.begin(), a.end()).size(), a.size());
                for (auto i : a) EXPECT_LT(i, pool);
            }
        }
    }
}

TEST(Bench, ManifestMatchesCountArithmetic) {
    TempDir dir;
    auto config = small_config(dir / "bench");
    auto manifest = build_bench(config, *fixture_client());
    EXPECT_TRUE(manifest.complete) << (manifest.failures.empty() ? "" : manifest.failures.front());
    ASSERT_EQ(manifest.personas.size(), 2u);
    std::set<std::string> common_ids;
    for (const auto& s : commons()) common_ids.insert(s.scene_id);
    for (const auto& p : manifest.personas) {
        const auto uid = p.profile.user_id();
        // 2 common + 2 specific + 1 repeat visits per persona.
        EXPECT_EQ(p.scenes.size() + p.dropped.size(), 5u) << uid;
        int common = 0, specific = 0, repeats = 0;
        for (const auto& s : p.scenes) {
            if (common_ids.count(s.scene_id)) ++common;
            else if (s.scene_id.rfind(uid + "-s", 0) == 0) ++specific;
            else if (s.scene_id.rfind(uid + "-r", 0) == 0) ++repeats;
            ASSERT_TRUE(s.initial_query.has_value());
            ASSERT_TRUE(s.expected_response.has_value());
            EXPECT_TRUE(leaked_values(*s.initial_query, p.profile).empty()) << s.scene_id;
        }
        EXPECT_EQ(common + specific + repeats, static_cast<int>(p.scenes.size()));

        for (std::size_t i = 0; i < p.scenes.size(); ++i) {
            if (!p.scenes[i].variant_of) continue;
            auto src = std::find_if(p.scenes.begin(), p.scenes.end(),
                                    [&](const Scene& s) { return s.scene_id == *p.scenes[i].variant_of; });
            if (src != p.scenes.end()) EXPECT_LT(src - p.scenes.begin(), static_cast<std::ptrdiff_t>(i));
        }
    }
    auto doc = nlohmann::json::parse(read_file(dir / "bench" / "manifest.json"));
    EXPECT_EQ(doc.at("counts").at("personas"), 2);
    EXPECT_EQ(doc.at("counts").at("scenes"), manifest.scene_count());

    auto loaded = load_bench(dir / "bench");
    ASSERT_EQ(loaded.personas.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_EQ(loaded.personas[i].profile, manifest.personas[i].profile);
        ASSERT_EQ(loaded.personas[i].scenes.size(), manifest.personas[i].scenes.size());
        for (std::size_t j = 0; j < loaded.personas[i].scenes.size(); ++j) {
            EXPECT_EQ(loaded.personas[i].scenes[j].scene_id, manifest.personas[i].scenes[j].scene_id);
            EXPECT_EQ(loaded.personas[i].scenes[j].initial_query, manifest.personas[i].scenes[j].initial_query);
        }
    }
}

TEST(Bench, DeterministicOutputTree) {
    TempDir a, b;
    build_bench(small_config(a / "bench"), *fixture_client());
    auto cfg = small_config(b / "bench");
    cfg.workers = 1;
    build_bench(cfg, *fixture_client());
    EXPECT_EQ(tree(a / "bench"), tree(b / "bench"));
}

TEST(Bench, ConfigurationChecks) {
    TempDir dir;
    auto c = small_config(dir / "bench");
    c.n_personas = -1;
    EXPECT_THROW(build_bench(c, *fixture_client()), ConfigurationError);
    c = small_config(dir / "bench");
    c.resample_min = 4;
    c.resample_max = 2;
    EXPECT_THROW(build_bench(c, *fixture_client()), ConfigurationError);

    std::ofstream(dir / "empty_seeds.json") << R"({"seeds": []})";
    c = small_config(dir / "bench");
    c.seeds_path = dir / "empty_seeds.json";
    EXPECT_THROW(build_bench(c, *fixture_client()), PreconditionError);
    EXPECT_THROW(load_bench(dir / "missing"), ConfigurationError);
}
