#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aipersona/errors.hpp"
#include "aipersona/llm_gateway.hpp"
#include "aipersona/profile.hpp"
#include "aipersona/prompt_kit.hpp"
#include "aipersona/scene.hpp"

namespace aipersona::datagen {

struct SeedPersona {
    PersonaProfile profile;
    std::optional<std::string> hint;
};

/// `{"seeds": [{"profile": {...}, "hint": "..."?}, ...]}` or a bare array.
std::vector<SeedPersona> load_seeds(const std::filesystem::path& path);

class GenerationError : public Error {
public:
    using Error::Error;
};

constexpr std::size_t kMaxHintLength = 400;
constexpr double kDuplicateJaccard = 0.8;

/// One-paragraph description of a seed, at most 400 characters. A seed that
/// already carries a hint is returned unchanged without a model call.
std::string summarize_seed(const SeedPersona& seed, const llm::LlmClient& client,
                           const PromptCatalog& catalog = PromptCatalog::shared());

struct PersonaOptions {
    int max_hint_rounds = 3;       // extra hint batches requested on shortfall
    int max_expand_attempts = 3;   // per hint
    std::string id_prefix = "p";
};

/// Token-set Jaccard of the concatenated field values.
double persona_jaccard(const PersonaProfile& a, const PersonaProfile& b);

/// Self-instruct persona synthesis: a batch of hints conditioned on the seed
/// hints, then each hint expanded into a full profile with the seed profiles
/// as exemplars. Near-duplicates are rejected and regenerated. User ids are
/// assigned as "p001", "p002", ...
std::vector<PersonaProfile> generate_personas(const std::vector<SeedPersona>& seeds, int n, const llm::LlmClient& client,
                                              const PersonaOptions& options = {},
                                              const PromptCatalog& catalog = PromptCatalog::shared());

/// Parses a scene payload (JSON object, optionally surrounded by prose).
/// Throws ParseError when the shape is wrong.
Scene parse_scene_payload(std::string_view reply);

/// `m` persona-specific scenes with ids "<user_id>-s01", ...
std::vector<Scene> generate_scenes(const PersonaProfile& profile, const std::vector<Scene>& common_scenes, int m,
                                   const llm::LlmClient& client, const PromptCatalog& catalog = PromptCatalog::shared());

/// Regenerated repeat of `source` owned by `profile`.
Scene generate_scene_variant(const PersonaProfile& profile, const Scene& source, std::string variant_id,
                             const llm::LlmClient& client, const PromptCatalog& catalog = PromptCatalog::shared());

/// Both store their result onto `scene`.
std::string generate_initial_query(const PersonaProfile& profile, Scene& scene, const llm::LlmClient& client,
                                   const PromptCatalog& catalog = PromptCatalog::shared());
std::string generate_expected_response(const PersonaProfile& profile, Scene& scene, const llm::LlmClient& client,
                                       const PromptCatalog& catalog = PromptCatalog::shared());

struct FilterVerdict {
    bool keep = false;
    std::string reason;  // empty when kept
};

/// Earliest of <Keep>/<Drop> decides; neither present drops the query with
/// reason "unparseable-verdict".
FilterVerdict parse_filter_verdict(std::string_view reply);
FilterVerdict filter_query(std::string_view query, const Scene& scene, const llm::LlmClient& client,
                           const PromptCatalog& catalog = PromptCatalog::shared());

/// Field values of at least four code points that occur verbatim in `text`.
std::vector<std::string> leaked_values(std::string_view text, const PersonaProfile& profile);

struct NeutralizedQuery {
    std::string text;
    int attempts = 0;
    bool flagged = false;  // still leaking after the retries
    std::vector<std::string> leaked;
};

constexpr int kNeutralizeRetries = 2;

NeutralizedQuery neutralize_query(std::string_view query, const PersonaProfile& profile, const llm::LlmClient& client,
                                  const PromptCatalog& catalog = PromptCatalog::shared());

struct BenchConfig {
    std::filesystem::path seeds_path;
    std::filesystem::path common_scenes_path;
    std::filesystem::path output_dir;
    int n_personas = 5;
    int m_scenes = 10;
    int common_per_persona = 10;
    int resample_min = 3;
    int resample_max = 5;
    std::uint64_t rng_seed = 42;
    int workers = 4;

    static BenchConfig defaults();
};

nlohmann::json bench_config_to_json(const BenchConfig& config);

struct DroppedScene {
    std::string scene_id;
    std::string reason;
};

struct BenchPersona {
    PersonaProfile profile;
    std::vector<Scene> scenes;  // visit order, queries attached
    std::vector<DroppedScene> dropped;
};

struct BenchManifest {
    std::filesystem::path dir;
    std::uint64_t rng_seed = 0;
    std::vector<BenchPersona> personas;
    std::vector<std::string> failures;
    bool complete = true;

    std::size_t scene_count() const;
};

/// Runs the whole pipeline and writes the bench directory:
///   manifest.json
///   personas/<user_id>/{profile.json, scenes.json, queries.json}
BenchManifest build_bench(const BenchConfig& config, const llm::LlmClient& client,
                          const PromptCatalog& catalog = PromptCatalog::shared());

/// Reads a bench directory written by build_bench.
BenchManifest load_bench(const std::filesystem::path& dir);

/// Positions of sampled repeats: `count` distinct indices below `pool`, in
/// increasing order, drawn from an mt19937_64 seeded with `seed`.
std::vector<std::size_t> sample_indices(std::uint64_t seed, std::size_t pool, std::size_t count);

}  // namespace aipersona::datagen
