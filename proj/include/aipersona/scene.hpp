#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "aipersona/tool_executor.hpp"

namespace aipersona {

enum class SceneKind { Common, PersonaSpecific };

std::string_view scene_kind_name(SceneKind k);
SceneKind parse_scene_kind(std::string_view s);

/// A usage scenario a conversation is grounded in.
struct Scene {
    std::string scene_id;
    SceneKind kind = SceneKind::Common;
    std::optional<std::string> owner_user_id;  // set iff kind == PersonaSpecific
    std::optional<std::string> variant_of;     // source scene of a regenerated repeat
    std::string title;
    std::string description;
    std::vector<std::string> context_items;
    std::vector<tools::ApiSpec> api_specs;
    std::optional<std::string> initial_query;
    std::optional<std::string> expected_response;

    bool operator==(const Scene&) const = default;
};

/// Empty when the scene satisfies its shape rules (description, at least two
/// context items, at least one API spec, owner set iff persona-specific).
std::vector<std::string> scene_shape_problems(const Scene& scene);

/// "Title: description" as shown to the chatbot.
std::string scene_summary(const Scene& scene);
std::string scene_context_text(const Scene& scene);

nlohmann::json scene_to_json(const Scene& scene, bool include_queries = true);
Scene scene_from_json(const nlohmann::json& doc);

std::vector<Scene> load_scenes(const std::filesystem::path& path);

}  // namespace aipersona
