#include "aipersona/scene.hpp"

#include <fmt/format.h>

#include "aipersona/io_util.hpp"
#include "aipersona/text_util.hpp"

namespace aipersona {

std::string_view scene_kind_name(SceneKind k) { return k == SceneKind::Common ? "common" : "persona_specific"; }

SceneKind parse_scene_kind(std::string_view s) {
    if (s == "common") return SceneKind::Common;
    if (s == "persona_specific") return SceneKind::PersonaSpecific;
    throw ConfigurationError(fmt::format("unknown scene kind '{}'", s));
}

std::vector<std::string> scene_shape_problems(const Scene& scene) {
    std::vector<std::string> problems;
    if (scene.scene_id.empty()) problems.emplace_back("scene_id is empty");
    if (text::trim(scene.description).empty()) problems.emplace_back("description is empty");
    if (scene.context_items.size() < 2) problems.emplace_back("fewer than two context items");
    if (scene.api_specs.empty()) problems.emplace_back("no API specs");
    if (scene.kind == SceneKind::PersonaSpecific && !scene.owner_user_id) problems.emplace_back("persona-specific scene without owner");
    if (scene.kind == SceneKind::Common && scene.owner_user_id) problems.emplace_back("common scene must not have an owner");
    try {
        tools::validate_specs(scene.api_specs);
    } catch (const PreconditionError& e) {
        problems.emplace_back(e.what());
    }
    return problems;
}

std::string scene_summary(const Scene& scene) {
    if (scene.title.empty()) return scene.description;
    return fmt::format("{}: {}", scene.title, scene.description);
}

std::string scene_context_text(const Scene& scene) {
    std::string out;
    for (const auto& item : scene.context_items) out += fmt::format("- {}\n", item);
    if (!out.empty()) out.pop_back();
    return out;
}

nlohmann::json scene_to_json(const Scene& scene, bool include_queries) {
    nlohmann::json specs = nlohmann::json::array();
    for (const auto& s : scene.api_specs) specs.push_back(tools::api_spec_to_json(s));
    nlohmann::json doc = {{"scene_id", scene.scene_id},
                          {"kind", scene_kind_name(scene.kind)},
                          {"title", scene.title},
                          {"description", scene.description},
                          {"context_items", scene.context_items},
                          {"api_specs", specs}};
    if (scene.owner_user_id) doc["owner_user_id"] = *scene.owner_user_id;
    if (scene.variant_of) doc["variant_of"] = *scene.variant_of;
    if (include_queries) {
        if (scene.initial_query) doc["initial_query"] = *scene.initial_query;
        if (scene.expected_response) doc["expected_response"] = *scene.expected_response;
    }
    return doc;
}

Scene scene_from_json(const nlohmann::json& doc) {
    Scene s;
    s.scene_id = doc.value("scene_id", std::string{});
    s.kind = parse_scene_kind(doc.value("kind", std::string("common")));
    s.title = doc.value("title", std::string{});
    s.description = doc.at("description").get<std::string>();
    s.context_items = doc.value("context_items", std::vector<std::string>{});
    for (const auto& spec : doc.value("api_specs", nlohmann::json::array())) s.api_specs.push_back(tools::api_spec_from_json(spec));
    if (doc.contains("owner_user_id")) s.owner_user_id = doc["owner_user_id"].get<std::string>();
    if (doc.contains("variant_of")) s.variant_of = doc["variant_of"].get<std::string>();
    if (doc.contains("initial_query")) s.initial_query = doc["initial_query"].get<std::string>();
    if (doc.contains("expected_response")) s.expected_response = doc["expected_response"].get<std::string>();
    return s;
}

std::vector<Scene> load_scenes(const std::filesystem::path& path) {
    auto doc = io::read_json(path);
    std::vector<Scene> scenes;
    try {
        for (const auto& s : doc.is_array() ? doc : doc.at("scenes")) scenes.push_back(scene_from_json(s));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigurationError(fmt::format("{}: malformed scene list: {}", path.string(), e.what()));
    }
    return scenes;
}

}  // namespace aipersona
