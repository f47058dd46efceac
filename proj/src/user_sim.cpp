#include "aipersona/user_sim.hpp"

#include <array>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "aipersona/text_util.hpp"

namespace aipersona::usersim {

namespace {

std::vector<Exchange> exchanges_of(const std::vector<Turn>& turns) {
    std::vector<Exchange> out;
    for (const auto& t : turns) out.push_back({t.user_text, t.assistant_text});
    return out;
}

// Models sometimes echo a speaker label in front of the message.
std::string strip_speaker_label(std::string_view reply) {
    auto s = text::trim(reply);
    for (std::string_view label : {"User:", "用户：", "用户:"}) {
        if (s.starts_with(label)) return text::trim_copy(s.substr(label.size()));
    }
    return std::string(s);
}

}  // namespace

SatisfactionVerdict parse_satisfaction(std::string_view reply) {
    struct Token {
        std::string_view text;
        Verdict verdict;
    };
    constexpr std::array<Token, 4> tokens = {{
        {"<Satisfied>", Verdict::Satisfied},
        {"<满意>", Verdict::Satisfied},
        {"<Continue>", Verdict::Continue},
        {"<继续>", Verdict::Continue},
    }};
    SatisfactionVerdict out;
    out.raw = std::string(reply);
    auto best = std::string_view::npos;
    for (const auto& t : tokens) {
        auto pos = reply.find(t.text);
        if (pos < best) {
            best = pos;
            out.verdict = t.verdict;
        }
    }
    if (best == std::string_view::npos) {
        out.verdict = Verdict::Continue;
        out.anomaly = true;
        spdlog::warn("satisfaction reply carries no verdict token; continuing: '{}'", text::utf8_truncate(reply, 120));
    }
    return out;
}

Bindings persona_bindings(const PersonaProfile& persona) {
    return {
        {"name", persona.get(Field::Name)},
        {"age", persona.get(Field::Age)},
        {"gender", persona.get(Field::Gender)},
        {"nationality", persona.get(Field::Nationality)},
        {"language", persona.get(Field::Language)},
        {"career", persona.get(Field::Career)},
        {"MBTI", persona.get(Field::Mbti)},
        {"values", persona.get(Field::ValuesHobbies)},
        {"pattern", persona.get(Field::Pattern)},
        {"preference", persona.get(Field::Preference)},
    };
}

std::string next_query(const PersonaProfile& persona, const Scene& scene, const std::vector<Turn>& history,
                       const llm::LlmClient& client, Locale locale, const PromptCatalog& catalog) {
    if (text::trim(scene.description).empty()) throw PreconditionError(fmt::format("scene '{}' has no description", scene.scene_id));
    if (scene.context_items.empty()) throw PreconditionError(fmt::format("scene '{}' has no contextual information", scene.scene_id));

    if (history.empty() && scene.initial_query && !text::trim(*scene.initial_query).empty()) return *scene.initial_query;

    auto bindings = persona_bindings(persona);
    bindings["scene"] = scene_summary(scene);
    bindings["scene_context"] = scene_context_text(scene);
    bindings["chat_history"] = format_chat_history(exchanges_of(history), locale);
    auto prompt = catalog.render({TemplateName::UserSim, locale}, bindings);
    return strip_speaker_label(client.ask(prompt.system, prompt.user));
}

SatisfactionVerdict check_satisfaction(const PersonaProfile& persona, const std::vector<Turn>& history,
                                       std::string_view expected, const llm::LlmClient& client, Locale locale,
                                       const PromptCatalog& catalog) {
    if (history.empty()) throw PreconditionError("satisfaction check needs at least one turn");
    auto bindings = persona_bindings(persona);
    bindings["chat_history"] = format_chat_history(exchanges_of(history), locale);
    bindings["expected_results"] = std::string(expected);
    auto prompt = catalog.render({TemplateName::SatisfactionCheck, locale}, bindings);
    return parse_satisfaction(client.ask(prompt.system, prompt.user));
}

}  // namespace aipersona::usersim
