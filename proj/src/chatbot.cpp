#include "aipersona/chatbot.hpp"

#include <algorithm>
#include <cctype>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "aipersona/text_util.hpp"

namespace aipersona::chatbot {

namespace {

std::vector<Exchange> exchanges_of(const std::vector<Turn>& turns) {
    std::vector<Exchange> out;
    out.reserve(turns.size());
    for (const auto& t : turns) out.push_back({t.user_text, t.assistant_text});
    return out;
}

std::string persona_block(const PersonaView& view, Locale locale) {
    if (view.mode() == PersonaMode::None || !view.profile()) {
        return locale == Locale::Zh ? "（暂无该用户的人设信息）" : "(No persona information is available for this user.)";
    }
    return profile_to_prompt_text(*view.profile());
}

std::string format_tool_results(const std::vector<tools::ToolResult>& results) {
    std::string out;
    for (const auto& r : results) {
        if (!out.empty()) out += "\n\n";
        out += fmt::format("<api_result name=\"{}\">\n{}\n</api_result>", r.call.name, r.content);
    }
    return out;
}

// Maps a field label written by the model onto a canonical field name.
std::optional<Field> normalize_field_label(std::string_view label) {
    std::string key;
    for (char c : text::trim(label)) {
        if (c == ' ' || c == '-') key.push_back('_');
        else key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    while (!key.empty() && (key.front() == '*' || key.front() == '`')) key.erase(key.begin());
    while (!key.empty() && (key.back() == '*' || key.back() == '`')) key.pop_back();
    if (auto f = parse_field(key)) return f;
    static const std::pair<std::string_view, Field> aliases[] = {
        {"values", Field::ValuesHobbies},       {"values_and_hobbies", Field::ValuesHobbies},
        {"career_info", Field::Career},         {"behavioral_traits", Field::Pattern},
        {"usage_preferences", Field::Preference}, {"preferences", Field::Preference},
        {"patterns", Field::Pattern},
    };
    for (auto [alias, field] : aliases) {
        if (alias == key) return field;
    }
    return std::nullopt;
}

}  // namespace

std::pair<UpdateSchedule, bool> tick_schedule(UpdateSchedule schedule) {
    if (schedule.k < 1) throw PreconditionError("update frequency k must be at least 1");
    ++schedule.sessions_since_update;
    if (schedule.sessions_since_update >= schedule.k) {
        schedule.sessions_since_update = 0;
        return {schedule, true};
    }
    return {schedule, false};
}

std::string render_system_prompt(const PersonaView& view, const Scene& scene, const std::vector<Session>* retrieved,
                                 Locale locale, const PromptCatalog& catalog) {
    auto prompt = catalog.render({TemplateName::ChatbotApiCall, locale}, {{"scene", scene_summary(scene)},
                                                                          {"api_docs", tools::format_api_docs(scene.api_specs)},
                                                                          {"persona", persona_block(view, locale)},
                                                                          {"query", ""}});
    auto system = std::move(prompt.system);
    if (retrieved && !retrieved->empty()) {
        auto rag = catalog.render({TemplateName::RagContext, locale}, {{"conversations", sessions_transcript(*retrieved, locale)}});
        system += "\n\n" + rag.user;
    }
    return system;
}

Reply respond(const PersonaView& view, std::string_view query, const std::vector<Turn>& history, const Scene& scene,
              const llm::LlmClient& chat_client, const llm::LlmClient& tool_client, const std::vector<Session>* retrieved,
              const Options& options, const PromptCatalog& catalog) {
    if (text::trim(query).empty()) throw PreconditionError("query must not be empty");

    auto user_prompt = catalog.render({TemplateName::ChatbotApiCall, options.locale},
                                      {{"scene", ""}, {"api_docs", ""}, {"persona", ""}, {"query", std::string(query)}})
                           .user;
    std::vector<llm::ChatMessage> messages;
    for (const auto& t : history) {
        messages.push_back({llm::Role::User, t.user_text});
        messages.push_back({llm::Role::Assistant, t.assistant_text});
    }
    messages.push_back({llm::Role::User, std::move(user_prompt)});

    auto request = chat_client.make_request(render_system_prompt(view, scene, retrieved, options.locale, catalog), std::move(messages));
    auto reply = chat_client.complete(request).content;

    Reply out;
    for (int rounds = 0;; ++rounds) {
        std::vector<tools::ToolCall> calls;
        try {
            calls = tools::parse_tool_calls(reply, scene.api_specs);
        } catch (const tools::ToolParseError& e) {
            throw ReplyParseError(e.what(), reply);
        } catch (const tools::ToolValidationError& e) {
            throw ReplyParseError(e.what(), reply);
        }
        if (calls.empty()) break;
        if (rounds >= options.max_tool_rounds) {
            throw LoopLimitError(fmt::format("chatbot still issuing tool calls after {} round(s)", options.max_tool_rounds));
        }

        std::vector<tools::ToolResult> results;
        for (const auto& call : calls) {
            results.push_back(tools::execute(call, scene.api_specs, scene_summary(scene), tool_client, options.locale, catalog));
        }
        auto feedback = catalog.render({TemplateName::ToolResults, options.locale}, {{"results", format_tool_results(results)}});
        request.messages.push_back({llm::Role::Assistant, reply});
        request.messages.push_back({llm::Role::User, feedback.user});
        out.tool_records.insert(out.tool_records.end(), results.begin(), results.end());
        reply = chat_client.complete(request).content;
    }
    out.text = std::move(reply);
    return out;
}

std::string sessions_transcript(const std::vector<Session>& sessions, Locale locale) {
    std::string out;
    for (std::size_t i = 0; i < sessions.size(); ++i) {
        if (!out.empty()) out += "\n";
        out += locale == Locale::Zh ? fmt::format("第{}次会话（场景：{}）\n", i + 1, sessions[i].scene_id)
                                    : fmt::format("Session {} (scene: {})\n", i + 1, sessions[i].scene_id);
        out += format_chat_history(exchanges_of(sessions[i].turns), locale);
    }
    return out;
}

std::vector<FieldUpdate> parse_field_updates(std::string_view reply) {
    auto block = text::find_tag_block(reply, "fields");
    if (!block) {
        spdlog::info("persona update reply has no <fields> block; treating as no update");
        return {};
    }
    std::vector<FieldUpdate> updates;
    for (const auto& raw_line : text::split_lines(block->inner)) {
        auto line = text::trim(raw_line);
        if (line.empty()) continue;
        if (line.starts_with("- ") || line.starts_with("* ")) line = text::trim(line.substr(2));

        auto colon = line.find(':');
        constexpr std::string_view kWideColon = "：";
        auto wide = line.find(kWideColon);
        std::size_t sep_len = 1;
        if (wide != std::string_view::npos && (colon == std::string_view::npos || wide < colon)) {
            colon = wide;
            sep_len = kWideColon.size();
        }
        if (colon == std::string_view::npos) {
            spdlog::warn("ignoring persona update line without a field separator: '{}'", line);
            continue;
        }
        auto label = line.substr(0, colon);
        auto value = text::trim(line.substr(colon + sep_len));
        auto field = normalize_field_label(label);
        if (!field) {
            spdlog::warn("dropping persona update for unknown field '{}'", text::trim(label));
            continue;
        }
        if (value.empty()) continue;
        updates.push_back({std::string(field_name(*field)), std::string(value)});
    }
    return updates;
}

std::vector<FieldUpdate> extract_field_updates(const PersonaView& view, const std::vector<Session>& recent,
                                               const llm::LlmClient& client, Locale locale, const PromptCatalog& catalog) {
    if (view.mode() != PersonaMode::Learned || !view.profile()) {
        throw PreconditionError("field updates are only extracted for a learned persona");
    }
    auto prompt = catalog.render({TemplateName::PersonaUpdate, locale},
                                 {{"persona", profile_to_prompt_text(*view.profile())},
                                  {"chat_history", sessions_transcript(recent, locale)}});
    return parse_field_updates(client.ask(prompt.system, prompt.user));
}

std::pair<PersonaProfile, std::vector<FieldUpdate>> apply_learned_updates(const PersonaProfile& profile,
                                                                          const std::vector<FieldUpdate>& updates) {
    PersonaProfile current = profile;
    std::vector<FieldUpdate> used;
    for (const auto& u : updates) {
        if (!parse_field(u.field)) {
            spdlog::warn("skipping update for unknown field '{}'", u.field);
            continue;
        }
        auto candidate = apply_field_updates(current, {u});
        auto report = validate_profile(candidate);
        bool breaks_field = std::any_of(report.violations.begin(), report.violations.end(),
                                        [&](const Violation& v) { return v.field == u.field; });
        if (breaks_field) {
            spdlog::warn("skipping invalid update {}='{}'", u.field, u.new_value);
            continue;
        }
        current = std::move(candidate);
        used.push_back(u);
    }
    return {std::move(current), std::move(used)};
}

}  // namespace aipersona::chatbot
