#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "aipersona/llm_gateway.hpp"
#include "aipersona/profile.hpp"
#include "aipersona/prompt_kit.hpp"
#include "aipersona/scene.hpp"
#include "aipersona/session_store.hpp"

namespace aipersona::chatbot {

enum class PersonaMode { None, Golden, Learned };

/// What the chatbot may see of the user. `profile` is absent iff mode is None.
class PersonaView {
public:
    static PersonaView none() { return PersonaView(PersonaMode::None, std::nullopt); }
    static PersonaView golden(PersonaProfile p) { return PersonaView(PersonaMode::Golden, std::move(p)); }
    static PersonaView learned(PersonaProfile p) { return PersonaView(PersonaMode::Learned, std::move(p)); }

    PersonaMode mode() const noexcept { return mode_; }
    const std::optional<PersonaProfile>& profile() const noexcept { return profile_; }

private:
    PersonaView(PersonaMode mode, std::optional<PersonaProfile> profile) : mode_(mode), profile_(std::move(profile)) {}

    PersonaMode mode_;
    std::optional<PersonaProfile> profile_;
};

struct UpdateSchedule {
    int k = 3;
    int sessions_since_update = 0;

    bool operator==(const UpdateSchedule&) const = default;
};

/// Counts one finished session. Fires (and resets) when the counter reaches k.
std::pair<UpdateSchedule, bool> tick_schedule(UpdateSchedule schedule);

struct Options {
    int max_tool_rounds = 3;
    Locale locale = Locale::En;
};

struct Reply {
    std::string text;
    std::vector<tools::ToolResult> tool_records;
};

class LoopLimitError : public Error {
public:
    using Error::Error;
};

/// Tool-call block in a chatbot reply could not be parsed or validated.
class ReplyParseError : public ParseError {
public:
    using ParseError::ParseError;
};

/// Persona-conditioned answer to `query`. Tool calls in the model's reply are
/// simulated through `tool_client`, fed back, and the model is asked to
/// integrate them, for at most `max_tool_rounds` rounds. `retrieved` carries
/// past sessions in the conversations-RAG setting.
Reply respond(const PersonaView& view, std::string_view query, const std::vector<Turn>& history, const Scene& scene,
              const llm::LlmClient& chat_client, const llm::LlmClient& tool_client,
              const std::vector<Session>* retrieved = nullptr, const Options& options = {},
              const PromptCatalog& catalog = PromptCatalog::shared());

/// The system prompt `respond` would open with; exposed for leak audits.
std::string render_system_prompt(const PersonaView& view, const Scene& scene, const std::vector<Session>* retrieved,
                                 Locale locale, const PromptCatalog& catalog = PromptCatalog::shared());

/// Numbered transcripts of the given sessions, oldest first.
std::string sessions_transcript(const std::vector<Session>& sessions, Locale locale);

/// Parses `<fields>` ... `</fields>` into updates, one `field: value` per
/// line. Entries naming unknown fields are dropped with a warning; no block
/// means no update.
std::vector<FieldUpdate> parse_field_updates(std::string_view reply);

/// Asks the persona optimizer which fields the recent sessions change.
std::vector<FieldUpdate> extract_field_updates(const PersonaView& view, const std::vector<Session>& recent,
                                               const llm::LlmClient& client, Locale locale = Locale::En,
                                               const PromptCatalog& catalog = PromptCatalog::shared());

/// Applies updates, skipping any that would make the profile invalid (for
/// example a non-numeric age). Returns the new profile and the updates used.
std::pair<PersonaProfile, std::vector<FieldUpdate>> apply_learned_updates(const PersonaProfile& profile,
                                                                          const std::vector<FieldUpdate>& updates);

}  // namespace aipersona::chatbot
