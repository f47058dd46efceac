#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "aipersona/llm_gateway.hpp"
#include "aipersona/profile.hpp"
#include "aipersona/prompt_kit.hpp"
#include "aipersona/scene.hpp"
#include "aipersona/session_store.hpp"

namespace aipersona::usersim {

enum class Verdict { Satisfied, Continue };

struct SatisfactionVerdict {
    Verdict verdict = Verdict::Continue;
    std::string raw;
    bool anomaly = false;  // no sentinel token found
};

/// Scans for "<Satisfied>", "<满意>", "<Continue>", "<继续>"; the earliest
/// occurrence decides. No token at all yields Continue with `anomaly` set.
SatisfactionVerdict parse_satisfaction(std::string_view reply);

/// Persona placeholders shared by the simulation and satisfaction templates.
Bindings persona_bindings(const PersonaProfile& persona);

/// The simulated user's next message. The first message of a session is the
/// scene's pre-generated initial query when it has one.
std::string next_query(const PersonaProfile& persona, const Scene& scene, const std::vector<Turn>& history,
                       const llm::LlmClient& client, Locale locale = Locale::En,
                       const PromptCatalog& catalog = PromptCatalog::shared());

SatisfactionVerdict check_satisfaction(const PersonaProfile& persona, const std::vector<Turn>& history,
                                       std::string_view expected, const llm::LlmClient& client,
                                       Locale locale = Locale::En, const PromptCatalog& catalog = PromptCatalog::shared());

}  // namespace aipersona::usersim
