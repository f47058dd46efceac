#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "aipersona/errors.hpp"

namespace aipersona {

enum class Locale { En, Zh };

std::string_view locale_name(Locale l);
Locale parse_locale(std::string_view s);  // throws ConfigurationError

/// Templates known to the catalog. The first seven are the framework prompts
/// and must exist in every locale; the rest are auxiliary and fall back to
/// English when a locale does not ship them.
enum class TemplateName {
    ApiSim,
    ChatbotApiCall,
    PersonaUpdate,
    UserSim,
    SatisfactionCheck,
    JudgeResponse,
    JudgeSimilarity,
    // auxiliary
    ToolResults,
    RagContext,
    ApiSimDocs,
    JudgePairwise,
    SeedSummary,
    PersonaHints,
    PersonaExpand,
    SceneGenerate,
    SceneVariant,
    InitialQuery,
    ExpectedResponse,
    QueryFilter,
    QueryNeutralize,
};

std::string_view template_file_stem(TemplateName n);
TemplateName parse_template_name(std::string_view s);  // throws NotFoundError
bool is_core_template(TemplateName n);
const std::vector<TemplateName>& all_template_names();

struct TemplateId {
    TemplateName name;
    Locale locale = Locale::En;

    auto operator<=>(const TemplateId&) const = default;
};

using Bindings = std::map<std::string, std::string>;

struct RenderedPrompt {
    std::string system;
    std::string user;
};

class MissingBindingError : public Error {
public:
    explicit MissingBindingError(std::string placeholder);
    const std::string& placeholder() const noexcept { return placeholder_; }

private:
    std::string placeholder_;
};

/// A binding was supplied for a placeholder the template does not contain.
class UnexpectedBindingError : public Error {
public:
    explicit UnexpectedBindingError(std::string placeholder);
    const std::string& placeholder() const noexcept { return placeholder_; }

private:
    std::string placeholder_;
};

/// One (name, locale) template: a system section and a user section.
struct PromptTemplate {
    std::string system;
    std::string user;
};

/// Parses the resource format: a `[system]` line, system text, a `[user]`
/// line, user text. Either section may be absent (empty).
PromptTemplate parse_template_text(std::string_view content);

/// Placeholders are single-brace ASCII identifiers, e.g. `{chat_history}`.
std::set<std::string> placeholders_in(std::string_view text);

/// Single pass; substituted values are never re-scanned.
std::string substitute(std::string_view text, const Bindings& bindings);

/// Read-only catalog of prompt templates loaded from a resource directory
/// laid out as `<dir>/<locale>/<name>.txt` with exemplars under
/// `<dir>/<locale>/examples/<Placeholder>.txt`. Exemplar placeholders
/// (`API_Example`, `Fields_Update_Example`, `EXAMPLE`) are bound from those
/// files unless the caller binds them explicitly.
class PromptCatalog {
public:
    static PromptCatalog load(const std::filesystem::path& dir);

    /// Resource directory compiled into the binary, overridable through the
    /// AIPERSONA_RESOURCES environment variable.
    static std::filesystem::path default_resource_dir();
    static const PromptCatalog& shared();

    RenderedPrompt render(const TemplateId& id, const Bindings& bindings) const;
    std::set<std::string> list_placeholders(const TemplateId& id) const;

    /// Placeholders the caller must bind (exemplar defaults excluded).
    std::set<std::string> required_placeholders(const TemplateId& id) const;

    const PromptTemplate& get(const TemplateId& id) const;

private:
    std::map<TemplateId, PromptTemplate> templates_;
    std::map<Locale, Bindings> exemplars_;
};

/// One user/assistant exchange as shown to models.
struct Exchange {
    std::string user;
    std::string assistant;
};

/// Numbered transcript ("Turn 1 / User: ... / Assistant: ...").
std::string format_chat_history(const std::vector<Exchange>& exchanges, Locale locale);

}  // namespace aipersona
