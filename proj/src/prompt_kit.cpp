#include "aipersona/prompt_kit.hpp"

#include <cctype>
#include <cstdlib>
#include <mutex>

#include <fmt/format.h>

#include "aipersona/io_util.hpp"
#include "aipersona/text_util.hpp"

#ifndef AIPERSONA_RESOURCE_DIR
#define AIPERSONA_RESOURCE_DIR "resources"
#endif

namespace aipersona {

namespace {

struct NameEntry {
    TemplateName name;
    std::string_view stem;
};

constexpr NameEntry kNames[] = {
    {TemplateName::ApiSim, "api_sim"},
    {TemplateName::ChatbotApiCall, "chatbot_api_call"},
    {TemplateName::PersonaUpdate, "persona_update"},
    {TemplateName::UserSim, "user_sim"},
    {TemplateName::SatisfactionCheck, "satisfaction_check"},
    {TemplateName::JudgeResponse, "judge_response"},
    {TemplateName::JudgeSimilarity, "judge_similarity"},
    {TemplateName::ToolResults, "tool_results"},
    {TemplateName::RagContext, "rag_context"},
    {TemplateName::ApiSimDocs, "api_sim_docs"},
    {TemplateName::JudgePairwise, "judge_pairwise"},
    {TemplateName::SeedSummary, "seed_summary"},
    {TemplateName::PersonaHints, "persona_hints"},
    {TemplateName::PersonaExpand, "persona_expand"},
    {TemplateName::SceneGenerate, "scene_generate"},
    {TemplateName::SceneVariant, "scene_variant"},
    {TemplateName::InitialQuery, "initial_query"},
    {TemplateName::ExpectedResponse, "expected_response"},
    {TemplateName::QueryFilter, "query_filter"},
    {TemplateName::QueryNeutralize, "query_neutralize"},
};

constexpr std::string_view kExemplarPlaceholders[] = {"API_Example", "Fields_Update_Example", "EXAMPLE"};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Calls `on_placeholder(begin, end, name)` for every `{ident}` occurrence.
template <typename F>
void scan_placeholders(std::string_view text, F&& on_placeholder) {
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '{' || i + 1 >= text.size() || !ident_start(text[i + 1])) continue;
        std::size_t j = i + 1;
        while (j < text.size() && ident_char(text[j])) ++j;
        if (j < text.size() && text[j] == '}') {
            on_placeholder(i, j + 1, text.substr(i + 1, j - i - 1));
            i = j;
        }
    }
}

std::string strip_trailing_newlines(std::string s) {
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
    return s;
}

}  // namespace

std::string_view locale_name(Locale l) { return l == Locale::En ? "en" : "zh"; }

Locale parse_locale(std::string_view s) {
    if (s == "en") return Locale::En;
    if (s == "zh") return Locale::Zh;
    throw ConfigurationError(fmt::format("unknown locale '{}' (expected en or zh)", s));
}

std::string_view template_file_stem(TemplateName n) {
    for (const auto& e : kNames) {
        if (e.name == n) return e.stem;
    }
    return "";
}

TemplateName parse_template_name(std::string_view s) {
    for (const auto& e : kNames) {
        if (e.stem == s) return e.name;
    }
    throw NotFoundError(fmt::format("unknown template '{}'", s));
}

bool is_core_template(TemplateName n) { return static_cast<int>(n) <= static_cast<int>(TemplateName::JudgeSimilarity); }

const std::vector<TemplateName>& all_template_names() {
    static const std::vector<TemplateName> names = [] {
        std::vector<TemplateName> v;
        for (const auto& e : kNames) v.push_back(e.name);
        return v;
    }();
    return names;
}

MissingBindingError::MissingBindingError(std::string placeholder)
    : Error(fmt::format("missing binding for placeholder '{}'", placeholder)), placeholder_(std::move(placeholder)) {}

UnexpectedBindingError::UnexpectedBindingError(std::string placeholder)
    : Error(fmt::format("template has no placeholder '{}'", placeholder)), placeholder_(std::move(placeholder)) {}

PromptTemplate parse_template_text(std::string_view content) {
    PromptTemplate t;
    std::string* current = nullptr;
    for (const auto& line : text::split_lines(content)) {
        if (line == "[system]") {
            current = &t.system;
            continue;
        }
        if (line == "[user]") {
            current = &t.user;
            continue;
        }
        if (!current) {
            if (text::trim(line).empty()) continue;
            throw ConfigurationError("template text must start with a [system] or [user] section marker");
        }
        *current += line;
        *current += '\n';
    }
    t.system = strip_trailing_newlines(std::move(t.system));
    t.user = strip_trailing_newlines(std::move(t.user));
    return t;
}

std::set<std::string> placeholders_in(std::string_view text) {
    std::set<std::string> names;
    scan_placeholders(text, [&](std::size_t, std::size_t, std::string_view name) { names.emplace(name); });
    return names;
}

std::string substitute(std::string_view text, const Bindings& bindings) {
    std::string out;
    out.reserve(text.size());
    std::size_t last = 0;
    scan_placeholders(text, [&](std::size_t begin, std::size_t end, std::string_view name) {
        auto it = bindings.find(std::string(name));
        if (it == bindings.end()) throw MissingBindingError(std::string(name));
        out.append(text.substr(last, begin - last));
        out.append(it->second);
        last = end;
    });
    out.append(text.substr(last));
    return out;
}

PromptCatalog PromptCatalog::load(const std::filesystem::path& dir) {
    PromptCatalog catalog;
    for (auto locale : {Locale::En, Locale::Zh}) {
        const auto locale_dir = dir / std::string(locale_name(locale));
        for (auto name : all_template_names()) {
            auto file = locale_dir / (std::string(template_file_stem(name)) + ".txt");
            if (!std::filesystem::exists(file)) {
                if (is_core_template(name) || locale == Locale::En) {
                    throw ConfigurationError(fmt::format("prompt template missing: {}", file.string()));
                }
                catalog.templates_[{name, locale}] = catalog.templates_.at({name, Locale::En});
                continue;
            }
            catalog.templates_[{name, locale}] = parse_template_text(io::read_file(file));
        }
        for (auto ph : kExemplarPlaceholders) {
            auto file = locale_dir / "examples" / (std::string(ph) + ".txt");
            if (!std::filesystem::exists(file)) throw ConfigurationError(fmt::format("exemplar missing: {}", file.string()));
            catalog.exemplars_[locale][std::string(ph)] = strip_trailing_newlines(io::read_file(file));
        }
    }
    return catalog;
}

std::filesystem::path PromptCatalog::default_resource_dir() {
    if (const char* env = std::getenv("AIPERSONA_RESOURCES"); env && *env) return std::filesystem::path(env) / "prompts";
    return std::filesystem::path(AIPERSONA_RESOURCE_DIR) / "prompts";
}

const PromptCatalog& PromptCatalog::shared() {
    static const PromptCatalog catalog = load(default_resource_dir());
    return catalog;
}

const PromptTemplate& PromptCatalog::get(const TemplateId& id) const {
    auto it = templates_.find(id);
    if (it == templates_.end()) {
        throw NotFoundError(fmt::format("no template {}/{}", template_file_stem(id.name), locale_name(id.locale)));
    }
    return it->second;
}

std::set<std::string> PromptCatalog::list_placeholders(const TemplateId& id) const {
    const auto& t = get(id);
    auto names = placeholders_in(t.system);
    names.merge(placeholders_in(t.user));
    return names;
}

std::set<std::string> PromptCatalog::required_placeholders(const TemplateId& id) const {
    auto names = list_placeholders(id);
    for (auto ph : kExemplarPlaceholders) names.erase(std::string(ph));
    return names;
}

RenderedPrompt PromptCatalog::render(const TemplateId& id, const Bindings& bindings) const {
    const auto& t = get(id);
    const auto placeholders = list_placeholders(id);
    for (const auto& [key, _] : bindings) {
        if (!placeholders.count(key)) throw UnexpectedBindingError(key);
    }
    Bindings effective = bindings;
    if (auto ex = exemplars_.find(id.locale); ex != exemplars_.end()) {
        for (const auto& [key, value] : ex->second) {
            if (placeholders.count(key)) effective.emplace(key, value);
        }
    }
    return {substitute(t.system, effective), substitute(t.user, effective)};
}

std::string format_chat_history(const std::vector<Exchange>& exchanges, Locale locale) {
    if (exchanges.empty()) return locale == Locale::Zh ? "（对话尚未开始）" : "(The conversation has not started yet.)";
    std::string out;
    for (std::size_t i = 0; i < exchanges.size(); ++i) {
        if (!out.empty()) out += "\n";
        if (locale == Locale::Zh) {
            out += fmt::format("第{}轮\n用户：{}\nAI助手：{}\n", i + 1, exchanges[i].user, exchanges[i].assistant);
        } else {
            out += fmt::format("Turn {}\nUser: {}\nAssistant: {}\n", i + 1, exchanges[i].user, exchanges[i].assistant);
        }
    }
    return out;
}

}  // namespace aipersona
