#include "aipersona/tool_executor.hpp"

#include <set>

#include <fmt/format.h>

#include "aipersona/text_util.hpp"

namespace aipersona::tools {

void validate_specs(const std::vector<ApiSpec>& specs) {
    std::set<std::string> names;
    for (const auto& spec : specs) {
        if (spec.name.empty()) throw PreconditionError("API spec with empty name");
        if (!names.insert(spec.name).second) throw PreconditionError(fmt::format("duplicate API spec '{}'", spec.name));
        bool seen_optional = false;
        for (const auto& p : spec.params) {
            if (!p.required) seen_optional = true;
            else if (seen_optional) {
                throw PreconditionError(fmt::format("API '{}': required param '{}' follows an optional one", spec.name, p.name));
            }
        }
    }
}

std::vector<ToolCall> parse_tool_call_blocks(std::string_view text) {
    std::vector<ToolCall> calls;
    std::size_t pos = 0;
    while (true) {
        auto open = text.find(kOpenTag, pos);
        if (open == std::string_view::npos) break;
        auto body = open + kOpenTag.size();
        auto close = text.find(kCloseTag, body);
        if (close == std::string_view::npos) {
            throw ToolParseError(fmt::format("unclosed {} at offset {}", kOpenTag, open), std::string(text), open, text.size());
        }
        auto end = close + kCloseTag.size();
        auto payload = text.substr(body, close - body);
        if (payload.find(kOpenTag) != std::string_view::npos) {
            throw ToolParseError(fmt::format("nested {} inside block at offset {}", kOpenTag, open), std::string(text), open, end);
        }

        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(payload);
        } catch (const nlohmann::json::parse_error& e) {
            throw ToolParseError(fmt::format("invalid call payload at offset {}: {}", open, e.what()), std::string(text), open, end);
        }
        auto fail = [&](std::string_view why) {
            throw ToolParseError(fmt::format("invalid call payload at offset {}: {}", open, why), std::string(text), open, end);
        };
        if (!doc.is_object()) fail("payload is not an object");
        if (!doc.contains("name") || !doc["name"].is_string() || doc["name"].get<std::string>().empty()) {
            fail("missing string \"name\"");
        }
        ToolCall call;
        call.name = doc["name"].get<std::string>();
        if (doc.contains("arguments")) {
            if (!doc["arguments"].is_object()) fail("\"arguments\" is not an object");
            for (const auto& [key, value] : doc["arguments"].items()) {
                if (!value.is_string()) fail(fmt::format("argument '{}' is not text", key));
                call.arguments[key] = value.get<std::string>();
            }
        }
        call.span_begin = open;
        call.span_end = end;
        calls.push_back(std::move(call));
        pos = end;
    }
    return calls;
}

void validate_call(const ToolCall& call, const std::vector<ApiSpec>& specs) {
    for (const auto& spec : specs) {
        if (spec.name != call.name) continue;
        for (const auto& p : spec.params) {
            if (p.required && !call.arguments.count(p.name)) {
                throw ToolValidationError(fmt::format("call '{}' lacks required param '{}'", call.name, p.name), call.name);
            }
        }
        return;
    }
    throw ToolValidationError(fmt::format("call names unknown API '{}'", call.name), call.name);
}

std::vector<ToolCall> parse_tool_calls(std::string_view text, const std::vector<ApiSpec>& specs) {
    auto calls = parse_tool_call_blocks(text);
    for (const auto& call : calls) validate_call(call, specs);
    return calls;
}

std::string serialize_tool_call(const ToolCall& call) {
    nlohmann::json doc = {{"name", call.name}, {"arguments", call.arguments}};
    return fmt::format("{}{}{}", kOpenTag, doc.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace), kCloseTag);
}

std::string format_api_docs(const std::vector<ApiSpec>& specs) {
    std::string out;
    for (const auto& spec : specs) {
        out += fmt::format("- {}: {}\n", spec.name, spec.description);
        for (const auto& p : spec.params) {
            out += fmt::format("    {} ({}, {})\n", p.name, p.type.empty() ? "string" : p.type, p.required ? "required" : "optional");
        }
        if (!spec.returns.empty()) out += fmt::format("    returns: {}\n", spec.returns);
    }
    if (!out.empty()) out.pop_back();
    return out;
}

ToolResult execute(const ToolCall& call, const std::vector<ApiSpec>& specs, std::string_view scene_description,
                   const llm::LlmClient& client, Locale locale, const PromptCatalog& catalog) {
    auto prompt = catalog.render({TemplateName::ApiSim, locale}, {{"api_call", serialize_tool_call(call)}});
    auto docs = catalog.render({TemplateName::ApiSimDocs, locale},
                               {{"api_docs", format_api_docs(specs)}, {"scene", std::string(scene_description)}});
    auto reply = client.ask(prompt.system + "\n\n" + docs.user, prompt.user);
    if (text::trim(reply).empty()) throw ExecutionError(fmt::format("simulator returned nothing for call '{}'", call.name));
    return ToolResult{call, std::move(reply), true};
}

nlohmann::json api_spec_to_json(const ApiSpec& spec) {
    nlohmann::json params = nlohmann::json::array();
    for (const auto& p : spec.params) params.push_back({{"name", p.name}, {"type", p.type}, {"required", p.required}});
    return {{"name", spec.name}, {"description", spec.description}, {"params", params}, {"returns", spec.returns}};
}

ApiSpec api_spec_from_json(const nlohmann::json& doc) {
    ApiSpec spec;
    spec.name = doc.at("name").get<std::string>();
    spec.description = doc.value("description", std::string{});
    spec.returns = doc.value("returns", std::string{});
    for (const auto& p : doc.value("params", nlohmann::json::array())) {
        spec.params.push_back({p.at("name").get<std::string>(), p.value("type", std::string("string")), p.value("required", true)});
    }
    return spec;
}

nlohmann::json tool_call_to_json(const ToolCall& call) {
    return {{"name", call.name}, {"arguments", call.arguments}, {"raw_span", {call.span_begin, call.span_end}}};
}

ToolCall tool_call_from_json(const nlohmann::json& doc) {
    ToolCall call;
    call.name = doc.at("name").get<std::string>();
    call.arguments = doc.value("arguments", std::map<std::string, std::string>{});
    if (doc.contains("raw_span")) {
        call.span_begin = doc["raw_span"].at(0).get<std::size_t>();
        call.span_end = doc["raw_span"].at(1).get<std::size_t>();
    }
    return call;
}

nlohmann::json tool_result_to_json(const ToolResult& result) {
    return {{"call", tool_call_to_json(result.call)}, {"content", result.content}, {"simulated", result.simulated}};
}

ToolResult tool_result_from_json(const nlohmann::json& doc) {
    return {tool_call_from_json(doc.at("call")), doc.at("content").get<std::string>(), doc.value("simulated", true)};
}

}  // namespace aipersona::tools
