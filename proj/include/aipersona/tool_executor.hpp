#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "aipersona/errors.hpp"
#include "aipersona/llm_gateway.hpp"
#include "aipersona/prompt_kit.hpp"

namespace aipersona::tools {

struct ApiParam {
    std::string name;
    std::string type;  // free-form hint, e.g. "string"
    bool required = true;

    bool operator==(const ApiParam&) const = default;
};

struct ApiSpec {
    std::string name;
    std::string description;
    std::vector<ApiParam> params;  // required before optional
    std::string returns;

    bool operator==(const ApiSpec&) const = default;
};

/// Throws PreconditionError on duplicate names or optional-before-required params.
void validate_specs(const std::vector<ApiSpec>& specs);

struct ToolCall {
    std::string name;
    std::map<std::string, std::string> arguments;
    std::size_t span_begin = 0;  // [begin, end) of the whole <api_call> block
    std::size_t span_end = 0;

    /// Calls compare by name and arguments; spans are positional metadata.
    bool operator==(const ToolCall& other) const { return name == other.name && arguments == other.arguments; }
};

struct ToolResult {
    ToolCall call;
    std::string content;
    bool simulated = true;
};

/// Malformed `<api_call>` block; offsets point into the parsed text.
class ToolParseError : public ParseError {
public:
    ToolParseError(const std::string& message, std::string raw, std::size_t begin, std::size_t end)
        : ParseError(message, std::move(raw)), begin_(begin), end_(end) {}
    std::size_t begin() const noexcept { return begin_; }
    std::size_t end() const noexcept { return end_; }

private:
    std::size_t begin_;
    std::size_t end_;
};

/// Well-formed call that does not match the active API specs.
class ToolValidationError : public Error {
public:
    ToolValidationError(const std::string& message, std::string call_name)
        : Error(message), call_name_(std::move(call_name)) {}
    const std::string& call_name() const noexcept { return call_name_; }

private:
    std::string call_name_;
};

class ExecutionError : public Error {
public:
    using Error::Error;
};

inline constexpr std::string_view kOpenTag = "<api_call>";
inline constexpr std::string_view kCloseTag = "</api_call>";

/// Grammar only: every `<api_call>{"name": N, "arguments": {...}}</api_call>`
/// block in document order. Argument values must be JSON strings.
std::vector<ToolCall> parse_tool_call_blocks(std::string_view text);

void validate_call(const ToolCall& call, const std::vector<ApiSpec>& specs);

/// Grammar plus validation against `specs`.
std::vector<ToolCall> parse_tool_calls(std::string_view text, const std::vector<ApiSpec>& specs);

std::string serialize_tool_call(const ToolCall& call);

/// Human-readable API documentation block used in prompts.
std::string format_api_docs(const std::vector<ApiSpec>& specs);

/// Simulates the call with a model and wraps the reply.
ToolResult execute(const ToolCall& call, const std::vector<ApiSpec>& specs, std::string_view scene_description,
                   const llm::LlmClient& client, Locale locale = Locale::En,
                   const PromptCatalog& catalog = PromptCatalog::shared());

nlohmann::json api_spec_to_json(const ApiSpec& spec);
ApiSpec api_spec_from_json(const nlohmann::json& doc);
nlohmann::json tool_call_to_json(const ToolCall& call);
ToolCall tool_call_from_json(const nlohmann::json& doc);
nlohmann::json tool_result_to_json(const ToolResult& result);
ToolResult tool_result_from_json(const nlohmann::json& doc);

}  // namespace aipersona::tools
