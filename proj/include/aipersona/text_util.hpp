#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace aipersona::text {

std::string_view trim(std::string_view s);
std::string trim_copy(std::string_view s);

/// Number of UTF-8 code points; invalid bytes count as one each.
std::size_t utf8_length(std::string_view s);

/// Longest prefix holding at most `max_code_points` code points.
std::string utf8_truncate(std::string_view s, std::size_t max_code_points);

std::vector<std::string> split_lines(std::string_view s);

/// Lowercased ASCII alphanumeric runs; every non-ASCII code point is its own
/// token so CJK text tokenizes per character.
std::vector<std::string> tokenize(std::string_view s);
std::set<std::string> token_set(std::string_view s);

/// |a ∩ b| / |a ∪ b|; two empty sets have similarity 1.
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

/// Span of the first `<tag>...</tag>` block, inner text only.
struct TagBlock {
    std::size_t open = 0;   // offset of '<' of the opening tag
    std::size_t close = 0;  // offset one past the closing tag
    std::string inner;
};
std::optional<TagBlock> find_tag_block(std::string_view s, std::string_view tag);

/// First balanced `{...}` JSON-looking object in `s` (string-literal aware).
std::optional<std::string> extract_json_object(std::string_view s);

std::string collapse_whitespace(std::string_view s);

}  // namespace aipersona::text
