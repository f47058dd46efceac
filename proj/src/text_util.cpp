#include "aipersona/text_util.hpp"

#include <algorithm>
#include <cctype>

namespace aipersona::text {

namespace {

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::size_t sequence_length(unsigned char lead) {
    if (lead < 0x80) return 1;
    if ((lead >> 5) == 0x6) return 2;
    if ((lead >> 4) == 0xE) return 3;
    if ((lead >> 3) == 0x1E) return 4;
    return 1;
}

}  // namespace

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && is_space(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string trim_copy(std::string_view s) { return std::string(trim(s)); }

std::size_t utf8_length(std::string_view s) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < s.size(); ++count) {
        i += std::min(sequence_length(static_cast<unsigned char>(s[i])), s.size() - i);
    }
    return count;
}

std::string utf8_truncate(std::string_view s, std::size_t max_code_points) {
    std::size_t i = 0;
    for (std::size_t n = 0; i < s.size() && n < max_code_points; ++n) {
        i += std::min(sequence_length(static_cast<unsigned char>(s[i])), s.size() - i);
    }
    return std::string(s.substr(0, i));
}

std::vector<std::string> split_lines(std::string_view s) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto end = s.find('\n', start);
        if (end == std::string_view::npos) end = s.size();
        auto line = s.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.emplace_back(line);
        start = end + 1;
    }
    return lines;
}

std::vector<std::string> tokenize(std::string_view s) {
    std::vector<std::string> tokens;
    std::string current;
    for (std::size_t i = 0; i < s.size();) {
        auto c = static_cast<unsigned char>(s[i]);
        if (c < 0x80) {
            if (std::isalnum(c)) {
                current.push_back(static_cast<char>(std::tolower(c)));
            } else if (!current.empty()) {
                tokens.push_back(std::move(current));
                current.clear();
            }
            ++i;
            continue;
        }
        if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
        auto len = std::min(sequence_length(c), s.size() - i);
        auto cp = s.substr(i, len);
        // Full-width punctuation and spaces carry no lexical content.
        if (cp != "，" && cp != "。" && cp != "、" && cp != "：" && cp != "；" && cp != "！" && cp != "？" &&
            cp != "（" && cp != "）" && cp != "“" && cp != "”" && cp != "　") {
            tokens.emplace_back(cp);
        }
        i += len;
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::set<std::string> token_set(std::string_view s) {
    auto tokens = tokenize(s);
    return {tokens.begin(), tokens.end()};
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t common = 0;
    for (const auto& t : a) common += b.count(t);
    const auto uni = a.size() + b.size() - common;
    return static_cast<double>(common) / static_cast<double>(uni);
}

std::optional<TagBlock> find_tag_block(std::string_view s, std::string_view tag) {
    const std::string open = "<" + std::string(tag) + ">";
    const std::string close = "</" + std::string(tag) + ">";
    auto o = s.find(open);
    if (o == std::string_view::npos) return std::nullopt;
    auto body = o + open.size();
    auto c = s.find(close, body);
    if (c == std::string_view::npos) return std::nullopt;
    return TagBlock{o, c + close.size(), std::string(s.substr(body, c - body))};
}

std::optional<std::string> extract_json_object(std::string_view s) {
    auto start = s.find('{');
    while (start != std::string_view::npos) {
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (std::size_t i = start; i < s.size(); ++i) {
            char c = s[i];
            if (in_string) {
                if (escaped) escaped = false;
                else if (c == '\\') escaped = true;
                else if (c == '"') in_string = false;
                continue;
            }
            if (c == '"') in_string = true;
            else if (c == '{') ++depth;
            else if (c == '}' && --depth == 0) return std::string(s.substr(start, i - start + 1));
        }
        start = s.find('{', start + 1);
    }
    return std::nullopt;
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    bool pending_space = false;
    for (char c : trim(s)) {
        if (is_space(static_cast<unsigned char>(c))) {
            pending_space = true;
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    return out;
}

}  // namespace aipersona::text
