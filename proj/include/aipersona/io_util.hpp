#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace aipersona::io {

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file, flushes, then renames over `path`. Readers
/// see either the old or the new content, never a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& doc);

/// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace aipersona::io
