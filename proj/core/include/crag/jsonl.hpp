#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace crag {

/// Reads a UTF-8 JSON Lines file. `fn` receives (1-based line number, parsed
/// object). Blank lines are skipped; a malformed line raises Error naming the
/// line number.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(std::size_t, const nlohmann::json&)>& fn);

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

/// Writes one compact JSON object per line. Overwrites the target.
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& records);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace crag
