#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace crag {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

/// Collapses every whitespace run to a single space and trims both ends.
std::string collapse_whitespace(std::string_view s);

/// Lexical tokenizer shared by the index and its scoring oracle: lowercased
/// runs of ASCII alphanumerics; bytes >= 0x80 are kept so UTF-8 words stay
/// in one piece.
std::vector<std::string> tokenize(std::string_view text);

/// Normalization for the strict demonstration filter: lowercase, collapse
/// whitespace, strip terminal punctuation. No article removal.
std::string strict_normalize(std::string_view s);

/// Normalization for the flexible evaluation metric: lowercase, remove all
/// ASCII punctuation, collapse whitespace.
std::string flexible_normalize(std::string_view s);

/// Removes one leading article (a/an/the) if present.
std::string drop_leading_article(std::string_view s);

std::uint64_t fnv1a64(std::string_view s);

/// 16-hex-digit FNV-1a digest; platform-stable.
std::string hex_fingerprint(std::string_view s);

}  // namespace crag
