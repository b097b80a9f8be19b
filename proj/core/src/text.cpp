#include "crag/text.hpp"

#include <algorithm>
#include <cctype>

namespace crag {

namespace {

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
inline bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
inline bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }
inline char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

}  // namespace

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), lower);
    return out;
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_ws = true;  // swallow leading whitespace
    for (char c : s) {
        if (is_space(c)) {
            in_ws = true;
        } else {
            if (in_ws && !out.empty()) out.push_back(' ');
            out.push_back(c);
            in_ws = false;
        }
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : text) {
        const bool word_char = is_alnum(c) || static_cast<unsigned char>(c) >= 0x80;
        if (word_char) {
            cur.push_back(lower(c));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

std::string strict_normalize(std::string_view s) {
    std::string out = collapse_whitespace(to_lower(s));
    static constexpr std::string_view kTerminal = ".,;:!?";
    while (!out.empty() &&
           (kTerminal.find(out.back()) != std::string_view::npos || is_space(out.back()))) {
        out.pop_back();
    }
    return out;
}

std::string flexible_normalize(std::string_view s) {
    std::string no_punct;
    no_punct.reserve(s.size());
    for (char c : s) {
        if (!is_punct(c)) no_punct.push_back(lower(c));
    }
    return collapse_whitespace(no_punct);
}

std::string drop_leading_article(std::string_view s) {
    for (std::string_view article : {"a ", "an ", "the "}) {
        if (s.size() > article.size() && s.substr(0, article.size()) == article) {
            return std::string(s.substr(article.size()));
        }
    }
    return std::string(s);
}

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex_fingerprint(std::string_view s) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::uint64_t h = fnv1a64(s);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
        h >>= 4;
    }
    return out;
}

}  // namespace crag
