#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "crag/corpus.hpp"

namespace crag {

enum class PromptFamily { baseline, rag, crag };

const char* to_string(PromptFamily family);
std::optional<PromptFamily> prompt_family_from_string(std::string_view name);

struct PromptOptions {
    /// Per-document character cap guarding context overflow. Bodies are
    /// inserted verbatim up to this many bytes (cut on a UTF-8 boundary).
    std::size_t doc_char_cap = 1500;

    /// When set, templates are read from <dir>/{baseline,rag,crag}.txt
    /// instead of the built-in ones.
    std::optional<std::filesystem::path> template_dir;
};

struct RenderedPrompt {
    PromptFamily family = PromptFamily::baseline;
    std::string text;
    std::vector<std::string> doc_order;  // document ids in slot order
};

/// Zero-shot prompt with no in-context documents.
RenderedPrompt render_baseline(std::string_view question, const PromptOptions& opts = {});

/// Standard RAG prompt: documents numbered [1]..[n] under
/// "#Reference Documents", in the given order.
RenderedPrompt render_rag(std::string_view question, const std::vector<Document>& docs,
                          const PromptOptions& opts = {});

/// Contrastive-RAG prompt: the RAG document block plus the four numbered
/// requirements ending in the "#Explanation:" / "#Answer:" markers.
RenderedPrompt render_crag(std::string_view question, const std::vector<Document>& docs,
                           const PromptOptions& opts = {});

RenderedPrompt render_prompt(PromptFamily family, std::string_view question,
                             const std::vector<Document>& docs, const PromptOptions& opts = {});

/// Built-in template skeleton for a family ({question} / {documents} slots).
std::string_view default_template(PromptFamily family);

/// Re-extracts the numbered document slots from a rendered prompt; used by
/// the round-trip property (slot numbers must be exactly 1..n in order).
std::vector<std::pair<int, std::string>> scan_document_slots(std::string_view prompt_text);

}  // namespace crag
