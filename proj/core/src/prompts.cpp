#include "crag/prompts.hpp"

#include <cctype>

#include "crag/error.hpp"
#include "crag/jsonl.hpp"
#include "crag/text.hpp"

namespace crag {

namespace {

constexpr std::string_view kBaselineTemplate =
    "#Role\n"
    "You are an experienced expert skilled in answering various questions.\n"
    "\n"
    "#Task\n"
    "Please answer the question following the detailed requirements.\n"
    "\n"
    "#Requirements\n"
    "Please answer the question based on your knowledge using the format \"#Answer:\"\n"
    "\n"
    "#Question\n"
    "{question}\n";

constexpr std::string_view kRagTemplate =
    "#Role\n"
    "You are an experienced expert skilled in answering various questions.\n"
    "\n"
    "#Task\n"
    "Please answer the question based on the documents provided and following the detailed "
    "requirements using the format \"#Answer:\"\n"
    "\n"
    "#Reference Documents\n"
    "{documents}\n"
    "\n"
    "#Requirements\n"
    "Please consider the retrieved documents provided \"#Reference Documents\" and answer the "
    "question.\n"
    "\n"
    "#Question\n"
    "{question}\n";

constexpr std::string_view kCragTemplate =
    "#Role\n"
    "You are an experienced expert skilled in answering various questions.\n"
    "\n"
    "#Task\n"
    "Please answer the question based on the documents provided and following the detailed "
    "requirements.\n"
    "\n"
    "#Reference Documents\n"
    "{documents}\n"
    "\n"
    "#Requirements\n"
    "1) Please consider the retrieved documents provided \"#Reference Documents\" and "
    "understand the main points. Follow the directions in detail and use only the information "
    "in the Documents, exemplifying which points are most helpful for answering the question "
    "#Question.\n"
    "Do not forget any documents, and be as precise as possible.\n"
    "\n"
    "2) For each document, after extracting the most helpful passages discuss whether they are "
    "actually relevant or irrelevant for answering the #Question.\n"
    "For clarity in your answer, provide the exact passages of each document referring to the "
    "document number, organizing the explanation as follows: passage claims [1] that [1], in "
    "contrast [4] claims.....\n"
    "\n"
    "3) Please consider the passages in step 2) in detail, ensure they are correct. Then, "
    "discuss the provided passages by delivering a single rationale that considers the "
    "supporting motivations from a contrastive perspective as concern relevant and irrelevant "
    "passages.\n"
    "For clarity, provide a detailed explanation by marking it as \"#Explanation:\"\n"
    "\n"
    "4) Finally, after explaining the rationale supporting the final answer to facilitate the "
    "final evaluation, extract the answer in a short and concise format by marking it as "
    "\"#Answer:\"\n"
    "\n"
    "#Question\n"
    "{question}\n";

const char* template_file_name(PromptFamily family) {
    switch (family) {
        case PromptFamily::baseline: return "baseline.txt";
        case PromptFamily::rag: return "rag.txt";
        case PromptFamily::crag: return "crag.txt";
    }
    return "baseline.txt";
}

std::string load_template(PromptFamily family, const PromptOptions& opts) {
    if (opts.template_dir) {
        return read_text_file(*opts.template_dir / template_file_name(family));
    }
    return std::string(default_template(family));
}

void replace_slot(std::string& text, std::string_view slot, std::string_view value) {
    const std::size_t pos = text.find(slot);
    if (pos == std::string::npos) {
        throw Error("prompt template is missing the " + std::string(slot) + " slot");
    }
    text.replace(pos, slot.size(), value);
}

/// One line per document: "[i] Title. Body", newlines collapsed so slot
/// markers stay line-anchored, body capped at doc_char_cap bytes.
std::string document_block(const std::vector<Document>& docs, std::size_t cap) {
    std::string block;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        std::string body = collapse_whitespace(docs[i].body);
        if (cap > 0 && body.size() > cap) {
            std::size_t cut = cap;
            while (cut > 0 && (static_cast<unsigned char>(body[cut]) & 0xC0) == 0x80) --cut;
            body.resize(cut);
        }
        if (i > 0) block.push_back('\n');
        block += "[" + std::to_string(i + 1) + "] ";
        const std::string title = collapse_whitespace(docs[i].title);
        if (!title.empty()) {
            block += title + ". ";
        }
        block += body;
    }
    return block;
}

RenderedPrompt render_with_docs(PromptFamily family, std::string_view question,
                                const std::vector<Document>& docs, const PromptOptions& opts) {
    if (trim(question).empty()) throw Error("question is empty");
    if (docs.empty()) throw Error("document list is empty");

    std::string text = load_template(family, opts);
    replace_slot(text, "{documents}", document_block(docs, opts.doc_char_cap));
    replace_slot(text, "{question}", question);

    RenderedPrompt out;
    out.family = family;
    out.text = std::move(text);
    out.doc_order.reserve(docs.size());
    for (const auto& d : docs) out.doc_order.push_back(d.id);
    return out;
}

}  // namespace

const char* to_string(PromptFamily family) {
    switch (family) {
        case PromptFamily::baseline: return "baseline";
        case PromptFamily::rag: return "rag";
        case PromptFamily::crag: return "crag";
    }
    return "baseline";
}

std::optional<PromptFamily> prompt_family_from_string(std::string_view name) {
    if (name == "baseline") return PromptFamily::baseline;
    if (name == "rag") return PromptFamily::rag;
    if (name == "crag") return PromptFamily::crag;
    return std::nullopt;
}

std::string_view default_template(PromptFamily family) {
    switch (family) {
        case PromptFamily::baseline: return kBaselineTemplate;
        case PromptFamily::rag: return kRagTemplate;
        case PromptFamily::crag: return kCragTemplate;
    }
    return kBaselineTemplate;
}

RenderedPrompt render_baseline(std::string_view question, const PromptOptions& opts) {
    if (trim(question).empty()) throw Error("question is empty");
    std::string text = load_template(PromptFamily::baseline, opts);
    replace_slot(text, "{question}", question);
    return RenderedPrompt{PromptFamily::baseline, std::move(text), {}};
}

RenderedPrompt render_rag(std::string_view question, const std::vector<Document>& docs,
                          const PromptOptions& opts) {
    return render_with_docs(PromptFamily::rag, question, docs, opts);
}

RenderedPrompt render_crag(std::string_view question, const std::vector<Document>& docs,
                           const PromptOptions& opts) {
    return render_with_docs(PromptFamily::crag, question, docs, opts);
}

RenderedPrompt render_prompt(PromptFamily family, std::string_view question,
                             const std::vector<Document>& docs, const PromptOptions& opts) {
    switch (family) {
        case PromptFamily::baseline: return render_baseline(question, opts);
        case PromptFamily::rag: return render_rag(question, docs, opts);
        case PromptFamily::crag: return render_crag(question, docs, opts);
    }
    throw Error("unknown prompt family");
}

std::vector<std::pair<int, std::string>> scan_document_slots(std::string_view prompt_text) {
    std::vector<std::pair<int, std::string>> slots;
    constexpr std::string_view kHeader = "#Reference Documents";
    const std::size_t header = prompt_text.find(kHeader);
    if (header == std::string_view::npos) return slots;

    std::size_t pos = prompt_text.find('\n', header);
    while (pos != std::string_view::npos && pos + 1 < prompt_text.size()) {
        const std::size_t line_start = pos + 1;
        std::size_t line_end = prompt_text.find('\n', line_start);
        if (line_end == std::string_view::npos) line_end = prompt_text.size();
        std::string_view line = prompt_text.substr(line_start, line_end - line_start);
        if (line.empty() || line.front() != '[') break;

        std::size_t close = line.find(']');
        if (close == std::string_view::npos || close < 2) break;
        int number = 0;
        bool numeric = true;
        for (std::size_t i = 1; i < close; ++i) {
            if (!std::isdigit(static_cast<unsigned char>(line[i]))) {
                numeric = false;
                break;
            }
            number = number * 10 + (line[i] - '0');
        }
        if (!numeric) break;
        std::size_t content = close + 1;
        while (content < line.size() && line[content] == ' ') ++content;
        slots.emplace_back(number, std::string(line.substr(content)));
        pos = line_end;
    }
    return slots;
}

}  // namespace crag
