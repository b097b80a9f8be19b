#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace crag {

enum class Verdict { relevant, irrelevant };

struct EvidenceEntry {
    int doc_index = 0;  // 1-based
    std::string passage;
};

struct AnalysisEntry {
    int doc_index = 0;  // 1-based
    std::string passage;
    Verdict verdict = Verdict::relevant;
    std::string rationale;
};

/// A parsed four-stage contrastive trace: extracted evidence, per-document
/// relevance analyses, the consolidated explanation, and the short answer.
struct CragTrace {
    std::vector<EvidenceEntry> reference_evidence;
    std::vector<AnalysisEntry> analyses;
    std::string explanation;
    std::string answer;
    std::string raw;
};

enum class ParseStage { evidence, analysis, explanation, answer };

struct ParseError {
    ParseStage stage = ParseStage::answer;
    std::string message;
    std::size_t span_begin = 0;  // character offsets into the raw text
    std::size_t span_end = 0;
};

using ParseResult = std::variant<CragTrace, ParseError>;

inline bool is_trace(const ParseResult& r) { return std::holds_alternative<CragTrace>(r); }
inline const CragTrace& get_trace(const ParseResult& r) { return std::get<CragTrace>(r); }
inline const ParseError& get_error(const ParseResult& r) { return std::get<ParseError>(r); }

/// The relevant/irrelevant document partition extracted from a trace. A
/// document with conflicting verdicts lands in `relevant` and is flagged in
/// `warnings`.
struct ContrastivePartition {
    std::set<int> relevant;
    std::set<int> irrelevant;
    std::vector<std::string> warnings;
};

/// Parses a raw completion into a trace. Total: every input yields either a
/// trace satisfying the type invariants or a ParseError with a span inside
/// the input. Lenient about prose between sections; strict about marker
/// presence, the "#Explanation:" before "#Answer:" ordering, and doc indexes
/// staying within 1..k.
ParseResult parse_trace(std::string_view completion, int k);

/// Text after the last "#Answer:" marker, trimmed and truncated at the next
/// section marker. Works on baseline/RAG outputs too.
std::variant<std::string, ParseError> extract_answer(std::string_view completion);

ContrastivePartition extract_partition(const CragTrace& trace);

/// Union of document indexes cited in the evidence and analysis entries.
std::set<int> cited_documents(const CragTrace& trace);

/// Serializes the four stages back into the section layout the prompt
/// requests, ending with "#Answer: <answer>". parse_trace() on the output
/// reconstructs the structured fields.
std::string serialize_trace(const CragTrace& trace);

/// Verdict keyword detection used for analysis entries; exposed for tests.
/// nullopt when no verdict keyword is found.
std::optional<Verdict> detect_verdict(std::string_view relevance_text);

nlohmann::json trace_to_json(const CragTrace& trace, std::string_view question_id);
CragTrace trace_from_json(const nlohmann::json& obj);
nlohmann::json parse_error_to_json(const ParseError& err);
ParseError parse_error_from_json(const nlohmann::json& obj);

const char* to_string(Verdict v);
const char* to_string(ParseStage s);

}  // namespace crag
