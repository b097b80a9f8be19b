#include "crag/trace.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "crag/error.hpp"
#include "crag/text.hpp"

namespace crag {

namespace {

inline char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }
inline bool is_hspace(char c) { return c == ' ' || c == '\t'; }

struct Marker {
    std::size_t begin = 0;  // offset of '#'
    std::size_t end = 0;    // offset one past the marker (after ':' when present)
};

/// Matches "#<ws>name<ws>:?" at `pos` case-insensitively. Spaces inside
/// `name` match one or more horizontal spaces in the text.
std::optional<std::size_t> match_marker_at(std::string_view text, std::size_t pos,
                                           std::string_view name, bool require_colon) {
    if (pos >= text.size() || text[pos] != '#') return std::nullopt;
    std::size_t i = pos + 1;
    while (i < text.size() && is_hspace(text[i])) ++i;
    for (std::size_t n = 0; n < name.size(); ++n) {
        if (name[n] == ' ') {
            if (i >= text.size() || !is_hspace(text[i])) return std::nullopt;
            while (i < text.size() && is_hspace(text[i])) ++i;
            continue;
        }
        if (i >= text.size() || lower(text[i]) != name[n]) return std::nullopt;
        ++i;
    }
    // Reject prefixes of longer words ("#Answering" is not "#Answer:").
    if (i < text.size() && std::isalpha(static_cast<unsigned char>(text[i]))) return std::nullopt;
    std::size_t after_name = i;
    while (i < text.size() && is_hspace(text[i])) ++i;
    if (i < text.size() && text[i] == ':') return i + 1;
    if (require_colon) return std::nullopt;
    return after_name;
}

std::vector<Marker> find_markers(std::string_view text, std::string_view name,
                                 bool require_colon, std::size_t limit_end) {
    std::vector<Marker> out;
    for (std::size_t pos = 0; pos < std::min(text.size(), limit_end); ++pos) {
        if (text[pos] != '#') continue;
        if (auto end = match_marker_at(text, pos, name, require_colon)) {
            out.push_back({pos, *end});
        }
    }
    return out;
}

constexpr std::array<std::string_view, 13> kSectionNames = {
    "role",       "task",        "requirements",       "requirement",
    "reference evidences", "reference evidence", "reference documents",
    "reference document",  "analysis",           "analyses",
    "question",   "explanation", "answer"};

/// First known section marker at or after `from`; colon not required so bare
/// headers like "#Question" still terminate a section.
std::optional<Marker> next_section_marker(std::string_view text, std::size_t from) {
    for (std::size_t pos = from; pos < text.size(); ++pos) {
        if (text[pos] != '#') continue;
        for (std::string_view name : kSectionNames) {
            if (auto end = match_marker_at(text, pos, name, /*require_colon=*/false)) {
                return Marker{pos, *end};
            }
        }
    }
    return std::nullopt;
}

std::string section_text(std::string_view raw, std::size_t begin, std::size_t hard_end) {
    std::size_t end = hard_end;
    if (auto marker = next_section_marker(raw, begin)) {
        end = std::min(end, marker->begin);
    }
    return trim(raw.substr(begin, end - begin));
}

std::size_t find_ci(std::string_view haystack, std::string_view needle) {
    if (needle.empty() || haystack.size() < needle.size()) return std::string_view::npos;
    for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
        bool hit = true;
        for (std::size_t j = 0; j < needle.size(); ++j) {
            if (lower(haystack[i + j]) != needle[j]) {
                hit = false;
                break;
            }
        }
        if (hit) return i;
    }
    return std::string_view::npos;
}

std::size_t rfind_ci(std::string_view haystack, std::string_view needle) {
    std::size_t found = std::string_view::npos;
    std::size_t from = 0;
    for (;;) {
        std::string_view rest = haystack.substr(from);
        const std::size_t pos = find_ci(rest, needle);
        if (pos == std::string_view::npos) break;
        found = from + pos;
        from = found + 1;
    }
    return found;
}

/// "[n]" entry marker at the start of a line, optionally bulleted
/// ("- [n]: ..."). Returns (doc index, offset of content within the line).
std::optional<std::pair<int, std::size_t>> parse_entry_marker(std::string_view line) {
    std::size_t i = 0;
    while (i < line.size() && is_hspace(line[i])) ++i;
    if (i < line.size() && (line[i] == '-' || line[i] == '*')) {
        ++i;
        while (i < line.size() && is_hspace(line[i])) ++i;
    }
    if (i >= line.size() || line[i] != '[') return std::nullopt;
    ++i;
    std::size_t digits = 0;
    long value = 0;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) {
        if (++digits > 7) return std::nullopt;
        value = value * 10 + (line[i] - '0');
        ++i;
    }
    if (digits == 0 || i >= line.size() || line[i] != ']') return std::nullopt;
    ++i;
    if (i < line.size() && line[i] == ':') ++i;
    if (i < line.size() && !is_hspace(line[i])) return std::nullopt;
    while (i < line.size() && is_hspace(line[i])) ++i;
    return std::make_pair(static_cast<int>(value), i);
}

std::string strip_outer_quotes(std::string s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
        return s.substr(1, s.size() - 2);
    }
    return s;
}

const std::array<std::string_view, 17> kNegations = {
    "not",   "no",     "never",   "neither", "nor",     "hardly",
    "isn't", "aren't", "wasn't",  "weren't", "doesn't", "don't",
    "didn't", "cannot", "can't",  "won't",   "without"};

const std::array<std::string_view, 3> kRelevantCues = {"relevant", "helpful", "supports"};
const std::array<std::string_view, 2> kIrrelevantCues = {"irrelevant", "unrelated"};

std::vector<std::string> word_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '\'') {
            cur.push_back(lower(c));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

bool negated_before(const std::vector<std::string>& tokens, std::size_t i) {
    const std::size_t lo = i >= 3 ? i - 3 : 0;
    for (std::size_t j = lo; j < i; ++j) {
        if (std::find(kNegations.begin(), kNegations.end(), tokens[j]) != kNegations.end()) {
            return true;
        }
    }
    return false;
}

}  // namespace

std::optional<Verdict> detect_verdict(std::string_view relevance_text) {
    const auto tokens = word_tokens(relevance_text);
    bool negated_relevant_cue = false;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const bool cue = std::find(kRelevantCues.begin(), kRelevantCues.end(), tokens[i]) !=
                         kRelevantCues.end();
        if (!cue) continue;
        if (negated_before(tokens, i)) {
            negated_relevant_cue = true;  // "not relevant"
        } else {
            return Verdict::relevant;
        }
    }
    for (const auto& t : tokens) {
        if (std::find(kIrrelevantCues.begin(), kIrrelevantCues.end(), t) !=
            kIrrelevantCues.end()) {
            return Verdict::irrelevant;
        }
    }
    if (negated_relevant_cue) return Verdict::irrelevant;
    return std::nullopt;
}

std::variant<std::string, ParseError> extract_answer(std::string_view completion) {
    const auto markers = find_markers(completion, "answer", /*require_colon=*/true,
                                      completion.size());
    if (markers.empty()) {
        return ParseError{ParseStage::answer, "missing \"#Answer:\" marker", 0,
                          completion.size()};
    }
    const Marker last = markers.back();
    return section_text(completion, last.end, completion.size());
}

ParseResult parse_trace(std::string_view completion, int k) {
    if (k < 1) throw Error("k must be >= 1");
    const std::string_view raw = completion;

    // Answer stage: last marker wins.
    const auto answer_markers = find_markers(raw, "answer", true, raw.size());
    if (answer_markers.empty()) {
        return ParseError{ParseStage::answer, "missing \"#Answer:\" marker", 0, raw.size()};
    }
    const Marker ans = answer_markers.back();
    std::string answer = section_text(raw, ans.end, raw.size());
    if (answer.empty()) {
        return ParseError{ParseStage::answer, "empty answer", ans.begin, ans.end};
    }

    // Explanation stage: must precede the committed answer marker.
    const auto expl_markers = find_markers(raw, "explanation", true, ans.begin);
    if (expl_markers.empty()) {
        const bool misordered =
            !find_markers(raw, "explanation", true, raw.size()).empty();
        return ParseError{ParseStage::explanation,
                          misordered ? "\"#Explanation:\" must precede \"#Answer:\""
                                     : "missing \"#Explanation:\" marker",
                          0, ans.begin};
    }
    const Marker expl = expl_markers.back();
    std::string explanation = section_text(raw, expl.end, ans.begin);
    if (explanation.empty()) {
        return ParseError{ParseStage::explanation, "empty explanation", expl.begin, expl.end};
    }

    // Evidence and analysis entries live before the explanation marker.
    const std::size_t region_end = expl.begin;
    enum class Section { none, evidence, analysis };
    std::vector<std::pair<std::size_t, Section>> headers;
    for (std::string_view name : {"reference evidence", "reference evidences",
                                  "reference document", "reference documents"}) {
        for (const auto& m : find_markers(raw, name, false, region_end)) {
            headers.push_back({m.begin, Section::evidence});
        }
    }
    for (std::string_view name : {"analysis", "analyses"}) {
        for (const auto& m : find_markers(raw, name, false, region_end)) {
            headers.push_back({m.begin, Section::analysis});
        }
    }
    std::sort(headers.begin(), headers.end());

    struct RawEntry {
        int index = 0;
        std::size_t begin = 0;     // line start
        std::size_t content = 0;   // offset of text after the marker
        std::size_t end = 0;
        Section section = Section::none;
    };
    std::vector<RawEntry> entries;

    std::size_t line_start = 0;
    while (line_start < region_end) {
        std::size_t line_end = raw.find('\n', line_start);
        if (line_end == std::string_view::npos || line_end > region_end) line_end = region_end;
        const std::string_view line = raw.substr(line_start, line_end - line_start);
        if (auto marker = parse_entry_marker(line)) {
            RawEntry entry;
            entry.index = marker->first;
            entry.begin = line_start;
            entry.content = line_start + marker->second;
            entries.push_back(entry);
        } else if (!entries.empty()) {
            // A header line terminates the running entry; plain prose lines
            // extend it.
            const std::size_t first = line.find_first_not_of(" \t\r");
            if (first != std::string_view::npos && line[first] == '#') {
                entries.back().end = line_start;
            }
        }
        line_start = line_end + 1;
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].end != 0) continue;
        entries[i].end = (i + 1 < entries.size()) ? entries[i + 1].begin : region_end;
    }
    for (auto& entry : entries) {
        Section section = Section::none;
        for (const auto& [pos, kind] : headers) {
            if (pos < entry.begin) section = kind;
        }
        entry.section = section;
    }

    CragTrace trace;
    for (const auto& entry : entries) {
        const std::string body =
            collapse_whitespace(raw.substr(entry.content, entry.end - entry.content));
        Section section = entry.section;
        if (section == Section::none) {
            section = detect_verdict(body) ? Section::analysis : Section::evidence;
        }
        if (section == Section::evidence) {
            if (entry.index < 1 || entry.index > k) {
                return ParseError{ParseStage::evidence,
                                  "evidence cites document " + std::to_string(entry.index) +
                                      " outside 1.." + std::to_string(k),
                                  entry.begin, entry.end};
            }
            trace.reference_evidence.push_back({entry.index, body});
            continue;
        }
        if (entry.index < 1 || entry.index > k) {
            return ParseError{ParseStage::analysis,
                              "analysis cites document " + std::to_string(entry.index) +
                                  " outside 1.." + std::to_string(k),
                              entry.begin, entry.end};
        }
        AnalysisEntry analysis;
        analysis.doc_index = entry.index;

        std::string_view body_view = body;
        std::size_t passage_begin = 0;
        const std::size_t claims = find_ci(body_view, "passage claims");
        if (claims != std::string_view::npos) {
            passage_begin = claims + std::string_view("passage claims").size();
            while (passage_begin < body_view.size() &&
                   (body_view[passage_begin] == ':' || is_hspace(body_view[passage_begin]))) {
                ++passage_begin;
            }
        }
        const std::size_t relevance_label = rfind_ci(body_view, "relevance");
        std::size_t relevance_text_begin = std::string_view::npos;
        std::size_t passage_end = body_view.size();
        if (relevance_label != std::string_view::npos && relevance_label >= passage_begin) {
            std::size_t j = relevance_label + std::string_view("relevance").size();
            while (j < body_view.size() && is_hspace(body_view[j])) ++j;
            if (j < body_view.size() && body_view[j] == ':') {
                relevance_text_begin = j + 1;
                passage_end = relevance_label;
            }
        }
        std::string relevance_text;
        if (relevance_text_begin != std::string_view::npos) {
            relevance_text = trim(body_view.substr(relevance_text_begin));
            analysis.passage = strip_outer_quotes(
                trim(body_view.substr(passage_begin, passage_end - passage_begin)));
        } else {
            relevance_text = trim(body_view.substr(passage_begin));
            analysis.passage.clear();
        }
        const auto verdict = detect_verdict(relevance_text);
        if (!verdict) {
            return ParseError{ParseStage::analysis,
                              "no relevant/irrelevant verdict for document " +
                                  std::to_string(entry.index),
                              entry.begin, entry.end};
        }
        analysis.verdict = *verdict;
        analysis.rationale = relevance_text;
        trace.analyses.push_back(std::move(analysis));
    }

    if (trace.reference_evidence.empty() && trace.analyses.empty()) {
        return ParseError{ParseStage::evidence, "no document index cited", 0, region_end};
    }

    trace.explanation = std::move(explanation);
    trace.answer = std::move(answer);
    trace.raw = std::string(raw);
    return trace;
}

ContrastivePartition extract_partition(const CragTrace& trace) {
    ContrastivePartition out;
    for (const auto& a : trace.analyses) {
        if (a.verdict == Verdict::relevant) {
            out.relevant.insert(a.doc_index);
        } else {
            out.irrelevant.insert(a.doc_index);
        }
    }
    // A claim of relevance dominates conflicting verdicts.
    for (int idx : out.relevant) {
        if (out.irrelevant.erase(idx) > 0) {
            out.warnings.push_back("document " + std::to_string(idx) +
                                   " has conflicting verdicts; kept relevant");
        }
    }
    return out;
}

std::set<int> cited_documents(const CragTrace& trace) {
    std::set<int> cited;
    for (const auto& e : trace.reference_evidence) cited.insert(e.doc_index);
    for (const auto& a : trace.analyses) cited.insert(a.doc_index);
    return cited;
}

std::string serialize_trace(const CragTrace& trace) {
    std::string out;
    out += "#Reference Evidence:\n";
    for (const auto& e : trace.reference_evidence) {
        out += "[" + std::to_string(e.doc_index) + "] " + collapse_whitespace(e.passage) + "\n";
    }
    out += "#Analysis:\n";
    for (const auto& a : trace.analyses) {
        out += "[" + std::to_string(a.doc_index) + "] Passage claims: \"" +
               collapse_whitespace(a.passage) + "\" Relevance: " +
               collapse_whitespace(a.rationale) + "\n";
    }
    out += "#Explanation: " + trace.explanation + "\n";
    out += "#Answer: " + trace.answer;
    return out;
}

nlohmann::json trace_to_json(const CragTrace& trace, std::string_view question_id) {
    nlohmann::json evidence = nlohmann::json::array();
    for (const auto& e : trace.reference_evidence) {
        evidence.push_back({{"doc_index", e.doc_index}, {"passage", e.passage}});
    }
    nlohmann::json analyses = nlohmann::json::array();
    for (const auto& a : trace.analyses) {
        analyses.push_back({{"doc_index", a.doc_index},
                            {"passage", a.passage},
                            {"verdict", to_string(a.verdict)},
                            {"rationale", a.rationale}});
    }
    return nlohmann::json{{"question_id", std::string(question_id)},
                          {"reference_evidence", std::move(evidence)},
                          {"analyses", std::move(analyses)},
                          {"explanation", trace.explanation},
                          {"answer", trace.answer},
                          {"raw", trace.raw}};
}

CragTrace trace_from_json(const nlohmann::json& obj) {
    CragTrace trace;
    for (const auto& e : obj.at("reference_evidence")) {
        trace.reference_evidence.push_back(
            {e.at("doc_index").get<int>(), e.at("passage").get<std::string>()});
    }
    for (const auto& a : obj.at("analyses")) {
        AnalysisEntry entry;
        entry.doc_index = a.at("doc_index").get<int>();
        entry.passage = a.at("passage").get<std::string>();
        entry.verdict = a.at("verdict").get<std::string>() == "irrelevant"
                            ? Verdict::irrelevant
                            : Verdict::relevant;
        entry.rationale = a.at("rationale").get<std::string>();
        trace.analyses.push_back(std::move(entry));
    }
    trace.explanation = obj.at("explanation").get<std::string>();
    trace.answer = obj.at("answer").get<std::string>();
    trace.raw = obj.value("raw", std::string{});
    return trace;
}

nlohmann::json parse_error_to_json(const ParseError& err) {
    return nlohmann::json{{"stage", to_string(err.stage)},
                          {"message", err.message},
                          {"span", {err.span_begin, err.span_end}}};
}

ParseError parse_error_from_json(const nlohmann::json& obj) {
    ParseError err;
    const std::string stage = obj.at("stage").get<std::string>();
    if (stage == "evidence") err.stage = ParseStage::evidence;
    else if (stage == "analysis") err.stage = ParseStage::analysis;
    else if (stage == "explanation") err.stage = ParseStage::explanation;
    else err.stage = ParseStage::answer;
    err.message = obj.at("message").get<std::string>();
    err.span_begin = obj.at("span").at(0).get<std::size_t>();
    err.span_end = obj.at("span").at(1).get<std::size_t>();
    return err;
}

const char* to_string(Verdict v) {
    return v == Verdict::relevant ? "relevant" : "irrelevant";
}

const char* to_string(ParseStage s) {
    switch (s) {
        case ParseStage::evidence: return "evidence";
        case ParseStage::analysis: return "analysis";
        case ParseStage::explanation: return "explanation";
        case ParseStage::answer: return "answer";
    }
    return "answer";
}

}  // namespace crag
