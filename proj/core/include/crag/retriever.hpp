#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "crag/bm25.hpp"
#include "crag/corpus.hpp"

namespace crag {

/// Precomputed-ranking adapter: replays rankings produced by an external
/// retriever from a JSON Lines file of {"query_id": str, "ranking": [doc_id]}.
/// Entries receive synthetic strictly-decreasing scores 1/(rank+1).
class ExternalRankings {
public:
    static ExternalRankings load_jsonl(const std::filesystem::path& path);

    bool contains(std::string_view query_id) const;

    /// Raises Error when the query id is unknown or a ranked id is not in the
    /// corpus.
    RankedDocuments rank(std::string_view query_id, int top_k, const Corpus& corpus) const;

private:
    std::unordered_map<std::string, std::vector<std::string>> rankings_;
};

/// The retrieval side of a pipeline run: a corpus plus either the lexical
/// index or replayed external rankings, selected by cfg.scorer.
struct RetrievalSource {
    const Corpus* corpus = nullptr;
    const Bm25Index* index = nullptr;            // required for scorer=bm25
    const ExternalRankings* external = nullptr;  // required for external_adapter
    RetrievalConfig cfg;

    RankedDocuments rank(std::string_view question, std::string_view query_id) const;

    /// Ranked documents resolved to full Document values, in rank order.
    std::vector<Document> top_docs(std::string_view question, std::string_view query_id) const;
};

}  // namespace crag
