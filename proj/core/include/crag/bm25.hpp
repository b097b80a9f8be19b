#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "crag/corpus.hpp"

namespace crag {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

enum class Scorer { bm25, external_adapter };

struct RetrievalConfig {
    int top_k = 5;
    Scorer scorer = Scorer::bm25;
};

struct ScoredDoc {
    std::string document_id;
    double score = 0.0;
};

/// Top-k ranking for one query. Entries are sorted by non-increasing score,
/// ties broken by ascending document id; no duplicate ids; length <= k.
struct RankedDocuments {
    std::string query_id;
    std::vector<ScoredDoc> entries;
};

/// Immutable lexical index over a corpus. Build once, retrieve from any
/// number of threads.
///
/// Every document receives a score for every query (documents sharing no
/// query term score 0), so retrieve() always returns min(top_k, corpus
/// size) entries. Score accumulation walks the query's unique terms in query
/// order, which keeps floating-point sums bit-identical to the exhaustive
/// scoring oracle used in the tests.
class Bm25Index {
public:
    static Bm25Index build(const Corpus& corpus, Bm25Params params = {});

    /// Scores `question` against every document and returns the top
    /// min(cfg.top_k, size) entries. Raises Error when the question has no
    /// tokens after normalization.
    RankedDocuments retrieve(std::string_view question, const RetrievalConfig& cfg,
                             std::string_view query_id = "") const;

    /// BM25 scores for all documents, indexed by corpus position.
    std::vector<double> score_all(std::string_view question) const;

    /// n documents sampled uniformly (seeded) from those outside the
    /// question's top `exclusion_depth` ranking. Deterministic per seed.
    std::vector<Document> sample_distractors(std::string_view question, std::size_t n,
                                             std::size_t exclusion_depth,
                                             std::uint64_t seed) const;

    const Corpus& corpus() const { return *corpus_; }
    const Bm25Params& params() const { return params_; }
    std::size_t size() const { return doc_len_.size(); }

    /// Audit artifact: term/document statistics plus postings, with sorted
    /// keys so the dump is byte-stable.
    nlohmann::json to_json() const;

private:
    explicit Bm25Index(const Corpus& corpus, Bm25Params params)
        : corpus_(&corpus), params_(params) {}

    struct Posting {
        std::uint32_t doc = 0;
        std::uint32_t tf = 0;
    };

    const Corpus* corpus_;
    Bm25Params params_;
    std::unordered_map<std::string, std::uint32_t> term_ids_;
    std::vector<std::vector<Posting>> postings_;
    std::vector<std::uint32_t> doc_len_;
    double avgdl_ = 0.0;
};

}  // namespace crag
