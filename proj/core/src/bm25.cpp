#include "crag/bm25.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "crag/error.hpp"
#include "crag/rng.hpp"
#include "crag/text.hpp"

namespace crag {

namespace {

std::vector<std::string> unique_query_terms(std::string_view question) {
    std::vector<std::string> terms = tokenize(question);
    std::vector<std::string> unique;
    std::set<std::string> seen;
    for (auto& t : terms) {
        if (seen.insert(t).second) unique.push_back(std::move(t));
    }
    return unique;
}

/// (score desc, id asc) ordering over corpus positions.
struct RankCmp {
    const std::vector<double>& scores;
    const Corpus& corpus;
    bool operator()(std::size_t a, std::size_t b) const {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return corpus.at(a).id < corpus.at(b).id;
    }
};

}  // namespace

Bm25Index Bm25Index::build(const Corpus& corpus, Bm25Params params) {
    if (corpus.empty()) throw Error("cannot build an index over an empty corpus");
    Bm25Index index(corpus, params);
    index.doc_len_.reserve(corpus.size());

    std::uint64_t total_len = 0;
    for (std::size_t d = 0; d < corpus.size(); ++d) {
        const Document& doc = corpus.at(d);
        const auto tokens = tokenize(doc.title + " " + doc.body);
        total_len += tokens.size();
        index.doc_len_.push_back(static_cast<std::uint32_t>(tokens.size()));

        std::map<std::string, std::uint32_t> tf;
        for (const auto& t : tokens) ++tf[t];
        for (const auto& [term, count] : tf) {
            auto [it, inserted] = index.term_ids_.try_emplace(
                term, static_cast<std::uint32_t>(index.postings_.size()));
            if (inserted) index.postings_.emplace_back();
            index.postings_[it->second].push_back(
                {static_cast<std::uint32_t>(d), count});
        }
    }
    index.avgdl_ = static_cast<double>(total_len) / static_cast<double>(corpus.size());
    return index;
}

std::vector<double> Bm25Index::score_all(std::string_view question) const {
    const auto terms = unique_query_terms(question);
    if (terms.empty()) throw Error("question is empty after normalization");

    const double n_docs = static_cast<double>(doc_len_.size());
    std::vector<double> scores(doc_len_.size(), 0.0);
    for (const auto& term : terms) {
        auto it = term_ids_.find(term);
        if (it == term_ids_.end()) continue;
        const auto& plist = postings_[it->second];
        const double df = static_cast<double>(plist.size());
        const double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
        for (const Posting& p : plist) {
            const double tf = static_cast<double>(p.tf);
            const double len_norm =
                params_.k1 * (1.0 - params_.b +
                              params_.b * static_cast<double>(doc_len_[p.doc]) / avgdl_);
            scores[p.doc] += idf * tf * (params_.k1 + 1.0) / (tf + len_norm);
        }
    }
    return scores;
}

RankedDocuments Bm25Index::retrieve(std::string_view question, const RetrievalConfig& cfg,
                                    std::string_view query_id) const {
    if (cfg.top_k < 1) throw Error("top_k must be >= 1");
    const auto scores = score_all(question);

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(cfg.top_k), order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      RankCmp{scores, *corpus_});

    RankedDocuments out;
    out.query_id = std::string(query_id);
    out.entries.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        out.entries.push_back({corpus_->at(order[i]).id, scores[order[i]]});
    }
    return out;
}

std::vector<Document> Bm25Index::sample_distractors(std::string_view question, std::size_t n,
                                                    std::size_t exclusion_depth,
                                                    std::uint64_t seed) const {
    if (corpus_->size() <= exclusion_depth + n) {
        throw Error("corpus too small: need more than " +
                    std::to_string(exclusion_depth + n) + " documents, have " +
                    std::to_string(corpus_->size()));
    }
    if (n == 0) return {};

    const auto scores = score_all(question);
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t depth = std::min(exclusion_depth, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(depth),
                      order.end(), RankCmp{scores, *corpus_});

    std::set<std::size_t> excluded(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(depth));

    // Canonical pool order (ascending id) so the draw does not depend on
    // corpus file line order.
    std::vector<std::string> pool;
    pool.reserve(corpus_->size() - depth);
    for (std::size_t d = 0; d < corpus_->size(); ++d) {
        if (excluded.count(d) == 0) pool.push_back(corpus_->at(d).id);
    }
    std::sort(pool.begin(), pool.end());

    DetRng rng(seed);
    const auto chosen = rng.sample(std::move(pool), n);

    std::vector<Document> out;
    out.reserve(chosen.size());
    for (const auto& id : chosen) out.push_back(*corpus_->find(id));
    return out;
}

nlohmann::json Bm25Index::to_json() const {
    nlohmann::json docs = nlohmann::json::array();
    for (std::size_t d = 0; d < corpus_->size(); ++d) {
        docs.push_back({{"id", corpus_->at(d).id}, {"length", doc_len_[d]}});
    }
    std::map<std::string, std::uint32_t> sorted_terms(term_ids_.begin(), term_ids_.end());
    nlohmann::json postings = nlohmann::json::object();
    for (const auto& [term, tid] : sorted_terms) {
        nlohmann::json plist = nlohmann::json::array();
        for (const Posting& p : postings_[tid]) {
            plist.push_back({corpus_->at(p.doc).id, p.tf});
        }
        postings[term] = std::move(plist);
    }
    return nlohmann::json{{"type", "bm25"},
                          {"k1", params_.k1},
                          {"b", params_.b},
                          {"avgdl", avgdl_},
                          {"documents", std::move(docs)},
                          {"postings", std::move(postings)}};
}

}  // namespace crag
