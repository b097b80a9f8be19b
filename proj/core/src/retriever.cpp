#include "crag/retriever.hpp"

#include "crag/error.hpp"
#include "crag/jsonl.hpp"

namespace crag {

ExternalRankings ExternalRankings::load_jsonl(const std::filesystem::path& path) {
    ExternalRankings out;
    for_each_jsonl(path, [&](std::size_t line_no, const nlohmann::json& obj) {
        const std::string where = path.string() + ":" + std::to_string(line_no);
        if (!obj.is_object() || !obj.contains("query_id") || !obj.contains("ranking")) {
            throw Error(where + ": expected {\"query_id\", \"ranking\"}");
        }
        std::string query_id = obj.at("query_id").get<std::string>();
        std::vector<std::string> ranking;
        for (const auto& id : obj.at("ranking")) ranking.push_back(id.get<std::string>());
        out.rankings_[std::move(query_id)] = std::move(ranking);
    });
    return out;
}

bool ExternalRankings::contains(std::string_view query_id) const {
    return rankings_.count(std::string(query_id)) != 0;
}

RankedDocuments ExternalRankings::rank(std::string_view query_id, int top_k,
                                       const Corpus& corpus) const {
    auto it = rankings_.find(std::string(query_id));
    if (it == rankings_.end()) {
        throw Error("no external ranking for query id \"" + std::string(query_id) + "\"");
    }
    RankedDocuments out;
    out.query_id = std::string(query_id);
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(top_k),
                                                it->second.size());
    for (std::size_t i = 0; i < k; ++i) {
        const std::string& id = it->second[i];
        if (corpus.find(id) == nullptr) {
            throw Error("external ranking for \"" + out.query_id +
                        "\" references unknown document id \"" + id + "\"");
        }
        out.entries.push_back({id, 1.0 / static_cast<double>(i + 1)});
    }
    return out;
}

RankedDocuments RetrievalSource::rank(std::string_view question,
                                      std::string_view query_id) const {
    if (cfg.scorer == Scorer::external_adapter) {
        if (external == nullptr || corpus == nullptr) {
            throw Error("external-adapter retrieval requires rankings and a corpus");
        }
        return external->rank(query_id, cfg.top_k, *corpus);
    }
    if (index == nullptr) throw Error("bm25 retrieval requires a built index");
    return index->retrieve(question, cfg, query_id);
}

std::vector<Document> RetrievalSource::top_docs(std::string_view question,
                                                std::string_view query_id) const {
    if (corpus == nullptr) throw Error("retrieval source has no corpus");
    const RankedDocuments ranked = rank(question, query_id);
    std::vector<std::string> ids;
    ids.reserve(ranked.entries.size());
    for (const auto& e : ranked.entries) ids.push_back(e.document_id);
    return corpus->resolve(ids);
}

}  // namespace crag
