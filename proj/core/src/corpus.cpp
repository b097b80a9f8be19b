#include "crag/corpus.hpp"

#include "crag/error.hpp"
#include "crag/jsonl.hpp"
#include "crag/text.hpp"

namespace crag {

Corpus Corpus::load_jsonl(const std::filesystem::path& path) {
    Corpus corpus;
    for_each_jsonl(path, [&](std::size_t line_no, const nlohmann::json& obj) {
        const std::string where = path.string() + ":" + std::to_string(line_no);
        if (!obj.is_object() || !obj.contains("id") || !obj.contains("text")) {
            throw Error(where + ": corpus line must be an object with \"id\" and \"text\"");
        }
        Document doc;
        try {
            doc.id = obj.at("id").get<std::string>();
            doc.title = obj.value("title", std::string{});
            doc.body = obj.at("text").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(where + ": " + e.what());
        }
        if (doc.id.empty()) throw Error(where + ": empty document id");
        if (trim(doc.body).empty()) throw Error(where + ": empty document text");
        if (corpus.by_id_.count(doc.id) != 0) {
            throw Error(where + ": duplicate document id \"" + doc.id + "\"");
        }
        corpus.by_id_.emplace(doc.id, corpus.docs_.size());
        corpus.docs_.push_back(std::move(doc));
    });
    return corpus;
}

void Corpus::add(Document doc) {
    if (doc.id.empty()) throw Error("empty document id");
    if (trim(doc.body).empty()) throw Error("empty document text for id \"" + doc.id + "\"");
    if (by_id_.count(doc.id) != 0) throw Error("duplicate document id \"" + doc.id + "\"");
    by_id_.emplace(doc.id, docs_.size());
    docs_.push_back(std::move(doc));
}

const Document* Corpus::find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    return it == by_id_.end() ? nullptr : &docs_[it->second];
}

std::vector<Document> Corpus::resolve(const std::vector<std::string>& ids) const {
    std::vector<Document> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        const Document* doc = find(id);
        if (doc == nullptr) throw Error("unknown document id \"" + id + "\"");
        out.push_back(*doc);
    }
    return out;
}

}  // namespace crag
