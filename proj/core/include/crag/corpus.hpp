#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace crag {

/// A retrievable text unit with a stable identifier.
struct Document {
    std::string id;
    std::string title;
    std::string body;
};

/// An in-memory document collection with unique non-empty ids.
class Corpus {
public:
    Corpus() = default;

    /// Ingests a UTF-8 JSON Lines file, one {"id","title","text"} object per
    /// line. Malformed lines and duplicate ids are reported with their line
    /// number. An empty file yields an empty (but valid) corpus.
    static Corpus load_jsonl(const std::filesystem::path& path);

    /// Adds a document, enforcing the corpus invariants (non-empty unique id,
    /// non-empty body after trimming).
    void add(Document doc);

    std::size_t size() const { return docs_.size(); }
    bool empty() const { return docs_.empty(); }
    const Document& at(std::size_t i) const { return docs_[i]; }
    const std::vector<Document>& docs() const { return docs_; }

    /// nullptr when the id is unknown.
    const Document* find(std::string_view id) const;

    /// Documents for an ordered id list; raises Error on unknown ids.
    std::vector<Document> resolve(const std::vector<std::string>& ids) const;

private:
    std::vector<Document> docs_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

}  // namespace crag
