#include <doctest.h>

#include <algorithm>
#include <set>

#include "crag/bm25.hpp"
#include "crag/error.hpp"
#include "crag/rng.hpp"
#include "support/oracles.hpp"

using namespace crag;

namespace {

Corpus toy_corpus_20() {
    Corpus corpus;
    corpus.add({"doc01", "paris", "paris is the capital of france"});
    corpus.add({"doc02", "lyon", "lyon is a large city in france"});
    corpus.add({"doc03", "berlin", "berlin is the capital of germany"});
    corpus.add({"doc04", "rome", "rome is the capital of italy"});
    corpus.add({"doc05", "rivers", "the seine flows through paris in france"});
    corpus.add({"doc06", "alps", "the alps span france italy and switzerland"});
    corpus.add({"doc07", "cheese", "france produces many kinds of cheese"});
    corpus.add({"doc08", "wine", "bordeaux wine comes from france"});
    corpus.add({"doc09", "madrid", "madrid is the capital of spain"});
    corpus.add({"doc10", "lisbon", "lisbon is the capital of portugal"});
    corpus.add({"doc11", "history", "the french revolution began in paris"});
    corpus.add({"doc12", "louvre", "the louvre museum is in paris france"});
    corpus.add({"doc13", "vienna", "vienna is the capital of austria"});
    corpus.add({"doc14", "brussels", "brussels is the capital of belgium"});
    corpus.add({"doc15", "geography", "france borders spain italy and germany"});
    corpus.add({"doc16", "railways", "high speed trains connect paris and lyon"});
    corpus.add({"doc17", "capital", "a capital city hosts the seat of government"});
    corpus.add({"doc18", "marseille", "marseille is a port city in southern france"});
    corpus.add({"doc19", "europe", "many capital cities in europe are old"});
    corpus.add({"doc20", "tourism", "tourists visit the eiffel tower in paris"});
    return corpus;
}

bool same_ranking(const std::vector<ScoredDoc>& a, const std::vector<ScoredDoc>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].document_id != b[i].document_id || a[i].score != b[i].score) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("single-document corpus ranks it first for any overlapping query") {
    Corpus corpus;
    corpus.add({"only", "title", "the quick brown fox"});
    const auto index = Bm25Index::build(corpus);
    const auto ranked = index.retrieve("quick fox", RetrievalConfig{});
    REQUIRE(ranked.entries.size() == 1);
    CHECK(ranked.entries[0].document_id == "only");
    CHECK(ranked.entries[0].score > 0.0);
}

TEST_CASE("toy corpus top-5 equals exhaustive scoring") {
    const Corpus corpus = toy_corpus_20();
    const auto index = Bm25Index::build(corpus);
    const auto ranked = index.retrieve("capital of france", RetrievalConfig{});
    const auto expected = oracles::brute_force_bm25_topk(corpus, "capital of france", 5);
    REQUIRE(ranked.entries.size() == 5);
    CHECK(same_ranking(ranked.entries, expected));
}

TEST_CASE("randomized oracle agreement including tie rule") {
    const Corpus corpus = oracles::random_corpus(11, 200);
    const auto index = Bm25Index::build(corpus);
    DetRng rng(12);
    for (int q = 0; q < 30; ++q) {
        const std::string question = oracles::random_sentence(rng, 1, 4);
        const auto ranked = index.retrieve(question, RetrievalConfig{});
        const auto expected = oracles::brute_force_bm25_topk(corpus, question, 5);
        REQUIRE(same_ranking(ranked.entries, expected));
    }
}

TEST_CASE("rebuilding gives identical rankings for 50 random queries") {
    const Corpus corpus = oracles::random_corpus(21, 100);
    const auto index_a = Bm25Index::build(corpus);
    const auto index_b = Bm25Index::build(corpus);
    DetRng rng(22);
    for (int q = 0; q < 50; ++q) {
        const std::string question = oracles::random_sentence(rng, 1, 5);
        CHECK(same_ranking(index_a.retrieve(question, RetrievalConfig{}).entries,
                           index_b.retrieve(question, RetrievalConfig{}).entries));
    }
}

TEST_CASE("ranking is invariant to corpus line order") {
    const Corpus corpus = oracles::random_corpus(31, 80);
    std::vector<Document> docs = corpus.docs();
    DetRng rng(32);
    rng.shuffle(docs);
    Corpus shuffled;
    for (auto& d : docs) shuffled.add(d);

    const auto index_a = Bm25Index::build(corpus);
    const auto index_b = Bm25Index::build(shuffled);
    for (int q = 0; q < 50; ++q) {
        const std::string question = oracles::random_sentence(rng, 1, 5);
        CHECK(same_ranking(index_a.retrieve(question, RetrievalConfig{}).entries,
                           index_b.retrieve(question, RetrievalConfig{}).entries));
    }
}

TEST_CASE("equal scores break ties by ascending id") {
    Corpus corpus;
    corpus.add({"zz", "", "identical words here"});
    corpus.add({"aa", "", "identical words here"});
    corpus.add({"mm", "", "something else entirely"});
    const auto index = Bm25Index::build(corpus);
    const auto ranked = index.retrieve("identical words", RetrievalConfig{});
    REQUIRE(ranked.entries.size() == 3);
    CHECK(ranked.entries[0].document_id == "aa");
    CHECK(ranked.entries[1].document_id == "zz");
    CHECK(ranked.entries[0].score == ranked.entries[1].score);
}

TEST_CASE("result size is min(top_k, corpus size)") {
    Corpus corpus;
    corpus.add({"a", "", "one two"});
    corpus.add({"b", "", "two three"});
    corpus.add({"c", "", "three four"});
    const auto index = Bm25Index::build(corpus);
    CHECK(index.retrieve("two", RetrievalConfig{5, Scorer::bm25}).entries.size() == 3);

    const Corpus big = oracles::random_corpus(41, 12);
    const auto big_index = Bm25Index::build(big);
    CHECK(big_index.retrieve("alpha beta", RetrievalConfig{}).entries.size() == 5);
}

TEST_CASE("scores are non-increasing and ids unique") {
    const Corpus corpus = oracles::random_corpus(51, 64);
    const auto index = Bm25Index::build(corpus);
    const auto ranked = index.retrieve("alpha beta gamma", RetrievalConfig{10, Scorer::bm25});
    std::set<std::string> ids;
    for (std::size_t i = 0; i < ranked.entries.size(); ++i) {
        CHECK(ids.insert(ranked.entries[i].document_id).second);
        if (i > 0) CHECK(ranked.entries[i - 1].score >= ranked.entries[i].score);
    }
}

TEST_CASE("empty question after normalization is an error") {
    const Corpus corpus = oracles::random_corpus(61, 4);
    const auto index = Bm25Index::build(corpus);
    CHECK_THROWS_AS(index.retrieve("   ", RetrievalConfig{}), Error);
    CHECK_THROWS_AS(index.retrieve("?!.,", RetrievalConfig{}), Error);
}

TEST_CASE("distractors avoid the top of the ranking and are seed-stable") {
    const Corpus corpus = oracles::random_corpus(71, 300);
    const auto index = Bm25Index::build(corpus);
    const std::string question = "alpha beta";

    const auto sample_a = index.sample_distractors(question, 4, 100, 99);
    const auto sample_b = index.sample_distractors(question, 4, 100, 99);
    REQUIRE(sample_a.size() == 4);
    for (std::size_t i = 0; i < sample_a.size(); ++i) {
        CHECK(sample_a[i].id == sample_b[i].id);
    }

    const auto top = index.retrieve(question, RetrievalConfig{100, Scorer::bm25});
    std::set<std::string> top_ids;
    for (const auto& e : top.entries) top_ids.insert(e.document_id);
    for (const auto& doc : sample_a) CHECK(top_ids.count(doc.id) == 0);

    const auto different = index.sample_distractors(question, 4, 100, 100);
    bool all_same = true;
    for (std::size_t i = 0; i < sample_a.size(); ++i) {
        all_same = all_same && sample_a[i].id == different[i].id;
    }
    CHECK_FALSE(all_same);
}

TEST_CASE("distractor edge cases") {
    const Corpus corpus = oracles::random_corpus(81, 120);
    const auto index = Bm25Index::build(corpus);
    CHECK(index.sample_distractors("alpha", 0, 100, 1).empty());
    CHECK_THROWS_AS(index.sample_distractors("alpha", 30, 100, 1), Error);
}

TEST_CASE("index json artifact is stable across rebuilds") {
    const Corpus corpus = oracles::random_corpus(91, 25);
    const auto a = Bm25Index::build(corpus).to_json().dump();
    const auto b = Bm25Index::build(corpus).to_json().dump();
    CHECK(a == b);
}
