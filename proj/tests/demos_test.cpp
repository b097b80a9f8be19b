#include <doctest.h>

#include <filesystem>
#include <set>

#include "crag/demos.hpp"
#include "crag/error.hpp"
#include "crag/jsonl.hpp"
#include "support/oracles.hpp"

using namespace crag;
namespace fs = std::filesystem;

namespace {

std::string trace_text(const std::string& answer, bool full_coverage = true) {
    std::string out = "#Reference Evidence:\n";
    for (int d = 1; d <= 5; ++d) {
        if (!full_coverage && d == 3) continue;
        out += "[" + std::to_string(d) + "] passage " + std::to_string(d) + "\n";
    }
    out += "#Analysis:\n";
    for (int d = 1; d <= 5; ++d) {
        if (!full_coverage && d == 3) continue;
        out += "[" + std::to_string(d) + "] Passage claims: \"passage " + std::to_string(d) +
               "\" Relevance: " + (d <= 2 ? "relevant here." : "irrelevant here.") + "\n";
    }
    out += "#Explanation: docs one and two settle it.\n#Answer: " + answer;
    return out;
}

QaInstance instance(const std::string& id, Task task, const std::string& gold) {
    QaInstance inst;
    inst.id = id;
    inst.question = "question for " + id + " about alpha beta";
    inst.gold_answers = {gold};
    inst.task = task;
    return inst;
}

Demonstration survivor(const std::string& id, Task task, const std::string& gold) {
    Demonstration demo = make_demonstration(instance(id, task, gold),
                                            {"d1", "d2", "d3", "d4", "d5"}, trace_text(gold), 5);
    demo.stage1_pass = true;
    demo.stage2_pass = true;
    return demo;
}

}  // namespace

TEST_CASE("dataset loader validates structure and fever labels") {
    const fs::path path = fs::temp_directory_path() / "dataset_test.jsonl";
    SUBCASE("valid file") {
        write_jsonl(path, {nlohmann::json{{"id", "q1"},
                                          {"question", "who?"},
                                          {"answers", {"a", "b"}},
                                          {"task", "nq"}},
                           nlohmann::json{{"id", "q2"},
                                          {"question", "claim"},
                                          {"answers", {"SUPPORTS"}},
                                          {"task", "fever"}}});
        const auto dataset = load_dataset_jsonl(path);
        REQUIRE(dataset.size() == 2);
        CHECK(dataset[0].task == Task::nq);
        CHECK(dataset[1].task == Task::fever);
    }
    SUBCASE("fever with a non-label answer is rejected") {
        write_jsonl(path, {nlohmann::json{{"id", "q1"},
                                          {"question", "claim"},
                                          {"answers", {"yes"}},
                                          {"task", "fever"}}});
        CHECK_THROWS_AS(load_dataset_jsonl(path), Error);
    }
    SUBCASE("unknown task is rejected") {
        write_jsonl(path, {nlohmann::json{{"id", "q1"},
                                          {"question", "x"},
                                          {"answers", {"a"}},
                                          {"task", "webqa"}}});
        CHECK_THROWS_AS(load_dataset_jsonl(path), Error);
    }
}

TEST_CASE("generate_demonstrations parses scripted traces and flags failures") {
    const Corpus corpus = oracles::random_corpus(7, 30);
    const auto index = Bm25Index::build(corpus);
    RetrievalSource retrieval{&corpus, &index, nullptr, RetrievalConfig{}};

    std::vector<QaInstance> dataset;
    for (int i = 0; i < 10; ++i) {
        dataset.push_back(instance("g" + std::to_string(i), Task::nq,
                                   "gold " + std::to_string(i)));
    }

    // Script every prompt exactly as the generator will render it.
    MockBackend backend("");
    for (const auto& inst : dataset) {
        const auto docs = retrieval.top_docs(inst.question, inst.id);
        const auto prompt = render_crag(inst.question, docs);
        const bool broken = inst.id == "g7";
        backend.script_response(prompt.text, broken ? "#Explanation: no answer follows"
                                                    : trace_text(inst.gold_answers[0]));
    }

    DemoGenOptions options;
    options.parallelism = 4;
    const auto demos = generate_demonstrations(dataset, retrieval, backend, options);
    REQUIRE(demos.size() == 10);
    int unparsed = 0;
    for (const auto& demo : demos) {
        CHECK(demo.doc_order.size() == 5);
        CHECK_FALSE(demo.stage1_pass);
        CHECK_FALSE(demo.stage2_pass);
        if (!demo.parsed()) {
            ++unparsed;
            REQUIRE(demo.parse_error.has_value());
            CHECK(demo.parse_error->stage == ParseStage::answer);
            CHECK(demo.instance.id == "g7");
        }
    }
    CHECK(unparsed == 1);

    // Determinism: the same scripted run serializes identically.
    const auto demos2 = generate_demonstrations(dataset, retrieval, backend, options);
    REQUIRE(demos2.size() == demos.size());
    for (std::size_t i = 0; i < demos.size(); ++i) {
        CHECK(demo_to_json(demos[i]).dump() == demo_to_json(demos2[i]).dump());
    }
}

TEST_CASE("strict match is equality after normalization, not containment") {
    CHECK(strict_match("2002", {"2002"}));
    CHECK(strict_match("  Early 2002. ", {"early 2002"}));
    CHECK_FALSE(strict_match("early 2002", {"2002"}));
    CHECK_FALSE(strict_match("2002 was the year", {"2002"}));
    CHECK(strict_match("supports", {"SUPPORTS"}));
}

TEST_CASE("stage-1 filter marks exactly the strict matches") {
    std::vector<Demonstration> demos;
    int expected_survivors = 0;
    for (int i = 0; i < 100; ++i) {
        const std::string gold = "gold " + std::to_string(i);
        const bool correct = i % 10 < 6;  // 60 of 100
        expected_survivors += correct ? 1 : 0;
        demos.push_back(make_demonstration(instance("s" + std::to_string(i), Task::nq, gold),
                                           {"d1", "d2", "d3", "d4", "d5"},
                                           trace_text(correct ? gold : "other"), 5));
    }
    demos = filter_exact_match(std::move(demos));
    int survivors = 0;
    for (const auto& demo : demos) survivors += demo.stage1_pass ? 1 : 0;
    CHECK(survivors == expected_survivors);
    CHECK(survivors == 60);
}

TEST_CASE("stage-1 filter ignores document order") {
    auto demo = make_demonstration(instance("x", Task::nq, "g"), {"d1", "d2"}, trace_text("g"),
                                   5);
    auto reordered = demo;
    std::swap(reordered.doc_order[0], reordered.doc_order[1]);
    const auto a = filter_exact_match({demo});
    const auto b = filter_exact_match({reordered});
    CHECK(a[0].stage1_pass == b[0].stage1_pass);
}

TEST_CASE("stage-2 filter requires full citation coverage and evidence") {
    SUBCASE("full coverage passes") {
        auto demos = filter_exact_match(
            {make_demonstration(instance("x", Task::nq, "g"), {}, trace_text("g", true), 5)});
        demos = filter_citation_coverage(std::move(demos), 5);
        CHECK(demos[0].stage2_pass);
    }
    SUBCASE("missing document 3 fails") {
        auto demos = filter_exact_match(
            {make_demonstration(instance("x", Task::nq, "g"), {}, trace_text("g", false), 5)});
        demos = filter_citation_coverage(std::move(demos), 5);
        CHECK(demos[0].stage1_pass);
        CHECK_FALSE(demos[0].stage2_pass);
    }
    SUBCASE("stage-1 failure forces stage-2 failure") {
        auto demos = filter_exact_match({make_demonstration(
            instance("x", Task::nq, "g"), {}, trace_text("not gold", true), 5)});
        demos = filter_citation_coverage(std::move(demos), 5);
        CHECK_FALSE(demos[0].stage1_pass);
        CHECK_FALSE(demos[0].stage2_pass);
    }
    SUBCASE("empty evidence fails even with full analysis coverage") {
        std::string text = "#Analysis:\n";
        for (int d = 1; d <= 5; ++d) {
            text += "[" + std::to_string(d) + "] Relevance: relevant.\n";
        }
        text += "#Explanation: e\n#Answer: g";
        auto demos = filter_exact_match(
            {make_demonstration(instance("x", Task::nq, "g"), {}, text, 5)});
        demos = filter_citation_coverage(std::move(demos), 5);
        CHECK(demos[0].stage1_pass);
        CHECK_FALSE(demos[0].stage2_pass);
    }
}

TEST_CASE("balance_and_cap subsamples per task deterministically") {
    std::vector<Demonstration> demos;
    for (int i = 0; i < 40; ++i) {
        demos.push_back(survivor("nq" + std::to_string(i), Task::nq, "g" + std::to_string(i)));
    }
    for (int i = 0; i < 3; ++i) {
        demos.push_back(survivor("fv" + std::to_string(i), Task::fever, "SUPPORTS"));
    }

    std::map<Task, int> caps{{Task::nq, 10}, {Task::fever, 10}};
    const auto used = balance_and_cap(demos, caps, 5);
    int nq_count = 0;
    int fever_count = 0;
    for (const auto& demo : used) {
        if (demo.instance.task == Task::nq) ++nq_count;
        if (demo.instance.task == Task::fever) ++fever_count;
    }
    CHECK(nq_count == 10);
    CHECK(fever_count == 3);  // cap exceeds supply -> take all

    const auto used_again = balance_and_cap(demos, caps, 5);
    REQUIRE(used.size() == used_again.size());
    for (std::size_t i = 0; i < used.size(); ++i) {
        CHECK(used[i].instance.id == used_again[i].instance.id);
    }
    const auto different = balance_and_cap(demos, caps, 6);
    bool same = used.size() == different.size();
    if (same) {
        for (std::size_t i = 0; i < used.size(); ++i) {
            same = same && used[i].instance.id == different[i].instance.id;
        }
    }
    CHECK_FALSE(same);
}

TEST_CASE("export writes targets that re-parse to the source trace") {
    Corpus corpus;
    for (int i = 1; i <= 5; ++i) {
        corpus.add({"d" + std::to_string(i), "t", "body " + std::to_string(i)});
    }
    std::vector<Demonstration> demos = {survivor("e1", Task::nq, "first gold"),
                                        survivor("e2", Task::triviaqa, "second gold")};

    const fs::path path = fs::temp_directory_path() / "sft_test.jsonl";
    const auto summary = export_sft(demos, corpus, path);
    CHECK(summary.records == 2);

    const auto records = read_jsonl(path);
    REQUIRE(records.size() == 2);
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& rec = records[i];
        const std::string target = rec.at("target").get<std::string>();
        const std::string answer = demos[i].trace->answer;
        REQUIRE(target.size() >= answer.size() + 9);
        CHECK(target.substr(target.size() - answer.size() - 9) == "#Answer: " + answer);

        const auto reparsed = parse_trace(target, 5);
        REQUIRE(is_trace(reparsed));
        CHECK(get_trace(reparsed).explanation == demos[i].trace->explanation);
        CHECK(get_trace(reparsed).answer == demos[i].trace->answer);

        const auto& defaults = rec.at("meta").at("trainer_defaults");
        CHECK(defaults.at("epochs") == 3);
        CHECK(defaults.at("batch_size") == 32);
        CHECK(defaults.at("learning_rate").get<double>() == doctest::Approx(3e-5));
        CHECK(defaults.at("weight_decay").get<double>() == doctest::Approx(0.001));
        CHECK(defaults.at("schedule") == "cosine");
        CHECK(defaults.at("warmup_ratio").get<double>() == doctest::Approx(0.03));

        const std::string input = rec.at("input").get<std::string>();
        CHECK(input.find("#Reference Documents") != std::string::npos);
        CHECK(input.find(demos[i].instance.question) != std::string::npos);
    }
}

TEST_CASE("export refuses unfiltered demos unless forced") {
    Corpus corpus;
    for (int i = 1; i <= 5; ++i) {
        corpus.add({"d" + std::to_string(i), "t", "body " + std::to_string(i)});
    }
    auto demo = survivor("e1", Task::nq, "gold");
    demo.stage2_pass = false;
    const fs::path path = fs::temp_directory_path() / "sft_force_test.jsonl";
    CHECK_THROWS_AS(export_sft({demo}, corpus, path), Error);

    ExportOptions options;
    options.force = true;
    CHECK(export_sft({demo}, corpus, path, options).records == 1);
}

TEST_CASE("misleading corruption never strict-matches its own gold") {
    std::vector<Demonstration> demos;
    for (int i = 0; i < 30; ++i) {
        demos.push_back(
            survivor("m" + std::to_string(i), Task::popqa, "gold " + std::to_string(i)));
    }
    const auto corrupted = corrupt_to_misleading(demos, CorruptionMode::misleading, 11);
    REQUIRE(corrupted.size() == demos.size());
    for (const auto& demo : corrupted) {
        CHECK(demo.provenance == Provenance::misleading);
        CHECK_FALSE(demo.stage1_pass);
        CHECK_FALSE(demo.stage2_pass);
        CHECK_FALSE(strict_match(demo.trace->answer, demo.instance.gold_answers));
    }
    // Re-running the strict filter agrees: zero survivors.
    const auto refiltered = filter_exact_match(corrupted);
    for (const auto& demo : refiltered) CHECK_FALSE(demo.stage1_pass);
}

TEST_CASE("mixed corruption hits exactly half, deterministically") {
    std::vector<Demonstration> demos;
    for (int i = 0; i < 100; ++i) {
        demos.push_back(
            survivor("x" + std::to_string(i), Task::triviaqa, "gold " + std::to_string(i)));
    }
    const auto mixed = corrupt_to_misleading(demos, CorruptionMode::mixed, 3);
    int corrupted = 0;
    for (const auto& demo : mixed) {
        corrupted += demo.provenance == Provenance::misleading ? 1 : 0;
    }
    CHECK(corrupted == 50);

    const auto again = corrupt_to_misleading(demos, CorruptionMode::mixed, 3);
    for (std::size_t i = 0; i < mixed.size(); ++i) {
        CHECK((mixed[i].provenance == Provenance::misleading) ==
              (again[i].provenance == Provenance::misleading));
        CHECK(mixed[i].trace->answer == again[i].trace->answer);
    }
}

TEST_CASE("corruption requires stage-2 survivors") {
    auto demo = survivor("x", Task::nq, "g");
    demo.stage2_pass = false;
    CHECK_THROWS_AS(corrupt_to_misleading({demo}, CorruptionMode::misleading, 1), Error);
}

TEST_CASE("funnel stats stay monotone and split by task") {
    std::vector<Demonstration> demos;
    for (int i = 0; i < 20; ++i) {
        auto demo = make_demonstration(instance("f" + std::to_string(i), Task::nq, "g"), {},
                                       trace_text(i < 12 ? "g" : "w", i < 8), 5);
        demos.push_back(std::move(demo));
    }
    demos = filter_citation_coverage(filter_exact_match(std::move(demos)), 5);
    const auto used = balance_and_cap(demos, {{Task::nq, 5}}, 1);
    const auto stats = funnel_report(demos, used);
    CHECK(stats.total == 20);
    CHECK(stats.stage1_survivors == 12);
    CHECK(stats.stage2_survivors == 8);
    CHECK(stats.used == 5);
    CHECK(stats.total >= stats.stage1_survivors);
    CHECK(stats.stage1_survivors >= stats.stage2_survivors);
    CHECK(stats.stage2_survivors >= stats.used);
    CHECK(stats.per_task.at(Task::nq).total == 20);

    const auto all_fail = funnel_report(filter_citation_coverage(
        filter_exact_match({make_demonstration(instance("z", Task::nq, "g"), {},
                                               trace_text("wrong"), 5)}), 5), {});
    CHECK(all_fail.total == 1);
    CHECK(all_fail.stage1_survivors == 0);
    CHECK(all_fail.stage2_survivors == 0);
    CHECK(all_fail.used == 0);
}

TEST_CASE("demonstration jsonl round trip") {
    const auto demo = survivor("rt", Task::fever, "SUPPORTS");
    const fs::path path = fs::temp_directory_path() / "demos_rt.jsonl";
    save_demos_jsonl(path, {demo}, "fp123");
    const auto loaded = load_demos_jsonl(path);
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0].instance.id == "rt");
    CHECK(loaded[0].instance.task == Task::fever);
    CHECK(loaded[0].stage2_pass);
    CHECK(loaded[0].trace->answer == demo.trace->answer);
}
