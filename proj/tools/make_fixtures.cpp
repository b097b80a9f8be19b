// Regenerates the deterministic test fixtures:
//   golden/        prompt skeletons rendered with placeholder content
//   e2e50/         50-item corpus + dataset + scripted mock + run config
//   funnel/        10k synthetic annotation records + their document pool
//
// Usage: crag_make_fixtures [output_root]   (default: tests/fixtures)

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crag/bm25.hpp"
#include "crag/corpus.hpp"
#include "crag/demos.hpp"
#include "crag/gateway.hpp"
#include "crag/jsonl.hpp"
#include "crag/prompts.hpp"
#include "crag/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string two_digits(int i) {
    return (i < 10 ? "0" : "") + std::to_string(i);
}

void make_goldens(const fs::path& dir) {
    fs::create_directories(dir);
    std::vector<crag::Document> docs;
    for (int i = 1; i <= 5; ++i) {
        docs.push_back({"doc-" + std::to_string(i), "",
                        "<document-" + std::to_string(i) + ">"});
    }
    crag::write_text_file(dir / "baseline.txt", crag::render_baseline("<question>").text);
    crag::write_text_file(dir / "rag.txt", crag::render_rag("<question>", docs).text);
    crag::write_text_file(dir / "crag.txt", crag::render_crag("<question>", docs).text);
    std::cout << "wrote golden templates to " << dir.string() << "\n";
}

void make_e2e50(const fs::path& dir) {
    fs::create_directories(dir);

    crag::Corpus corpus;
    std::vector<json> corpus_lines;
    for (int i = 0; i < 60; ++i) {
        const std::string id = "e2e-d" + two_digits(i);
        const std::string title = "Topic " + std::to_string(i);
        const std::string body = "Records say fact f" + std::to_string(i) + " holds for city c" +
                                 std::to_string(i) + " since year y" + std::to_string(i) + ".";
        corpus_lines.push_back(json{{"id", id}, {"title", title}, {"text", body}});
        corpus.add({id, title, body});
    }
    crag::write_jsonl(dir / "corpus.jsonl", corpus_lines);

    std::vector<json> dataset_lines;
    std::vector<crag::QaInstance> dataset;
    for (int i = 0; i < 50; ++i) {
        crag::QaInstance inst;
        inst.id = "e2e-q" + two_digits(i);
        inst.question = "what fact holds for city c" + std::to_string(i) + "?";
        inst.gold_answers = {"f" + std::to_string(i)};
        inst.task = crag::Task::nq;
        dataset_lines.push_back(json{{"id", inst.id},
                                     {"question", inst.question},
                                     {"answers", inst.gold_answers},
                                     {"task", "nq"}});
        dataset.push_back(std::move(inst));
    }
    crag::write_jsonl(dir / "dataset.jsonl", dataset_lines);

    // Scripted responses keyed by the fingerprint of the exact prompt the
    // eval pipeline renders: 40 correct answers, every fifth one wrong.
    const auto index = crag::Bm25Index::build(corpus);
    std::vector<json> script_lines;
    for (int i = 0; i < 50; ++i) {
        const auto ranked = index.retrieve(dataset[static_cast<std::size_t>(i)].question,
                                           crag::RetrievalConfig{});
        std::vector<std::string> ids;
        for (const auto& e : ranked.entries) ids.push_back(e.document_id);
        const auto docs = corpus.resolve(ids);
        const auto prompt =
            crag::render_crag(dataset[static_cast<std::size_t>(i)].question, docs);
        const bool correct = i % 5 != 4;
        const std::string answer =
            correct ? "f" + std::to_string(i) : "the documents do not settle this";
        std::string response = "#Reference Evidence:\n";
        for (int d = 1; d <= 5; ++d) {
            response += "[" + std::to_string(d) + "] record " + std::to_string(d) + " near c" +
                        std::to_string(i) + "\n";
        }
        response += "#Analysis:\n";
        for (int d = 1; d <= 5; ++d) {
            response += "[" + std::to_string(d) + "] Passage claims: \"record " +
                        std::to_string(d) + "\" Relevance: " +
                        (d == 1 ? "relevant to the question." : "irrelevant to the question.") +
                        "\n";
        }
        response += "#Explanation: Document 1 carries the fact needed here.\n#Answer: " + answer;
        script_lines.push_back(json{{"fingerprint", crag::prompt_fingerprint(prompt.text)},
                                    {"response", response}});
    }
    crag::write_jsonl(dir / "mock_script.jsonl", script_lines);

    const json config{
        {"corpus", "corpus.jsonl"},
        {"dataset", "dataset.jsonl"},
        {"output_dir", "out"},
        {"retrieval", {{"top_k", 5}, {"scorer", "bm25"}}},
        {"generation",
         {{"temperature", 0.4}, {"max_new_tokens", 2048}, {"decoding", "greedy"}}},
        {"backend",
         {{"kind", "mock"},
          {"script", "mock_script.jsonl"},
          {"default_response", "#Answer: unknown"}}},
        {"prompt", {{"family", "crag"}, {"doc_char_cap", 1500}}},
        {"seed", 7},
        {"parallelism", 2},
    };
    crag::write_text_file(dir / "config.json", config.dump(2) + "\n");
    std::cout << "wrote e2e50 fixture to " << dir.string() << " (hand count: 40/50 correct)\n";
}

// Funnel fixture: per-task record categories matching the published
// data-composition table. Counts per task: {stage-2 valid, correct but
// incomplete citations, wrong answer, unparsable}.
struct TaskPlan {
    crag::Task task;
    int full = 0;      // stage-2 survivors
    int partial = 0;   // stage-1 survivors failing citation coverage
    int wrong = 0;     // parses, wrong answer
    int unparsed = 0;  // no "#Answer:" marker
};

std::string funnel_trace(const std::string& entity, const std::string& answer,
                         bool full_coverage) {
    std::string out = "#Reference Evidence:\n";
    for (int d = 1; d <= 5; ++d) {
        if (!full_coverage && d == 3) continue;
        out += "[" + std::to_string(d) + "] passage p" + std::to_string(d) + " on " + entity +
               "\n";
    }
    out += "#Analysis:\n";
    for (int d = 1; d <= 5; ++d) {
        if (!full_coverage && d == 3) continue;
        const bool rel = d <= 2;
        out += "[" + std::to_string(d) + "] Passage claims: \"passage p" + std::to_string(d) +
               " on " + entity + "\" Relevance: " +
               (rel ? "relevant to the question." : "irrelevant to the question.") + "\n";
    }
    out += "#Explanation: The first two documents settle " + entity +
           " while the rest add nothing.\n";
    out += "#Answer: " + answer;
    return out;
}

void make_funnel(const fs::path& dir) {
    fs::create_directories(dir);

    std::vector<json> corpus_lines;
    std::vector<std::string> pool;
    for (int i = 0; i < 100; ++i) {
        const std::string id = "fd" + two_digits(i);
        pool.push_back(id);
        corpus_lines.push_back(json{{"id", id},
                                    {"title", "Pool document " + std::to_string(i)},
                                    {"text", "shared pool passage number " + std::to_string(i) +
                                                 " used by the annotation set."}});
    }
    crag::write_jsonl(dir / "corpus.jsonl", corpus_lines);

    const std::vector<TaskPlan> plans = {
        {crag::Task::nq, 1100, 800, 550, 50},
        {crag::Task::popqa, 750, 350, 1300, 100},
        {crag::Task::triviaqa, 510, 990, 900, 100},
        {crag::Task::fever, 485, 415, 1500, 100},
    };

    std::vector<json> records;
    records.reserve(10000);
    for (const auto& plan : plans) {
        const std::string task_name = crag::to_string(plan.task);
        const int total = plan.full + plan.partial + plan.wrong + plan.unparsed;

        // Category per index, deterministically spread through the file.
        std::vector<int> category;
        category.insert(category.end(), static_cast<std::size_t>(plan.full), 0);
        category.insert(category.end(), static_cast<std::size_t>(plan.partial), 1);
        category.insert(category.end(), static_cast<std::size_t>(plan.wrong), 2);
        category.insert(category.end(), static_cast<std::size_t>(plan.unparsed), 3);
        crag::DetRng spread(crag::mix_seed(4242, task_name));
        spread.shuffle(category);

        for (int i = 0; i < total; ++i) {
            const std::string id = task_name + "-" + std::to_string(i);
            const std::string entity = "e" + std::to_string(i);

            std::string gold;
            std::string wrong;
            if (plan.task == crag::Task::fever) {
                gold = crag::kFeverLabels[static_cast<std::size_t>(i) % 3];
                wrong = crag::kFeverLabels[static_cast<std::size_t>(i + 1) % 3];
            } else {
                gold = "answer " + task_name + " " + std::to_string(i);
                wrong = "wrong " + task_name + " " + std::to_string(i);
            }

            crag::DetRng doc_rng(crag::mix_seed(7777, id));
            const auto doc_order = doc_rng.sample(pool, 5);

            std::string completion;
            switch (category[static_cast<std::size_t>(i)]) {
                case 0: completion = funnel_trace(entity, gold, true); break;
                case 1: completion = funnel_trace(entity, gold, false); break;
                case 2: completion = funnel_trace(entity, wrong, true); break;
                default:
                    completion = "#Reference Evidence:\n[1] passage p1 on " + entity +
                                 "\n#Explanation: generation cut off before the final";
                    break;
            }

            records.push_back(json{{"id", id},
                                   {"question", "synthetic " + task_name + " question about " +
                                                    entity + "?"},
                                   {"answers", json::array({gold})},
                                   {"task", task_name},
                                   {"doc_order", doc_order},
                                   {"completion", completion}});
        }
    }
    crag::write_jsonl(dir / "annotation_fixture.jsonl", records);
    std::cout << "wrote funnel fixture to " << dir.string() << " (" << records.size()
              << " records; expected funnel 10000/5400/2845/2000)\n";
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::path("tests/fixtures");
    try {
        make_goldens(root / "golden");
        make_e2e50(root / "e2e50");
        make_funnel(root / "funnel");
    } catch (const std::exception& e) {
        std::cerr << "fixture generation failed: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
