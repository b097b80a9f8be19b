#include "crag/demos.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "crag/error.hpp"
#include "crag/jsonl.hpp"
#include "crag/rng.hpp"
#include "crag/text.hpp"

namespace crag {

const char* to_string(Task task) {
    switch (task) {
        case Task::nq: return "nq";
        case Task::popqa: return "popqa";
        case Task::triviaqa: return "triviaqa";
        case Task::fever: return "fever";
    }
    return "nq";
}

std::optional<Task> task_from_string(std::string_view name) {
    if (name == "nq") return Task::nq;
    if (name == "popqa") return Task::popqa;
    if (name == "triviaqa") return Task::triviaqa;
    if (name == "fever") return Task::fever;
    return std::nullopt;
}

const std::vector<Task>& all_tasks() {
    static const std::vector<Task> tasks = {Task::nq, Task::popqa, Task::triviaqa, Task::fever};
    return tasks;
}

std::vector<QaInstance> load_dataset_jsonl(const std::filesystem::path& path) {
    std::vector<QaInstance> out;
    std::set<std::string> seen_ids;
    for_each_jsonl(path, [&](std::size_t line_no, const nlohmann::json& obj) {
        const std::string where = path.string() + ":" + std::to_string(line_no);
        if (!obj.is_object() || !obj.contains("id") || !obj.contains("question") ||
            !obj.contains("answers") || !obj.contains("task")) {
            throw Error(where + ": expected {\"id\", \"question\", \"answers\", \"task\"}");
        }
        QaInstance inst;
        inst.id = obj.at("id").get<std::string>();
        inst.question = obj.at("question").get<std::string>();
        for (const auto& a : obj.at("answers")) inst.gold_answers.push_back(a.get<std::string>());
        const std::string task_name = obj.at("task").get<std::string>();
        const auto task = task_from_string(task_name);
        if (!task) throw Error(where + ": unknown task \"" + task_name + "\"");
        inst.task = *task;

        if (inst.id.empty()) throw Error(where + ": empty instance id");
        if (!seen_ids.insert(inst.id).second) {
            throw Error(where + ": duplicate instance id \"" + inst.id + "\"");
        }
        if (inst.gold_answers.empty()) throw Error(where + ": empty answers list");
        if (inst.task == Task::fever) {
            if (inst.gold_answers.size() != 1 ||
                std::find(kFeverLabels.begin(), kFeverLabels.end(), inst.gold_answers[0]) ==
                    kFeverLabels.end()) {
                throw Error(where +
                            ": fever instances need a single gold label from "
                            "{SUPPORTS, REFUTES, NOT ENOUGH INFO}");
            }
        }
        out.push_back(std::move(inst));
    });
    return out;
}

Demonstration make_demonstration(QaInstance instance, std::vector<std::string> doc_order,
                                 std::string_view completion_text, int k) {
    Demonstration demo;
    demo.instance = std::move(instance);
    demo.doc_order = std::move(doc_order);
    ParseResult parsed = parse_trace(completion_text, k);
    if (is_trace(parsed)) {
        demo.trace = std::get<CragTrace>(std::move(parsed));
    } else {
        demo.parse_error = get_error(parsed);
    }
    return demo;
}

std::vector<Demonstration> generate_demonstrations(const std::vector<QaInstance>& dataset,
                                                   const RetrievalSource& retrieval,
                                                   Backend& backend,
                                                   const DemoGenOptions& options) {
    if (dataset.empty()) throw Error("dataset is empty");

    const int k = retrieval.cfg.top_k;
    std::vector<RenderedPrompt> prompts;
    std::vector<std::optional<std::string>> retrieval_errors(dataset.size());
    std::vector<std::vector<std::string>> doc_orders(dataset.size());
    prompts.reserve(dataset.size());

    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const QaInstance& inst = dataset[i];
        try {
            const auto docs = retrieval.top_docs(inst.question, inst.id);
            RenderedPrompt prompt = render_crag(inst.question, docs, options.prompt);
            doc_orders[i] = prompt.doc_order;
            prompts.push_back(std::move(prompt));
        } catch (const std::exception& e) {
            retrieval_errors[i] = e.what();
            prompts.push_back(RenderedPrompt{PromptFamily::crag, "", {}});
        }
    }

    const auto results =
        batch_generate(prompts, options.params, backend, options.parallelism, options.retry);

    std::vector<Demonstration> demos;
    demos.reserve(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (retrieval_errors[i]) {
            Demonstration demo;
            demo.instance = dataset[i];
            demo.generation_error = retrieval_errors[i];
            demos.push_back(std::move(demo));
            continue;
        }
        if (!results[i].ok()) {
            Demonstration demo;
            demo.instance = dataset[i];
            demo.doc_order = doc_orders[i];
            demo.generation_error = results[i].error;
            demos.push_back(std::move(demo));
            continue;
        }
        demos.push_back(
            make_demonstration(dataset[i], doc_orders[i], results[i].completion->text, k));
    }
    return demos;
}

bool strict_match(std::string_view answer, const std::vector<std::string>& gold_answers) {
    const std::string normalized = strict_normalize(answer);
    for (const auto& gold : gold_answers) {
        if (normalized == strict_normalize(gold)) return true;
    }
    return false;
}

std::vector<Demonstration> filter_exact_match(std::vector<Demonstration> demos) {
    for (auto& demo : demos) {
        demo.stage1_pass =
            demo.parsed() && strict_match(demo.trace->answer, demo.instance.gold_answers);
        if (!demo.stage1_pass) demo.stage2_pass = false;
    }
    return demos;
}

std::vector<Demonstration> filter_citation_coverage(std::vector<Demonstration> demos, int k) {
    if (k < 1) throw Error("k must be >= 1");
    for (auto& demo : demos) {
        demo.stage2_pass = false;
        if (!demo.stage1_pass || !demo.parsed()) continue;
        if (demo.trace->reference_evidence.empty()) continue;
        const auto cited = cited_documents(*demo.trace);
        bool full = true;
        for (int i = 1; i <= k; ++i) {
            if (cited.count(i) == 0) {
                full = false;
                break;
            }
        }
        demo.stage2_pass = full;
    }
    return demos;
}

std::map<Task, int> default_caps() {
    return {{Task::nq, 515}, {Task::popqa, 500}, {Task::triviaqa, 500}, {Task::fever, 485}};
}

std::vector<Demonstration> balance_and_cap(const std::vector<Demonstration>& demos,
                                           const std::map<Task, int>& caps, std::uint64_t seed) {
    std::map<Task, std::vector<std::size_t>> survivors_by_task;
    for (std::size_t i = 0; i < demos.size(); ++i) {
        if (demos[i].stage2_pass) survivors_by_task[demos[i].instance.task].push_back(i);
    }

    std::set<std::size_t> selected;
    for (auto& [task, indices] : survivors_by_task) {
        const auto cap_it = caps.find(task);
        const std::size_t cap =
            cap_it == caps.end() ? indices.size()
                                 : static_cast<std::size_t>(std::max(cap_it->second, 0));
        DetRng rng(mix_seed(seed, to_string(task)));
        const auto chosen = rng.sample(indices, std::min(cap, indices.size()));
        selected.insert(chosen.begin(), chosen.end());
    }

    std::vector<Demonstration> out;
    out.reserve(selected.size());
    for (std::size_t i = 0; i < demos.size(); ++i) {
        if (selected.count(i) != 0) out.push_back(demos[i]);
    }
    return out;
}

nlohmann::json trainer_defaults_json(const TrainerDefaults& defaults) {
    return nlohmann::json{{"epochs", defaults.epochs},
                          {"batch_size", defaults.batch_size},
                          {"learning_rate", defaults.learning_rate},
                          {"weight_decay", defaults.weight_decay},
                          {"schedule", defaults.schedule},
                          {"warmup_ratio", defaults.warmup_ratio}};
}

ExportSummary export_sft(const std::vector<Demonstration>& demos, const Corpus& corpus,
                         const std::filesystem::path& path, const ExportOptions& options) {
    std::vector<nlohmann::json> records;
    records.reserve(demos.size());
    for (const auto& demo : demos) {
        if (!demo.stage2_pass && !options.force) {
            throw Error("demonstration \"" + demo.instance.id +
                        "\" did not pass both filters; use force to export anyway");
        }
        if (!demo.parsed()) {
            throw Error("demonstration \"" + demo.instance.id +
                        "\" has no parsed trace to export");
        }
        const auto docs = corpus.resolve(demo.doc_order);
        const RenderedPrompt prompt =
            render_crag(demo.instance.question, docs, options.prompt);

        nlohmann::json meta{{"task", to_string(demo.instance.task)},
                            {"provenance",
                             demo.provenance == Provenance::clean ? "clean" : "misleading"},
                            {"question_id", demo.instance.id},
                            {"trainer_defaults", trainer_defaults_json()}};
        if (!options.config_fingerprint.empty()) {
            meta["config_fingerprint"] = options.config_fingerprint;
        }
        records.push_back(nlohmann::json{{"input", prompt.text},
                                         {"target", serialize_trace(*demo.trace)},
                                         {"meta", std::move(meta)}});
    }
    write_jsonl(path, records);
    return ExportSummary{static_cast<int>(records.size()), path};
}

std::vector<Demonstration> corrupt_to_misleading(const std::vector<Demonstration>& demos,
                                                 CorruptionMode mode, std::uint64_t seed) {
    for (const auto& demo : demos) {
        if (!demo.stage2_pass || !demo.parsed()) {
            throw Error("corruption expects stage-2 surviving demonstrations; \"" +
                        demo.instance.id + "\" is not one");
        }
    }

    DetRng rng(seed);
    std::set<std::size_t> to_corrupt;
    if (mode == CorruptionMode::misleading) {
        for (std::size_t i = 0; i < demos.size(); ++i) to_corrupt.insert(i);
    } else {
        std::vector<std::size_t> indices(demos.size());
        std::iota(indices.begin(), indices.end(), 0);
        const auto chosen = rng.sample(std::move(indices), demos.size() / 2);
        to_corrupt.insert(chosen.begin(), chosen.end());
    }

    std::vector<Demonstration> out = demos;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (to_corrupt.count(i) == 0) continue;
        Demonstration& demo = out[i];

        // Donor gold answers from other instances of the same task that do
        // not strictly match any of this instance's golds.
        std::vector<std::string> candidates;
        for (std::size_t j = 0; j < demos.size(); ++j) {
            if (j == i || demos[j].instance.task != demo.instance.task) continue;
            for (const auto& gold : demos[j].instance.gold_answers) {
                if (!strict_match(gold, demo.instance.gold_answers)) candidates.push_back(gold);
            }
        }
        if (candidates.empty()) {
            throw Error("no misleading answer available for \"" + demo.instance.id +
                        "\": every same-task gold matches its own");
        }
        std::sort(candidates.begin(), candidates.end());
        candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

        demo.trace->answer = candidates[rng.bounded(candidates.size())];
        demo.trace->raw = serialize_trace(*demo.trace);
        demo.provenance = Provenance::misleading;
        demo.stage1_pass = false;
        demo.stage2_pass = false;
    }
    return out;
}

FunnelStats funnel_report(const std::vector<Demonstration>& all,
                          const std::vector<Demonstration>& used) {
    FunnelStats stats;
    for (Task task : all_tasks()) stats.per_task[task] = TaskFunnel{};
    for (const auto& demo : all) {
        TaskFunnel& t = stats.per_task[demo.instance.task];
        ++stats.total;
        ++t.total;
        if (demo.stage1_pass) {
            ++stats.stage1_survivors;
            ++t.stage1;
        }
        if (demo.stage2_pass) {
            ++stats.stage2_survivors;
            ++t.stage2;
        }
    }
    for (const auto& demo : used) {
        ++stats.used;
        ++stats.per_task[demo.instance.task].used;
    }
    return stats;
}

nlohmann::json funnel_to_json(const FunnelStats& stats) {
    nlohmann::json per_task = nlohmann::json::object();
    for (const auto& [task, t] : stats.per_task) {
        per_task[to_string(task)] = {{"total", t.total},
                                     {"stage1", t.stage1},
                                     {"stage2", t.stage2},
                                     {"used", t.used}};
    }
    return nlohmann::json{{"total", stats.total},
                          {"stage1", stats.stage1_survivors},
                          {"stage2", stats.stage2_survivors},
                          {"used", stats.used},
                          {"per_task", std::move(per_task)}};
}

nlohmann::json demo_to_json(const Demonstration& demo) {
    nlohmann::json obj{{"id", demo.instance.id},
                       {"question", demo.instance.question},
                       {"answers", demo.instance.gold_answers},
                       {"task", to_string(demo.instance.task)},
                       {"doc_order", demo.doc_order},
                       {"stage1_pass", demo.stage1_pass},
                       {"stage2_pass", demo.stage2_pass},
                       {"provenance",
                        demo.provenance == Provenance::clean ? "clean" : "misleading"}};
    obj["trace"] = demo.trace ? trace_to_json(*demo.trace, demo.instance.id)
                              : nlohmann::json(nullptr);
    obj["parse_error"] =
        demo.parse_error ? parse_error_to_json(*demo.parse_error) : nlohmann::json(nullptr);
    if (demo.generation_error) obj["generation_error"] = *demo.generation_error;
    return obj;
}

Demonstration demo_from_json(const nlohmann::json& obj) {
    Demonstration demo;
    demo.instance.id = obj.at("id").get<std::string>();
    demo.instance.question = obj.at("question").get<std::string>();
    for (const auto& a : obj.at("answers")) {
        demo.instance.gold_answers.push_back(a.get<std::string>());
    }
    const auto task = task_from_string(obj.at("task").get<std::string>());
    if (!task) throw Error("unknown task in demonstration record");
    demo.instance.task = *task;
    for (const auto& d : obj.at("doc_order")) demo.doc_order.push_back(d.get<std::string>());
    if (obj.contains("trace") && !obj.at("trace").is_null()) {
        demo.trace = trace_from_json(obj.at("trace"));
    }
    if (obj.contains("parse_error") && !obj.at("parse_error").is_null()) {
        demo.parse_error = parse_error_from_json(obj.at("parse_error"));
    }
    if (obj.contains("generation_error")) {
        demo.generation_error = obj.at("generation_error").get<std::string>();
    }
    demo.stage1_pass = obj.value("stage1_pass", false);
    demo.stage2_pass = obj.value("stage2_pass", false);
    demo.provenance = obj.value("provenance", std::string("clean")) == "misleading"
                          ? Provenance::misleading
                          : Provenance::clean;
    return demo;
}

void save_demos_jsonl(const std::filesystem::path& path,
                      const std::vector<Demonstration>& demos,
                      std::string_view config_fingerprint) {
    std::vector<nlohmann::json> records;
    records.reserve(demos.size());
    for (const auto& demo : demos) {
        nlohmann::json obj = demo_to_json(demo);
        if (!config_fingerprint.empty()) {
            obj["config_fingerprint"] = std::string(config_fingerprint);
        }
        records.push_back(std::move(obj));
    }
    write_jsonl(path, records);
}

std::vector<Demonstration> load_demos_jsonl(const std::filesystem::path& path) {
    std::vector<Demonstration> demos;
    for_each_jsonl(path, [&](std::size_t, const nlohmann::json& obj) {
        demos.push_back(demo_from_json(obj));
    });
    return demos;
}

}  // namespace crag
