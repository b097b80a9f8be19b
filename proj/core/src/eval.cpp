#include "crag/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "crag/error.hpp"
#include "crag/rng.hpp"
#include "crag/text.hpp"

namespace crag {

namespace {

bool has_token(const std::vector<std::string>& tokens, std::string_view word) {
    return std::find(tokens.begin(), tokens.end(), word) != tokens.end();
}

bool has_prefix_token(const std::vector<std::string>& tokens, std::string_view prefix) {
    for (const auto& t : tokens) {
        if (t.size() >= prefix.size() && std::string_view(t).substr(0, prefix.size()) == prefix) {
            return true;
        }
    }
    return false;
}

bool contains_phrase(const std::string& normalized, std::string_view phrase) {
    return normalized.find(phrase) != std::string::npos;
}

}  // namespace

const char* to_string(PerturbationKind kind) {
    switch (kind) {
        case PerturbationKind::none: return "none";
        case PerturbationKind::shuffle: return "shuffle";
        case PerturbationKind::noise: return "noise";
    }
    return "none";
}

std::optional<PerturbationKind> perturbation_kind_from_string(std::string_view name) {
    if (name == "none") return PerturbationKind::none;
    if (name == "shuffle") return PerturbationKind::shuffle;
    if (name == "noise") return PerturbationKind::noise;
    return std::nullopt;
}

bool flexible_exact_match(std::string_view prediction,
                          const std::vector<std::string>& gold_answers) {
    const std::string pred = flexible_normalize(prediction);
    for (const auto& gold : gold_answers) {
        const std::string g = drop_leading_article(flexible_normalize(gold));
        if (!g.empty() && pred.find(g) != std::string::npos) return true;
    }
    return false;
}

const char* to_string(FeverLabel label) {
    switch (label) {
        case FeverLabel::supports: return "SUPPORTS";
        case FeverLabel::refutes: return "REFUTES";
        case FeverLabel::not_enough_info: return "NOT ENOUGH INFO";
        case FeverLabel::unmappable: return "UNMAPPABLE";
    }
    return "UNMAPPABLE";
}

FeverLabel map_fever_prediction(std::string_view prediction) {
    const std::string normalized = flexible_normalize(prediction);
    const auto tokens = tokenize(normalized);

    for (std::string_view phrase :
         {"not enough info", "not enough information", "insufficient information",
          "insufficient evidence", "cannot be verified", "cannot verify", "not verifiable"}) {
        if (contains_phrase(normalized, phrase)) return FeverLabel::not_enough_info;
    }
    if (has_token(tokens, "unverifiable") || has_token(tokens, "nei")) {
        return FeverLabel::not_enough_info;
    }

    for (std::string_view phrase : {"not supported", "does not support", "not true"}) {
        if (contains_phrase(normalized, phrase)) return FeverLabel::refutes;
    }
    if (has_prefix_token(tokens, "refut") || has_token(tokens, "false") ||
        has_token(tokens, "incorrect") || has_token(tokens, "untrue") ||
        has_token(tokens, "no")) {
        return FeverLabel::refutes;
    }

    if (has_prefix_token(tokens, "support") || has_token(tokens, "true") ||
        has_token(tokens, "correct") || has_token(tokens, "yes") ||
        has_token(tokens, "accurate")) {
        return FeverLabel::supports;
    }
    return FeverLabel::unmappable;
}

bool fever_match(std::string_view prediction, std::string_view gold_label) {
    const std::string gold = to_lower(trim(gold_label));
    FeverLabel expected;
    if (gold == "supports") expected = FeverLabel::supports;
    else if (gold == "refutes") expected = FeverLabel::refutes;
    else if (gold == "not enough info") expected = FeverLabel::not_enough_info;
    else throw Error("invalid FEVER gold label \"" + std::string(gold_label) + "\"");
    return map_fever_prediction(prediction) == expected;
}

std::vector<Document> perturb_shuffle(std::vector<Document> docs, std::uint64_t seed) {
    DetRng rng(seed);
    rng.shuffle(docs);
    return docs;
}

std::vector<Document> perturb_noise(const std::vector<Document>& docs,
                                    const std::vector<Document>& distractors,
                                    const PerturbationSpec& spec) {
    std::set<std::string> doc_ids;
    for (const auto& d : docs) doc_ids.insert(d.id);
    for (const auto& d : distractors) {
        if (doc_ids.count(d.id) != 0) {
            throw Error("distractor \"" + d.id + "\" overlaps the retrieved documents");
        }
    }

    DetRng rng(spec.seed);
    if (spec.fraction_mode) {
        const std::size_t replace = (docs.size() + 1) / 2;  // ceil(k/2)
        if (distractors.size() < replace) {
            throw Error("need " + std::to_string(replace) + " distractors, have " +
                        std::to_string(distractors.size()));
        }
        std::vector<std::size_t> positions(docs.size());
        for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
        const auto chosen = rng.sample(std::move(positions), replace);
        std::vector<Document> out = docs;
        for (std::size_t i = 0; i < chosen.size(); ++i) out[chosen[i]] = distractors[i];
        return out;
    }

    if (spec.noise_count <= 0) return docs;
    const auto count = static_cast<std::size_t>(spec.noise_count);
    if (distractors.size() < count) {
        throw Error("need " + std::to_string(count) + " distractors, have " +
                    std::to_string(distractors.size()));
    }
    std::vector<Document> out = docs;
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t pos = rng.bounded(out.size() + 1);
        out.insert(out.begin() + static_cast<std::ptrdiff_t>(pos), distractors[i]);
    }
    return out;
}

EvalReport evaluate(const std::vector<QaInstance>& dataset, const RetrievalSource& retrieval,
                    Backend& backend, const EvalOptions& options) {
    if (dataset.empty()) throw Error("dataset is empty");

    std::vector<RenderedPrompt> prompts;
    std::vector<std::size_t> prompt_owner;  // prompts index -> dataset index
    std::vector<std::optional<std::string>> item_errors(dataset.size());

    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const QaInstance& inst = dataset[i];
        try {
            std::vector<Document> docs;
            if (options.family != PromptFamily::baseline) {
                docs = retrieval.top_docs(inst.question, inst.id);
                const std::uint64_t item_seed =
                    mix_seed(options.perturbation.seed, inst.id);
                if (options.perturbation.kind == PerturbationKind::shuffle) {
                    docs = perturb_shuffle(std::move(docs), item_seed);
                } else if (options.perturbation.kind == PerturbationKind::noise) {
                    if (retrieval.index == nullptr) {
                        throw Error("noise perturbation needs a lexical index for distractors");
                    }
                    const std::size_t need =
                        options.perturbation.fraction_mode
                            ? (docs.size() + 1) / 2
                            : static_cast<std::size_t>(
                                  std::max(options.perturbation.noise_count, 0));
                    const auto distractors = retrieval.index->sample_distractors(
                        inst.question, need,
                        static_cast<std::size_t>(options.perturbation.exclusion_depth),
                        item_seed);
                    PerturbationSpec item_spec = options.perturbation;
                    item_spec.seed = item_seed;
                    docs = perturb_noise(docs, distractors, item_spec);
                }
            }
            prompts.push_back(render_prompt(options.family, inst.question, docs, options.prompt));
            prompt_owner.push_back(i);
        } catch (const std::exception& e) {
            item_errors[i] = e.what();
        }
    }

    const auto results =
        batch_generate(prompts, options.params, backend, options.parallelism, options.retry);

    std::vector<std::optional<std::string>> completions(dataset.size());
    for (std::size_t p = 0; p < results.size(); ++p) {
        const std::size_t i = prompt_owner[p];
        if (results[p].ok()) {
            completions[i] = results[p].completion->text;
        } else {
            item_errors[i] = results[p].error;
        }
    }

    EvalReport report;
    report.pipeline = options.family;
    report.perturbation = options.perturbation.kind == PerturbationKind::none
                              ? std::nullopt
                              : std::make_optional(options.perturbation);
    report.config_fingerprint = options.config_fingerprint;
    report.train_task = options.train_task;
    report.seed = options.seed;

    int correct_count = 0;
    std::set<std::string> task_names;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const QaInstance& inst = dataset[i];
        task_names.insert(to_string(inst.task));
        PerItem item;
        item.id = inst.id;
        if (item_errors[i]) {
            item.error = true;
            item.correct = false;
        } else {
            const auto extracted = extract_answer(*completions[i]);
            item.prediction = std::holds_alternative<std::string>(extracted)
                                  ? std::get<std::string>(extracted)
                                  : trim(*completions[i]);
            item.correct = inst.task == Task::fever
                               ? fever_match(item.prediction, inst.gold_answers.front())
                               : flexible_exact_match(item.prediction, inst.gold_answers);
        }
        if (item.correct) ++correct_count;
        report.per_item.push_back(std::move(item));
    }

    report.n = static_cast<int>(report.per_item.size());
    report.accuracy = static_cast<double>(correct_count) / static_cast<double>(report.n);
    report.task = task_names.size() == 1 ? *task_names.begin() : "mixed";
    return report;
}

CrossTaskMatrix cross_task_report(const std::vector<EvalReport>& reports) {
    CrossTaskMatrix matrix;
    if (reports.empty()) return matrix;

    std::set<Task> train_set;
    std::set<Task> eval_set;
    for (const auto& report : reports) {
        if (!report.train_task) {
            throw Error("cross-task matrix needs a train_task tag on every report");
        }
        const auto eval_task = task_from_string(report.task);
        if (!eval_task) {
            throw Error("cross-task matrix needs single-task reports; got \"" + report.task +
                        "\"");
        }
        train_set.insert(*report.train_task);
        eval_set.insert(*eval_task);
    }
    for (Task t : all_tasks()) {
        if (train_set.count(t) != 0) matrix.train_tasks.push_back(t);
        if (eval_set.count(t) != 0) matrix.eval_tasks.push_back(t);
    }
    matrix.accuracy.assign(matrix.train_tasks.size(),
                           std::vector<double>(matrix.eval_tasks.size(),
                                               std::numeric_limits<double>::quiet_NaN()));
    for (const auto& report : reports) {
        const Task train = *report.train_task;
        const Task eval_task = *task_from_string(report.task);
        const auto row = static_cast<std::size_t>(
            std::find(matrix.train_tasks.begin(), matrix.train_tasks.end(), train) -
            matrix.train_tasks.begin());
        const auto col = static_cast<std::size_t>(
            std::find(matrix.eval_tasks.begin(), matrix.eval_tasks.end(), eval_task) -
            matrix.eval_tasks.begin());
        matrix.accuracy[row][col] = report.accuracy;
    }
    return matrix;
}

nlohmann::json report_to_json(const EvalReport& report) {
    nlohmann::json per_item = nlohmann::json::array();
    for (const auto& item : report.per_item) {
        nlohmann::json obj{{"id", item.id},
                           {"prediction", item.prediction},
                           {"correct", item.correct}};
        if (item.error) obj["error"] = true;
        per_item.push_back(std::move(obj));
    }
    nlohmann::json obj{{"task", report.task},
                       {"pipeline", to_string(report.pipeline)},
                       {"n", report.n},
                       {"accuracy", report.accuracy},
                       {"per_item", std::move(per_item)},
                       {"config_fingerprint", report.config_fingerprint},
                       {"seed", report.seed}};
    if (report.perturbation) {
        obj["perturbation"] = {{"kind", to_string(report.perturbation->kind)},
                               {"seed", report.perturbation->seed},
                               {"noise_count", report.perturbation->noise_count},
                               {"fraction_mode", report.perturbation->fraction_mode},
                               {"exclusion_depth", report.perturbation->exclusion_depth}};
    } else {
        obj["perturbation"] = nullptr;
    }
    if (report.train_task) obj["train_task"] = to_string(*report.train_task);
    return obj;
}

nlohmann::json cross_task_to_json(const CrossTaskMatrix& matrix) {
    nlohmann::json rows = nlohmann::json::array();
    nlohmann::json cols = nlohmann::json::array();
    for (Task t : matrix.train_tasks) rows.push_back(to_string(t));
    for (Task t : matrix.eval_tasks) cols.push_back(to_string(t));
    nlohmann::json cells = nlohmann::json::array();
    nlohmann::json in_domain = nlohmann::json::array();
    for (std::size_t r = 0; r < matrix.train_tasks.size(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        nlohmann::json row_domain = nlohmann::json::array();
        for (std::size_t c = 0; c < matrix.eval_tasks.size(); ++c) {
            const double v = matrix.accuracy[r][c];
            if (std::isnan(v)) row.push_back(nullptr);
            else row.push_back(v);
            row_domain.push_back(matrix.in_domain(r, c));
        }
        cells.push_back(std::move(row));
        in_domain.push_back(std::move(row_domain));
    }
    return nlohmann::json{{"train_tasks", std::move(rows)},
                          {"eval_tasks", std::move(cols)},
                          {"accuracy", std::move(cells)},
                          {"in_domain", std::move(in_domain)}};
}

std::string report_table(const EvalReport& report) {
    std::ostringstream out;
    out << "task=" << report.task << " pipeline=" << to_string(report.pipeline)
        << " n=" << report.n << " accuracy=" << report.accuracy;
    if (report.perturbation) {
        out << " perturbation=" << to_string(report.perturbation->kind);
        if (report.perturbation->kind == PerturbationKind::noise) {
            out << (report.perturbation->fraction_mode
                        ? std::string("(fraction)")
                        : "(count=" + std::to_string(report.perturbation->noise_count) + ")");
        }
    }
    int errors = 0;
    for (const auto& item : report.per_item) errors += item.error ? 1 : 0;
    if (errors > 0) out << " errors=" << errors;
    out << " fingerprint=" << report.config_fingerprint;
    out << '\n';
    return out.str();
}

}  // namespace crag
