#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "crag/demos.hpp"
#include "crag/gateway.hpp"
#include "crag/prompts.hpp"
#include "crag/retriever.hpp"

namespace crag {

enum class PerturbationKind { none, shuffle, noise };

const char* to_string(PerturbationKind kind);
std::optional<PerturbationKind> perturbation_kind_from_string(std::string_view name);

/// Retrieval perturbation protocols: Random Shuffle reorders the retrieved
/// documents; Random Noise either inserts `noise_count` irrelevant documents
/// (count mode, the default) or replaces ceil(k/2) of them (fraction mode).
struct PerturbationSpec {
    PerturbationKind kind = PerturbationKind::none;
    std::uint64_t seed = 0;
    int noise_count = 2;
    bool fraction_mode = false;
    int exclusion_depth = 100;  // distractors come from outside this depth
};

/// Flexible exact match: true iff any normalized gold answer is a substring
/// of the normalized prediction. Normalization lowercases, strips
/// punctuation, collapses whitespace, and drops a leading article from the
/// gold side.
bool flexible_exact_match(std::string_view prediction,
                          const std::vector<std::string>& gold_answers);

enum class FeverLabel { supports, refutes, not_enough_info, unmappable };

const char* to_string(FeverLabel label);

/// Maps a free-form prediction onto the three-class scheme via a canonical
/// synonym table; unmappable predictions count as incorrect.
FeverLabel map_fever_prediction(std::string_view prediction);

bool fever_match(std::string_view prediction, std::string_view gold_label);

/// Seeded uniform permutation; the document multiset is unchanged.
std::vector<Document> perturb_shuffle(std::vector<Document> docs, std::uint64_t seed);

/// Count mode inserts spec.noise_count distractors at seeded positions;
/// fraction mode replaces ceil(|docs|/2) seeded positions, preserving length.
std::vector<Document> perturb_noise(const std::vector<Document>& docs,
                                    const std::vector<Document>& distractors,
                                    const PerturbationSpec& spec);

struct PerItem {
    std::string id;
    std::string prediction;
    bool correct = false;
    bool error = false;  // pipeline failure for this item (scored incorrect)
};

struct EvalReport {
    std::string task;  // single task name, or "mixed"
    PromptFamily pipeline = PromptFamily::crag;
    int n = 0;
    double accuracy = 0.0;
    std::vector<PerItem> per_item;
    std::optional<PerturbationSpec> perturbation;
    std::string config_fingerprint;
    std::uint64_t seed = 0;
    std::optional<Task> train_task;  // tag for cross-task matrices
};

struct EvalOptions {
    PromptFamily family = PromptFamily::crag;
    GenerationParams params;
    PromptOptions prompt;
    PerturbationSpec perturbation;
    int parallelism = 1;
    RetryPolicy retry;
    std::uint64_t seed = 0;
    std::string config_fingerprint;
    std::optional<Task> train_task;
};

/// Runs retrieve -> (perturb) -> render -> generate -> extract answer ->
/// score for every instance. Per-item failures are scored incorrect and
/// flagged; the batch always completes.
EvalReport evaluate(const std::vector<QaInstance>& dataset, const RetrievalSource& retrieval,
                    Backend& backend, const EvalOptions& options);

/// Train-task x eval-task accuracy matrix; cells on the diagonal are
/// in-domain. Reports must carry a train_task tag.
struct CrossTaskMatrix {
    std::vector<Task> train_tasks;
    std::vector<Task> eval_tasks;
    std::vector<std::vector<double>> accuracy;  // [train][eval], NaN when absent

    bool in_domain(std::size_t row, std::size_t col) const {
        return train_tasks[row] == eval_tasks[col];
    }
};

CrossTaskMatrix cross_task_report(const std::vector<EvalReport>& reports);

nlohmann::json report_to_json(const EvalReport& report);
nlohmann::json cross_task_to_json(const CrossTaskMatrix& matrix);

/// Human-readable one-line-per-metric table for standard output.
std::string report_table(const EvalReport& report);

}  // namespace crag
