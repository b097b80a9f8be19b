#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "crag/corpus.hpp"
#include "crag/gateway.hpp"
#include "crag/prompts.hpp"
#include "crag/retriever.hpp"
#include "crag/trace.hpp"

namespace crag {

enum class Task { nq, popqa, triviaqa, fever };

const char* to_string(Task task);
std::optional<Task> task_from_string(std::string_view name);
const std::vector<Task>& all_tasks();

inline const std::vector<std::string> kFeverLabels = {"SUPPORTS", "REFUTES", "NOT ENOUGH INFO"};

struct QaInstance {
    std::string id;
    std::string question;
    std::vector<std::string> gold_answers;
    Task task = Task::nq;
};

/// Dataset file: JSON Lines {"id", "question", "answers": [..], "task"}.
/// FEVER instances must carry a single gold label from kFeverLabels.
std::vector<QaInstance> load_dataset_jsonl(const std::filesystem::path& path);

enum class Provenance { clean, misleading };

/// One generated training candidate. stage2_pass implies stage1_pass;
/// misleading provenance implies stage1_pass == false by construction.
struct Demonstration {
    QaInstance instance;
    std::vector<std::string> doc_order;  // document ids as shown in the prompt
    std::optional<CragTrace> trace;      // unset when the completion did not parse
    std::optional<ParseError> parse_error;
    std::optional<std::string> generation_error;  // retrieval/backend failure, if any
    bool stage1_pass = false;
    bool stage2_pass = false;
    Provenance provenance = Provenance::clean;

    bool parsed() const { return trace.has_value(); }
};

/// Builds a demonstration from a raw completion: parse failures are recorded
/// rather than raised, so annotation batches stay total.
Demonstration make_demonstration(QaInstance instance, std::vector<std::string> doc_order,
                                 std::string_view completion_text, int k);

struct TaskFunnel {
    int total = 0;
    int stage1 = 0;
    int stage2 = 0;
    int used = 0;
};

struct FunnelStats {
    int total = 0;
    int stage1_survivors = 0;
    int stage2_survivors = 0;
    int used = 0;
    std::map<Task, TaskFunnel> per_task;
};

struct DemoGenOptions {
    GenerationParams params;
    PromptOptions prompt;
    int parallelism = 1;
    RetryPolicy retry;
};

/// Retrieves, prompts, generates, and parses one demonstration per instance.
/// Parse failures are recorded (both filter flags false); the batch never
/// aborts on per-item errors.
std::vector<Demonstration> generate_demonstrations(const std::vector<QaInstance>& dataset,
                                                   const RetrievalSource& retrieval,
                                                   Backend& backend,
                                                   const DemoGenOptions& options);

/// Normalization for the strict stage-1 filter; exposed for the tests'
/// independent recomputation.
bool strict_match(std::string_view answer, const std::vector<std::string>& gold_answers);

/// Stage 1: strict exact match of the trace answer against any gold answer.
std::vector<Demonstration> filter_exact_match(std::vector<Demonstration> demos);

/// Stage 2: stage-1 survivors whose trace cites every document 1..k and has
/// non-empty reference evidence.
std::vector<Demonstration> filter_citation_coverage(std::vector<Demonstration> demos, int k);

/// Per-task caps from the published data-composition table.
std::map<Task, int> default_caps();

/// Seeded uniform per-task subsample of stage-2 survivors, up to each cap.
std::vector<Demonstration> balance_and_cap(const std::vector<Demonstration>& demos,
                                           const std::map<Task, int>& caps, std::uint64_t seed);

/// Fine-tuning settings recorded in every export record.
struct TrainerDefaults {
    int epochs = 3;
    int batch_size = 32;
    double learning_rate = 3e-5;
    double weight_decay = 0.001;
    std::string schedule = "cosine";
    double warmup_ratio = 0.03;
};

nlohmann::json trainer_defaults_json(const TrainerDefaults& defaults = {});

struct ExportOptions {
    bool force = false;  // export demos that did not pass both filters
    PromptOptions prompt;
    std::string config_fingerprint;
};

struct ExportSummary {
    int records = 0;
    std::filesystem::path path;
};

/// Writes JSON Lines {"input": prompt, "target": four-stage trace ending in
/// "#Answer: ...", "meta": {task, provenance, trainer_defaults, ...}}.
ExportSummary export_sft(const std::vector<Demonstration>& demos, const Corpus& corpus,
                         const std::filesystem::path& path, const ExportOptions& options = {});

enum class CorruptionMode { misleading, mixed };

/// Builds the misleading/mixed demonstration sets: answers are replaced with
/// a seeded gold answer from a different instance of the same task.
/// misleading corrupts every demo; mixed corrupts a seeded half.
std::vector<Demonstration> corrupt_to_misleading(const std::vector<Demonstration>& demos,
                                                 CorruptionMode mode, std::uint64_t seed);

/// Filter funnel counts. `used` is the balanced subsample actually exported.
FunnelStats funnel_report(const std::vector<Demonstration>& all,
                          const std::vector<Demonstration>& used);

nlohmann::json funnel_to_json(const FunnelStats& stats);

nlohmann::json demo_to_json(const Demonstration& demo);
Demonstration demo_from_json(const nlohmann::json& obj);
void save_demos_jsonl(const std::filesystem::path& path,
                      const std::vector<Demonstration>& demos,
                      std::string_view config_fingerprint = "");
std::vector<Demonstration> load_demos_jsonl(const std::filesystem::path& path);

}  // namespace crag
