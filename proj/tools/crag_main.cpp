#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "crag/config.hpp"
#include "crag/error.hpp"
#include "crag/eval.hpp"
#include "crag/jsonl.hpp"

namespace fs = std::filesystem;

namespace {

struct Overrides {
    std::optional<std::string> corpus;
    std::optional<std::string> dataset;
    std::optional<std::string> demos;
    std::optional<std::string> output_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> top_k;
    std::optional<std::string> family;
    std::optional<int> parallelism;
    std::optional<std::string> backend;
    std::optional<std::string> perturb;
    std::optional<int> noise_count;
    bool fraction_mode = false;
    bool force = false;
    std::optional<std::string> corrupt;
};

void apply_overrides(crag::RunConfig& cfg, const Overrides& o,
                     std::vector<std::string>& errors) {
    if (o.corpus) cfg.corpus = *o.corpus;
    if (o.dataset) cfg.dataset = *o.dataset;
    if (o.demos) cfg.demos_file = *o.demos;
    if (o.output_dir) cfg.output_dir = *o.output_dir;
    if (o.seed) cfg.seed = *o.seed;
    if (o.top_k) {
        cfg.retrieval.top_k = *o.top_k;
        if (*o.top_k < 1) errors.push_back("--top-k: must be >= 1");
    }
    if (o.family) {
        if (auto f = crag::prompt_family_from_string(*o.family)) cfg.family = *f;
        else errors.push_back("--family: must be baseline, rag, or crag");
    }
    if (o.parallelism) {
        cfg.parallelism = *o.parallelism;
        if (*o.parallelism < 1) errors.push_back("--parallelism: must be >= 1");
    }
    if (o.backend) {
        cfg.backend.kind = *o.backend;
        if (*o.backend != "mock" && *o.backend != "http") {
            errors.push_back("--backend: must be mock or http");
        }
    }
    if (o.perturb) {
        if (auto k = crag::perturbation_kind_from_string(*o.perturb)) {
            cfg.perturbation.kind = *k;
        } else {
            errors.push_back("--perturb: must be none, shuffle, or noise");
        }
    }
    if (o.noise_count) {
        cfg.perturbation.noise_count = *o.noise_count;
        if (o.fraction_mode) {
            errors.push_back("--noise-count and --fraction-mode are mutually exclusive");
        }
    }
    if (o.fraction_mode) cfg.perturbation.fraction_mode = true;
    if (o.force) cfg.export_force = true;
    if (o.corrupt) {
        if (*o.corrupt == "misleading") cfg.corrupt = crag::CorruptionMode::misleading;
        else if (*o.corrupt == "mixed") cfg.corrupt = crag::CorruptionMode::mixed;
        else errors.push_back("--corrupt: must be misleading or mixed");
    }
}

struct RunContext {
    crag::RunConfig cfg;
    std::string fingerprint;
    crag::Corpus corpus;
    std::optional<crag::Bm25Index> index;
    std::optional<crag::ExternalRankings> external;
    std::unique_ptr<crag::Backend> backend;

    crag::RetrievalSource retrieval() const {
        crag::RetrievalSource src;
        src.corpus = &corpus;
        src.index = index ? &*index : nullptr;
        src.external = external ? &*external : nullptr;
        src.cfg = cfg.retrieval;
        return src;
    }
};

void require_exists(const fs::path& path, const std::string& what) {
    if (path.empty()) throw crag::Error(what + " path is not configured");
    if (!fs::exists(path)) throw crag::Error(what + " not found: " + path.string());
}

void load_corpus_and_index(RunContext& ctx, bool need_index) {
    require_exists(ctx.cfg.corpus, "corpus");
    ctx.corpus = crag::Corpus::load_jsonl(ctx.cfg.corpus);
    if (ctx.cfg.retrieval.scorer == crag::Scorer::external_adapter) {
        require_exists(*ctx.cfg.rankings, "rankings");
        ctx.external = crag::ExternalRankings::load_jsonl(*ctx.cfg.rankings);
        if (need_index || ctx.cfg.perturbation.kind == crag::PerturbationKind::noise) {
            ctx.index = crag::Bm25Index::build(ctx.corpus);
        }
    } else {
        ctx.index = crag::Bm25Index::build(ctx.corpus);
    }
}

std::unique_ptr<crag::Backend> make_backend(const crag::RunConfig& cfg) {
    if (cfg.backend.kind == "mock") {
        if (cfg.backend.script) {
            require_exists(*cfg.backend.script, "mock script");
            return std::make_unique<crag::MockBackend>(crag::MockBackend::from_script_jsonl(
                *cfg.backend.script, cfg.backend.default_response));
        }
        return std::make_unique<crag::MockBackend>(cfg.backend.default_response);
    }
    crag::HttpBackendOptions options;
    options.base_url = cfg.backend.base_url;
    options.path = cfg.backend.http_path;
    options.model = cfg.backend.model;
    return std::make_unique<crag::HttpBackend>(options);
}

std::vector<crag::QaInstance> load_dataset(const crag::RunConfig& cfg) {
    require_exists(cfg.dataset, "dataset");
    return crag::load_dataset_jsonl(cfg.dataset);
}

fs::path demos_input(const crag::RunConfig& cfg) {
    const fs::path path = cfg.demos_file ? *cfg.demos_file : cfg.output_dir / "demos.jsonl";
    require_exists(path, "demonstrations file");
    return path;
}

void write_json_artifact(const fs::path& path, const nlohmann::json& obj) {
    crag::write_text_file(path, obj.dump(2) + "\n");
    std::cout << "wrote " << path.string() << "\n";
}

int cmd_index(RunContext& ctx) {
    load_corpus_and_index(ctx, true);
    nlohmann::json obj{{"config_fingerprint", ctx.fingerprint},
                       {"seed", ctx.cfg.seed},
                       {"documents", ctx.corpus.size()},
                       {"index", ctx.index->to_json()}};
    fs::create_directories(ctx.cfg.output_dir);
    write_json_artifact(ctx.cfg.output_dir / "index.json", obj);
    std::cout << "indexed " << ctx.corpus.size() << " documents\n";
    return 0;
}

int cmd_retrieve(RunContext& ctx) {
    load_corpus_and_index(ctx, false);
    const auto dataset = load_dataset(ctx.cfg);
    const auto src = ctx.retrieval();

    std::vector<nlohmann::json> lines;
    lines.reserve(dataset.size());
    for (const auto& inst : dataset) {
        const auto ranked = src.rank(inst.question, inst.id);
        nlohmann::json ranking = nlohmann::json::array();
        nlohmann::json scores = nlohmann::json::array();
        for (const auto& entry : ranked.entries) {
            ranking.push_back(entry.document_id);
            scores.push_back(entry.score);
        }
        lines.push_back(nlohmann::json{{"query_id", inst.id},
                                       {"ranking", std::move(ranking)},
                                       {"scores", std::move(scores)},
                                       {"config_fingerprint", ctx.fingerprint}});
    }
    fs::create_directories(ctx.cfg.output_dir);
    const fs::path out = ctx.cfg.output_dir / "rankings.jsonl";
    crag::write_jsonl(out, lines);
    std::cout << "wrote " << out.string() << " (" << lines.size() << " queries)\n";
    return 0;
}

int run_eval(RunContext& ctx, bool perturbed) {
    load_corpus_and_index(ctx, false);
    const auto dataset = load_dataset(ctx.cfg);
    ctx.backend = make_backend(ctx.cfg);

    crag::EvalOptions options;
    options.family = ctx.cfg.family;
    options.params = ctx.cfg.generation;
    options.prompt = ctx.cfg.prompt;
    options.parallelism = ctx.cfg.parallelism;
    options.seed = ctx.cfg.seed;
    options.config_fingerprint = ctx.fingerprint;
    options.perturbation = ctx.cfg.perturbation;
    if (!perturbed) {
        options.perturbation.kind = crag::PerturbationKind::none;
    } else if (options.perturbation.kind == crag::PerturbationKind::none) {
        throw crag::Error("perturb-eval needs perturbation.kind = shuffle or noise");
    }

    const auto report = crag::evaluate(dataset, ctx.retrieval(), *ctx.backend, options);

    fs::create_directories(ctx.cfg.output_dir);
    write_json_artifact(ctx.cfg.output_dir / "report.json", crag::report_to_json(report));
    std::vector<nlohmann::json> audit;
    audit.reserve(report.per_item.size());
    for (const auto& item : report.per_item) {
        nlohmann::json obj{{"id", item.id},
                           {"prediction", item.prediction},
                           {"correct", item.correct},
                           {"config_fingerprint", ctx.fingerprint}};
        if (item.error) obj["error"] = true;
        audit.push_back(std::move(obj));
    }
    crag::write_jsonl(ctx.cfg.output_dir / "per_item.jsonl", audit);
    std::cout << crag::report_table(report);
    return 0;
}

int cmd_gen_demos(RunContext& ctx) {
    load_corpus_and_index(ctx, false);
    const auto dataset = load_dataset(ctx.cfg);
    ctx.backend = make_backend(ctx.cfg);

    crag::DemoGenOptions options;
    options.params = ctx.cfg.generation;
    options.prompt = ctx.cfg.prompt;
    options.parallelism = ctx.cfg.parallelism;

    const auto demos =
        crag::generate_demonstrations(dataset, ctx.retrieval(), *ctx.backend, options);
    fs::create_directories(ctx.cfg.output_dir);
    const fs::path out = ctx.cfg.output_dir / "demos.jsonl";
    crag::save_demos_jsonl(out, demos, ctx.fingerprint);

    int unparsed = 0;
    for (const auto& demo : demos) unparsed += demo.parsed() ? 0 : 1;
    std::cout << "wrote " << out.string() << " (" << demos.size() << " demos, " << unparsed
              << " unparsed)\n";
    return 0;
}

int cmd_filter(RunContext& ctx) {
    auto demos = crag::load_demos_jsonl(demos_input(ctx.cfg));
    demos = crag::filter_exact_match(std::move(demos));
    demos = crag::filter_citation_coverage(std::move(demos), ctx.cfg.retrieval.top_k);
    fs::create_directories(ctx.cfg.output_dir);
    const fs::path out = ctx.cfg.output_dir / "demos_filtered.jsonl";
    crag::save_demos_jsonl(out, demos, ctx.fingerprint);

    const auto stats = crag::funnel_report(demos, {});
    std::cout << "wrote " << out.string() << " (total " << stats.total << ", stage1 "
              << stats.stage1_survivors << ", stage2 " << stats.stage2_survivors << ")\n";
    return 0;
}

int cmd_export(RunContext& ctx) {
    require_exists(ctx.cfg.corpus, "corpus");
    ctx.corpus = crag::Corpus::load_jsonl(ctx.cfg.corpus);
    auto demos = crag::load_demos_jsonl(demos_input(ctx.cfg));

    crag::ExportOptions options;
    options.prompt = ctx.cfg.prompt;
    options.config_fingerprint = ctx.fingerprint;
    options.force = ctx.cfg.export_force;

    std::vector<crag::Demonstration> to_export;
    if (ctx.cfg.corrupt) {
        std::vector<crag::Demonstration> survivors;
        for (auto& demo : demos) {
            if (demo.stage2_pass) survivors.push_back(std::move(demo));
        }
        to_export = crag::corrupt_to_misleading(survivors, *ctx.cfg.corrupt, ctx.cfg.seed);
        options.force = true;  // corrupted records fail stage 1 by construction
    } else {
        for (auto& demo : demos) {
            if (ctx.cfg.export_force || demo.stage2_pass) to_export.push_back(std::move(demo));
        }
    }

    fs::create_directories(ctx.cfg.output_dir);
    const fs::path out = ctx.cfg.output_dir / "sft.jsonl";
    const auto summary = crag::export_sft(to_export, ctx.corpus, out, options);
    write_json_artifact(ctx.cfg.output_dir / "export_summary.json",
                        nlohmann::json{{"records", summary.records},
                                       {"path", summary.path.string()},
                                       {"config_fingerprint", ctx.fingerprint},
                                       {"seed", ctx.cfg.seed},
                                       {"trainer_defaults", crag::trainer_defaults_json()}});
    std::cout << "exported " << summary.records << " records to " << out.string() << "\n";
    return 0;
}

int cmd_funnel(RunContext& ctx) {
    const auto demos = crag::load_demos_jsonl(demos_input(ctx.cfg));
    const auto used = crag::balance_and_cap(demos, ctx.cfg.caps, ctx.cfg.seed);
    const auto stats = crag::funnel_report(demos, used);

    nlohmann::json obj = crag::funnel_to_json(stats);
    obj["config_fingerprint"] = ctx.fingerprint;
    obj["seed"] = ctx.cfg.seed;
    fs::create_directories(ctx.cfg.output_dir);
    write_json_artifact(ctx.cfg.output_dir / "funnel.json", obj);
    std::cout << "funnel: total " << stats.total << " -> stage1 " << stats.stage1_survivors
              << " -> stage2 " << stats.stage2_survivors << " -> used " << stats.used << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Contrastive-RAG pipeline toolkit"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    std::string config_path;
    Overrides overrides;
    app.add_option("--config", config_path, "Run configuration file (JSON)");
    app.add_option("--corpus", overrides.corpus, "Corpus JSONL path");
    app.add_option("--dataset", overrides.dataset, "Dataset JSONL path");
    app.add_option("--demos", overrides.demos, "Demonstrations JSONL path");
    app.add_option("--output-dir", overrides.output_dir, "Artifact directory");
    app.add_option("--seed", overrides.seed, "Run seed");
    app.add_option("--top-k", overrides.top_k, "Retrieval depth");
    app.add_option("--family", overrides.family, "Prompt family: baseline|rag|crag");
    app.add_option("--parallelism", overrides.parallelism, "Max in-flight generations");
    app.add_option("--backend", overrides.backend, "Backend kind: mock|http");
    app.add_option("--perturb", overrides.perturb, "Perturbation: none|shuffle|noise");
    app.add_option("--noise-count", overrides.noise_count, "Documents to insert (count mode)");
    app.add_flag("--fraction-mode", overrides.fraction_mode, "Replace ceil(k/2) documents");
    app.add_flag("--force", overrides.force, "Export demos that did not pass the filters");
    app.add_option("--corrupt", overrides.corrupt, "Corruption mode: misleading|mixed");

    auto* c_index = app.add_subcommand("index", "Build the lexical index artifact");
    auto* c_retrieve = app.add_subcommand("retrieve", "Write top-k rankings for a dataset");
    auto* c_eval = app.add_subcommand("eval", "Run the evaluation pipeline");
    auto* c_gen = app.add_subcommand("gen-demos", "Generate contrastive demonstrations");
    auto* c_filter = app.add_subcommand("filter", "Apply the two-stage demonstration filter");
    auto* c_export = app.add_subcommand("export", "Export SFT records");
    auto* c_perturb = app.add_subcommand("perturb-eval", "Evaluate under a perturbation");
    auto* c_funnel = app.add_subcommand("funnel", "Report the demonstration funnel");
    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    RunContext ctx;
    std::vector<std::string> errors;
    if (!config_path.empty()) {
        crag::ConfigResult loaded = crag::load_run_config(config_path);
        ctx.cfg = std::move(loaded.config);
        errors = std::move(loaded.errors);
    }
    apply_overrides(ctx.cfg, overrides, errors);
    if (!errors.empty()) {
        std::cerr << "configuration errors:\n";
        for (const auto& e : errors) std::cerr << "  - " << e << "\n";
        return 2;
    }
    ctx.fingerprint = crag::config_fingerprint(ctx.cfg);

    try {
        if (c_index->parsed()) return cmd_index(ctx);
        if (c_retrieve->parsed()) return cmd_retrieve(ctx);
        if (c_eval->parsed()) return run_eval(ctx, false);
        if (c_perturb->parsed()) return run_eval(ctx, true);
        if (c_gen->parsed()) return cmd_gen_demos(ctx);
        if (c_filter->parsed()) return cmd_filter(ctx);
        if (c_export->parsed()) return cmd_export(ctx);
        if (c_funnel->parsed()) return cmd_funnel(ctx);
    } catch (const crag::GatewayError& e) {
        std::cerr << "gateway error (" << crag::to_string(e.kind()) << "): " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << app.help() << "\n";
    return 2;
}
