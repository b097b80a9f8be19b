#include "crag/config.hpp"

#include <fstream>

#include "crag/error.hpp"
#include "crag/jsonl.hpp"
#include "crag/text.hpp"

namespace crag {

namespace {

class Reader {
public:
    Reader(const nlohmann::json& obj, std::vector<std::string>& errors)
        : obj_(obj), errors_(errors) {}

    template <typename T>
    void get(const char* key, T& out) {
        if (!obj_.contains(key)) return;
        try {
            out = obj_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            errors_.push_back(std::string(key) + ": wrong type");
        }
    }

    bool has(const char* key) const { return obj_.contains(key); }
    const nlohmann::json& raw() const { return obj_; }

private:
    const nlohmann::json& obj_;
    std::vector<std::string>& errors_;
};

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::filesystem::path& p) {
    if (p.empty() || p.is_absolute()) return p;
    return base / p;
}

}  // namespace

ConfigResult run_config_from_json(const nlohmann::json& obj,
                                  const std::filesystem::path& base_dir) {
    ConfigResult result;
    RunConfig& cfg = result.config;
    std::vector<std::string>& errors = result.errors;

    if (!obj.is_object()) {
        errors.push_back("config root must be a JSON object");
        return result;
    }
    Reader top(obj, errors);

    std::string path_buf;

    path_buf.clear();
    top.get("corpus", path_buf);
    if (!path_buf.empty()) cfg.corpus = resolve(base_dir, path_buf);
    path_buf.clear();
    top.get("dataset", path_buf);
    if (!path_buf.empty()) cfg.dataset = resolve(base_dir, path_buf);
    path_buf.clear();
    top.get("output_dir", path_buf);
    if (!path_buf.empty()) cfg.output_dir = resolve(base_dir, path_buf);
    path_buf.clear();
    top.get("demos", path_buf);
    if (!path_buf.empty()) cfg.demos_file = resolve(base_dir, path_buf);
    path_buf.clear();
    top.get("rankings", path_buf);
    if (!path_buf.empty()) cfg.rankings = resolve(base_dir, path_buf);

    if (top.has("retrieval")) {
        Reader r(obj.at("retrieval"), errors);
        r.get("top_k", cfg.retrieval.top_k);
        std::string scorer = "bm25";
        r.get("scorer", scorer);
        if (scorer == "bm25") cfg.retrieval.scorer = Scorer::bm25;
        else if (scorer == "external-adapter") cfg.retrieval.scorer = Scorer::external_adapter;
        else errors.push_back("retrieval.scorer: must be \"bm25\" or \"external-adapter\"");
    }
    if (cfg.retrieval.top_k < 1) errors.push_back("retrieval.top_k: must be >= 1");

    if (top.has("generation")) {
        Reader g(obj.at("generation"), errors);
        g.get("temperature", cfg.generation.temperature);
        g.get("max_new_tokens", cfg.generation.max_new_tokens);
        std::string decoding = "greedy";
        g.get("decoding", decoding);
        if (decoding == "greedy") cfg.generation.decoding = Decoding::greedy;
        else if (decoding == "sampled") cfg.generation.decoding = Decoding::sampled;
        else errors.push_back("generation.decoding: must be \"greedy\" or \"sampled\"");
        if (g.has("seed")) {
            std::uint64_t s = 0;
            g.get("seed", s);
            cfg.generation.seed = s;
        }
    }
    if (cfg.generation.temperature < 0) errors.push_back("generation.temperature: must be >= 0");
    if (cfg.generation.max_new_tokens < 1) {
        errors.push_back("generation.max_new_tokens: must be >= 1");
    }

    if (top.has("backend")) {
        Reader b(obj.at("backend"), errors);
        b.get("kind", cfg.backend.kind);
        path_buf.clear();
        b.get("script", path_buf);
        if (!path_buf.empty()) cfg.backend.script = resolve(base_dir, path_buf);
        b.get("default_response", cfg.backend.default_response);
        b.get("base_url", cfg.backend.base_url);
        b.get("path", cfg.backend.http_path);
        b.get("model", cfg.backend.model);
    }
    if (cfg.backend.kind != "mock" && cfg.backend.kind != "http") {
        errors.push_back("backend.kind: must be \"mock\" or \"http\"");
    }
    if (cfg.backend.kind == "http" && cfg.backend.base_url.empty()) {
        errors.push_back("backend.base_url: required for the http backend");
    }

    if (top.has("prompt")) {
        Reader p(obj.at("prompt"), errors);
        std::string family = "crag";
        p.get("family", family);
        if (auto f = prompt_family_from_string(family)) cfg.family = *f;
        else errors.push_back("prompt.family: must be baseline, rag, or crag");
        std::int64_t cap = static_cast<std::int64_t>(cfg.prompt.doc_char_cap);
        p.get("doc_char_cap", cap);
        if (cap < 0) errors.push_back("prompt.doc_char_cap: must be >= 0");
        else cfg.prompt.doc_char_cap = static_cast<std::size_t>(cap);
        path_buf.clear();
        p.get("template_dir", path_buf);
        if (!path_buf.empty()) cfg.prompt.template_dir = resolve(base_dir, path_buf);
    }

    if (top.has("perturbation")) {
        Reader p(obj.at("perturbation"), errors);
        std::string kind = "none";
        p.get("kind", kind);
        if (auto k = perturbation_kind_from_string(kind)) cfg.perturbation.kind = *k;
        else errors.push_back("perturbation.kind: must be none, shuffle, or noise");
        p.get("seed", cfg.perturbation.seed);
        p.get("noise_count", cfg.perturbation.noise_count);
        p.get("fraction_mode", cfg.perturbation.fraction_mode);
        p.get("exclusion_depth", cfg.perturbation.exclusion_depth);

        // The two noise readings are mutually exclusive: an explicit
        // noise_count together with fraction mode is a config error.
        if (cfg.perturbation.fraction_mode && p.has("noise_count")) {
            errors.push_back(
                "perturbation: noise_count and fraction_mode are mutually exclusive");
        }
        if (cfg.perturbation.kind == PerturbationKind::noise && !cfg.perturbation.fraction_mode &&
            cfg.perturbation.noise_count < 1) {
            errors.push_back("perturbation.noise_count: must be >= 1 in count mode");
        }
        if (cfg.perturbation.exclusion_depth < 1) {
            errors.push_back("perturbation.exclusion_depth: must be >= 1");
        }
        if (cfg.perturbation.kind == PerturbationKind::noise && !top.has("corpus") &&
            cfg.corpus.empty()) {
            errors.push_back("perturbation: noise mode needs a corpus as distractor source");
        }
    }

    top.get("seed", cfg.seed);
    top.get("parallelism", cfg.parallelism);
    if (cfg.parallelism < 1) errors.push_back("parallelism: must be >= 1");

    if (top.has("caps")) {
        const auto& caps = obj.at("caps");
        if (!caps.is_object()) {
            errors.push_back("caps: must be an object of task -> count");
        } else {
            for (const auto& [key, value] : caps.items()) {
                const auto task = task_from_string(key);
                if (!task) {
                    errors.push_back("caps." + key + ": unknown task");
                    continue;
                }
                if (!value.is_number_integer() || value.get<int>() < 0) {
                    errors.push_back("caps." + key + ": must be a non-negative integer");
                    continue;
                }
                cfg.caps[*task] = value.get<int>();
            }
        }
    }

    if (top.has("export")) {
        Reader e(obj.at("export"), errors);
        e.get("force", cfg.export_force);
        if (e.has("corrupt")) {
            std::string mode;
            e.get("corrupt", mode);
            if (mode == "misleading") cfg.corrupt = CorruptionMode::misleading;
            else if (mode == "mixed") cfg.corrupt = CorruptionMode::mixed;
            else errors.push_back("export.corrupt: must be \"misleading\" or \"mixed\"");
        }
    }

    if (cfg.retrieval.scorer == Scorer::external_adapter && !cfg.rankings) {
        errors.push_back("retrieval.scorer: external-adapter needs a \"rankings\" file");
    }
    return result;
}

ConfigResult load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        ConfigResult result;
        result.errors.push_back("cannot open config file: " + path.string());
        return result;
    }
    nlohmann::json obj = nlohmann::json::parse(in, nullptr, false);
    if (obj.is_discarded()) {
        ConfigResult result;
        result.errors.push_back("config file is not valid JSON: " + path.string());
        return result;
    }
    return run_config_from_json(obj, path.parent_path());
}

nlohmann::json run_config_to_json(const RunConfig& cfg) {
    nlohmann::json caps = nlohmann::json::object();
    for (const auto& [task, cap] : cfg.caps) caps[to_string(task)] = cap;

    nlohmann::json generation{{"temperature", cfg.generation.temperature},
                              {"max_new_tokens", cfg.generation.max_new_tokens},
                              {"decoding",
                               cfg.generation.decoding == Decoding::greedy ? "greedy"
                                                                           : "sampled"}};
    generation["seed"] =
        cfg.generation.seed ? nlohmann::json(*cfg.generation.seed) : nlohmann::json(nullptr);

    nlohmann::json backend{{"kind", cfg.backend.kind},
                           {"default_response", cfg.backend.default_response},
                           {"base_url", cfg.backend.base_url},
                           {"path", cfg.backend.http_path},
                           {"model", cfg.backend.model}};
    backend["script"] = cfg.backend.script ? nlohmann::json(cfg.backend.script->string())
                                           : nlohmann::json(nullptr);

    nlohmann::json prompt{{"family", to_string(cfg.family)},
                          {"doc_char_cap", cfg.prompt.doc_char_cap}};
    prompt["template_dir"] = cfg.prompt.template_dir
                                 ? nlohmann::json(cfg.prompt.template_dir->string())
                                 : nlohmann::json(nullptr);

    nlohmann::json obj{
        {"corpus", cfg.corpus.string()},
        {"dataset", cfg.dataset.string()},
        {"output_dir", cfg.output_dir.string()},
        {"demos", cfg.demos_file ? nlohmann::json(cfg.demos_file->string())
                                 : nlohmann::json(nullptr)},
        {"rankings",
         cfg.rankings ? nlohmann::json(cfg.rankings->string()) : nlohmann::json(nullptr)},
        {"retrieval",
         {{"top_k", cfg.retrieval.top_k},
          {"scorer",
           cfg.retrieval.scorer == Scorer::bm25 ? "bm25" : "external-adapter"}}},
        {"generation", std::move(generation)},
        {"backend", std::move(backend)},
        {"prompt", std::move(prompt)},
        {"perturbation",
         {{"kind", to_string(cfg.perturbation.kind)},
          {"seed", cfg.perturbation.seed},
          {"noise_count", cfg.perturbation.noise_count},
          {"fraction_mode", cfg.perturbation.fraction_mode},
          {"exclusion_depth", cfg.perturbation.exclusion_depth}}},
        {"seed", cfg.seed},
        {"parallelism", cfg.parallelism},
        {"caps", std::move(caps)},
        {"export",
         {{"force", cfg.export_force},
          {"corrupt", cfg.corrupt
                          ? nlohmann::json(*cfg.corrupt == CorruptionMode::misleading
                                               ? "misleading"
                                               : "mixed")
                          : nlohmann::json(nullptr)}}},
    };
    return obj;
}

std::string config_fingerprint(const RunConfig& config) {
    return hex_fingerprint(run_config_to_json(config).dump());
}

}  // namespace crag
