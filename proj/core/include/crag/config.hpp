#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crag/bm25.hpp"
#include "crag/demos.hpp"
#include "crag/eval.hpp"
#include "crag/gateway.hpp"
#include "crag/prompts.hpp"

namespace crag {

struct BackendConfig {
    std::string kind = "mock";  // mock | http
    std::optional<std::filesystem::path> script;
    std::string default_response;
    std::string base_url;
    std::string http_path = "/v1/chat/completions";
    std::string model = "gpt-4o";
};

/// Declarative run configuration: single source of truth for every command.
/// Precedence is CLI flags > config file > defaults; every field feeds the
/// config fingerprint.
struct RunConfig {
    std::filesystem::path corpus;
    std::filesystem::path dataset;
    std::filesystem::path output_dir = "out";
    std::optional<std::filesystem::path> demos_file;  // input for filter/export/funnel
    std::optional<std::filesystem::path> rankings;    // external-adapter replay file

    RetrievalConfig retrieval;
    GenerationParams generation;
    BackendConfig backend;
    PromptFamily family = PromptFamily::crag;
    PromptOptions prompt;
    PerturbationSpec perturbation;
    std::uint64_t seed = 42;
    int parallelism = 1;
    std::map<Task, int> caps = default_caps();
    bool export_force = false;
    std::optional<CorruptionMode> corrupt;
};

struct ConfigResult {
    RunConfig config;
    std::vector<std::string> errors;  // aggregated; empty when valid

    bool ok() const { return errors.empty(); }
};

/// Parses and validates a config file; all violations are reported, not just
/// the first. Relative paths resolve against the config file's directory.
ConfigResult load_run_config(const std::filesystem::path& path);

ConfigResult run_config_from_json(const nlohmann::json& obj,
                                  const std::filesystem::path& base_dir);

/// Canonical resolved form: defaults materialized, keys sorted by dump().
nlohmann::json run_config_to_json(const RunConfig& config);

/// Stable digest of the canonical form; embedded in every artifact.
std::string config_fingerprint(const RunConfig& config);

}  // namespace crag
