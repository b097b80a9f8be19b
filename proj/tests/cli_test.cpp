#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "crag/jsonl.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
    static int counter = 0;
    const fs::path log =
        fs::temp_directory_path() / ("crag_cli_" + std::to_string(counter++) + ".log");
    const std::string command =
        std::string(CRAG_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(command.c_str());
    RunResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.output = crag::read_text_file(log);
    return result;
}

fs::path fixture(const std::string& rel) { return fs::path(CRAG_FIXTURES_DIR) / rel; }

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("unknown command exits nonzero with usage text") {
    const auto result = run_cli("frobnicate");
    CHECK(result.exit_code != 0);
    CHECK(result.output.find("Usage") != std::string::npos);
}

TEST_CASE("missing subcommand exits nonzero") {
    const auto result = run_cli("--seed 1");
    CHECK(result.exit_code != 0);
}

TEST_CASE("config violations are all listed and exit code is 2") {
    const fs::path dir = fresh_dir("crag_cli_badcfg");
    const fs::path cfg = dir / "bad.json";
    crag::write_text_file(cfg, R"({
      "corpus": "missing.jsonl",
      "retrieval": {"top_k": 0},
      "generation": {"decoding": "beam"},
      "parallelism": 0
    })");
    const auto result = run_cli("eval --config " + cfg.string());
    CHECK(result.exit_code == 2);
    CHECK(result.output.find("retrieval.top_k") != std::string::npos);
    CHECK(result.output.find("generation.decoding") != std::string::npos);
    CHECK(result.output.find("parallelism") != std::string::npos);
}

TEST_CASE("eval on the bundled fixture reports the hand-counted accuracy") {
    const fs::path out = fresh_dir("crag_cli_eval");
    const auto result = run_cli("eval --config " + fixture("e2e50/config.json").string() +
                                " --output-dir " + out.string());
    REQUIRE(result.exit_code == 0);

    const auto report = nlohmann::json::parse(crag::read_text_file(out / "report.json"));
    CHECK(report.at("n") == 50);
    CHECK(report.at("accuracy").get<double>() == 0.8);
    CHECK(report.at("pipeline") == "crag");
    CHECK(report.at("config_fingerprint").get<std::string>().size() == 16);
    CHECK(fs::exists(out / "per_item.jsonl"));

    // The stdout table carries the headline number too.
    CHECK(result.output.find("accuracy=0.8") != std::string::npos);
}

TEST_CASE("gen-demos, filter, and funnel chain with monotone counts") {
    const fs::path out = fresh_dir("crag_cli_chain");
    const std::string base = " --config " + fixture("e2e50/config.json").string() +
                             " --output-dir " + out.string();

    REQUIRE(run_cli("gen-demos" + base).exit_code == 0);
    REQUIRE(fs::exists(out / "demos.jsonl"));

    REQUIRE(run_cli("filter" + base + " --demos " + (out / "demos.jsonl").string())
                .exit_code == 0);
    REQUIRE(fs::exists(out / "demos_filtered.jsonl"));

    REQUIRE(run_cli("funnel" + base + " --demos " + (out / "demos_filtered.jsonl").string())
                .exit_code == 0);
    const auto funnel = nlohmann::json::parse(crag::read_text_file(out / "funnel.json"));
    const int total = funnel.at("total").get<int>();
    const int stage1 = funnel.at("stage1").get<int>();
    const int stage2 = funnel.at("stage2").get<int>();
    const int used = funnel.at("used").get<int>();
    CHECK(total == 50);
    CHECK(total >= stage1);
    CHECK(stage1 >= stage2);
    CHECK(stage2 >= used);
    CHECK(funnel.at("config_fingerprint").get<std::string>().size() == 16);
    CHECK(funnel.contains("seed"));
}

TEST_CASE("retrieve writes adapter-compatible rankings") {
    const fs::path out = fresh_dir("crag_cli_retrieve");
    const auto result = run_cli("retrieve --config " + fixture("e2e50/config.json").string() +
                                " --output-dir " + out.string());
    REQUIRE(result.exit_code == 0);
    const auto lines = crag::read_jsonl(out / "rankings.jsonl");
    REQUIRE(lines.size() == 50);
    CHECK(lines[0].contains("query_id"));
    CHECK(lines[0].at("ranking").size() == 5);
    CHECK(lines[0].contains("config_fingerprint"));
}

TEST_CASE("index writes an auditable artifact") {
    const fs::path out = fresh_dir("crag_cli_index");
    const auto result = run_cli("index --config " + fixture("e2e50/config.json").string() +
                                " --output-dir " + out.string());
    REQUIRE(result.exit_code == 0);
    const auto obj = nlohmann::json::parse(crag::read_text_file(out / "index.json"));
    CHECK(obj.at("documents") == 60);
    CHECK(obj.at("index").contains("postings"));
}

TEST_CASE("export produces parseable SFT records from filtered demos") {
    const fs::path out = fresh_dir("crag_cli_export");
    const std::string base = " --config " + fixture("e2e50/config.json").string() +
                             " --output-dir " + out.string();
    REQUIRE(run_cli("gen-demos" + base).exit_code == 0);
    REQUIRE(run_cli("filter" + base + " --demos " + (out / "demos.jsonl").string())
                .exit_code == 0);

    const auto exported = run_cli("export" + base + " --demos " +
                                  (out / "demos_filtered.jsonl").string());
    REQUIRE(exported.exit_code == 0);
    const auto records = crag::read_jsonl(out / "sft.jsonl");
    CHECK_FALSE(records.empty());
    for (const auto& rec : records) {
        CHECK(rec.contains("input"));
        CHECK(rec.contains("target"));
        CHECK(rec.at("meta").at("trainer_defaults").at("epochs") == 3);
    }

    // Appendix-style corruption: mixed mode over the survivors.
    const auto corrupted = run_cli("export" + base + " --demos " +
                                   (out / "demos_filtered.jsonl").string() +
                                   " --corrupt mixed");
    REQUIRE(corrupted.exit_code == 0);
    const auto mixed = crag::read_jsonl(out / "sft.jsonl");
    int misleading = 0;
    for (const auto& rec : mixed) {
        misleading += rec.at("meta").at("provenance") == "misleading" ? 1 : 0;
    }
    CHECK(misleading == static_cast<int>(mixed.size()) / 2);
}

TEST_CASE("perturb-eval without a perturbation is rejected") {
    const fs::path out = fresh_dir("crag_cli_perturb");
    const auto result = run_cli("perturb-eval --config " +
                                fixture("e2e50/config.json").string() + " --output-dir " +
                                out.string());
    CHECK(result.exit_code == 1);
    CHECK(result.output.find("perturb-eval") != std::string::npos);
}

TEST_CASE("perturb-eval shuffle runs end to end") {
    const fs::path out = fresh_dir("crag_cli_perturb2");
    const auto result = run_cli("perturb-eval --config " +
                                fixture("e2e50/config.json").string() + " --output-dir " +
                                out.string() + " --perturb shuffle");
    REQUIRE(result.exit_code == 0);
    const auto report = nlohmann::json::parse(crag::read_text_file(out / "report.json"));
    CHECK(report.at("perturbation").at("kind") == "shuffle");
    // Shuffled documents change the prompt, so the scripted mock no longer
    // matches and falls back to the default response.
    CHECK(report.at("accuracy").get<double>() <= 0.8);
}
