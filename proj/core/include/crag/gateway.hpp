#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "crag/prompts.hpp"

namespace crag {

enum class Decoding { greedy, sampled };

/// Inference settings. Defaults follow the experimental setup: temperature
/// 0.4, max generation length 2048, greedy decoding. greedy forces an
/// effective temperature of 0 at the adapter boundary regardless of the
/// temperature field; both values are kept so run metadata records the
/// requested configuration verbatim.
struct GenerationParams {
    double temperature = 0.4;
    int max_new_tokens = 2048;
    Decoding decoding = Decoding::greedy;
    std::optional<std::uint64_t> seed;

    double effective_temperature() const {
        return decoding == Decoding::greedy ? 0.0 : temperature;
    }
};

struct TokenUsage {
    int prompt_tokens = 0;
    int output_tokens = 0;
};

struct Completion {
    std::string text;
    std::optional<TokenUsage> usage;
    std::string backend_id;
    std::int64_t latency_ms = 0;
    int retries = 0;
};

enum class GatewayErrorKind { transport, rate_limited, auth, backend, validation };

class GatewayError : public std::runtime_error {
public:
    GatewayError(GatewayErrorKind kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}
    GatewayErrorKind kind() const { return kind_; }

private:
    GatewayErrorKind kind_;
};

const char* to_string(GatewayErrorKind kind);

/// Transport retry policy: transient classes (transport, rate-limit) are
/// retried with exponential backoff; content/validation/auth errors never
/// are.
struct RetryPolicy {
    int max_attempts = 3;
    int backoff_base_ms = 500;
};

class Backend {
public:
    Backend() = default;
    Backend(const Backend&) {}
    Backend(Backend&&) noexcept {}
    Backend& operator=(const Backend&) { return *this; }
    Backend& operator=(Backend&&) noexcept { return *this; }
    virtual ~Backend() = default;

    virtual Completion complete(const std::string& prompt, const GenerationParams& params) = 0;
    virtual std::string id() const = 0;

    std::uint64_t requests_issued() const { return requests_issued_.load(); }

protected:
    std::atomic<std::uint64_t> requests_issued_{0};  // not copied: per-instance stat
};

/// Platform-stable fingerprint of a prompt text, used to key mock scripts.
std::string prompt_fingerprint(std::string_view prompt_text);

/// Deterministic scripted backend: responses are looked up by prompt
/// fingerprint; unmatched prompts receive the default response. Entries can
/// also be scripted to fail with a given error class.
class MockBackend : public Backend {
public:
    explicit MockBackend(std::string default_response = "")
        : default_response_(std::move(default_response)) {}

    MockBackend(std::unordered_map<std::string, std::string> script,
                std::string default_response)
        : script_(std::move(script)), default_response_(std::move(default_response)) {}

    /// Loads a JSON Lines script of {"fingerprint": str, "response": str}.
    static MockBackend from_script_jsonl(const std::filesystem::path& path,
                                         std::string default_response);

    void script_response(std::string_view prompt_text, std::string response);
    void script_error(std::string_view prompt_text, GatewayErrorKind kind, std::string message);

    Completion complete(const std::string& prompt, const GenerationParams& params) override;
    std::string id() const override { return "mock"; }

private:
    std::unordered_map<std::string, std::string> script_;
    std::unordered_map<std::string, std::pair<GatewayErrorKind, std::string>> errors_;
    std::string default_response_;
};

/// Backend computing responses from the prompt text; handy in tests and for
/// large scripted runs where per-fingerprint tables would be awkward.
class CallbackBackend : public Backend {
public:
    using Fn = std::function<std::string(const std::string&)>;
    explicit CallbackBackend(Fn fn, std::string id = "callback")
        : fn_(std::move(fn)), id_(std::move(id)) {}

    Completion complete(const std::string& prompt, const GenerationParams& params) override;
    std::string id() const override { return id_; }

private:
    Fn fn_;
    std::string id_;
};

struct HttpBackendOptions {
    std::string base_url;                      // e.g. "http://127.0.0.1:8080"
    std::string path = "/v1/chat/completions"; // OpenAI-style chat endpoint
    std::string model = "gpt-4o";
    std::optional<std::string> api_key;        // falls back to $CRAG_API_KEY
    bool require_auth = true;
    int connect_timeout_s = 10;
    int read_timeout_s = 120;
};

/// OpenAI-style chat-completion client. The prompt is sent as a single user
/// message; greedy decoding maps to temperature 0.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendOptions options);

    Completion complete(const std::string& prompt, const GenerationParams& params) override;
    std::string id() const override;

private:
    HttpBackendOptions options_;
};

/// Runs one completion with validation and the retry policy; Completion
/// records how many retries were needed.
Completion generate(const RenderedPrompt& prompt, const GenerationParams& params,
                    Backend& backend, const RetryPolicy& retry = {});

struct GenerationResult {
    std::optional<Completion> completion;
    GatewayErrorKind error_kind = GatewayErrorKind::backend;
    std::string error;  // empty on success

    bool ok() const { return completion.has_value(); }
};

/// Order-preserving batch generation with at most `parallelism` requests in
/// flight. Per-item failures are embedded; the batch itself never aborts.
std::vector<GenerationResult> batch_generate(const std::vector<RenderedPrompt>& prompts,
                                             const GenerationParams& params, Backend& backend,
                                             int parallelism, const RetryPolicy& retry = {});

}  // namespace crag
