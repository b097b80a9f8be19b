#include "crag/gateway.hpp"

#include <chrono>
#include <thread>

#include "crag/error.hpp"
#include "crag/jsonl.hpp"
#include "crag/text.hpp"

namespace crag {

const char* to_string(GatewayErrorKind kind) {
    switch (kind) {
        case GatewayErrorKind::transport: return "transport";
        case GatewayErrorKind::rate_limited: return "rate_limited";
        case GatewayErrorKind::auth: return "auth";
        case GatewayErrorKind::backend: return "backend";
        case GatewayErrorKind::validation: return "validation";
    }
    return "backend";
}

std::string prompt_fingerprint(std::string_view prompt_text) {
    return hex_fingerprint(prompt_text);
}

MockBackend MockBackend::from_script_jsonl(const std::filesystem::path& path,
                                           std::string default_response) {
    std::unordered_map<std::string, std::string> script;
    for_each_jsonl(path, [&](std::size_t line_no, const nlohmann::json& obj) {
        if (!obj.is_object() || !obj.contains("fingerprint") || !obj.contains("response")) {
            throw Error(path.string() + ":" + std::to_string(line_no) +
                        ": expected {\"fingerprint\", \"response\"}");
        }
        script[obj.at("fingerprint").get<std::string>()] =
            obj.at("response").get<std::string>();
    });
    return MockBackend(std::move(script), std::move(default_response));
}

void MockBackend::script_response(std::string_view prompt_text, std::string response) {
    script_[prompt_fingerprint(prompt_text)] = std::move(response);
}

void MockBackend::script_error(std::string_view prompt_text, GatewayErrorKind kind,
                               std::string message) {
    errors_[prompt_fingerprint(prompt_text)] = {kind, std::move(message)};
}

Completion MockBackend::complete(const std::string& prompt, const GenerationParams&) {
    requests_issued_.fetch_add(1);
    const std::string fp = prompt_fingerprint(prompt);
    if (auto it = errors_.find(fp); it != errors_.end()) {
        throw GatewayError(it->second.first, it->second.second);
    }
    Completion out;
    auto it = script_.find(fp);
    out.text = it != script_.end() ? it->second : default_response_;
    out.backend_id = id();
    out.latency_ms = 0;
    return out;
}

Completion CallbackBackend::complete(const std::string& prompt, const GenerationParams&) {
    requests_issued_.fetch_add(1);
    Completion out;
    out.text = fn_(prompt);
    out.backend_id = id_;
    out.latency_ms = 0;
    return out;
}

Completion generate(const RenderedPrompt& prompt, const GenerationParams& params,
                    Backend& backend, const RetryPolicy& retry) {
    if (params.max_new_tokens < 1) {
        throw GatewayError(GatewayErrorKind::validation, "max_new_tokens must be >= 1");
    }
    if (params.temperature < 0.0) {
        throw GatewayError(GatewayErrorKind::validation, "temperature must be >= 0");
    }
    const int attempts = retry.max_attempts < 1 ? 1 : retry.max_attempts;
    for (int attempt = 0;; ++attempt) {
        try {
            Completion out = backend.complete(prompt.text, params);
            out.retries = attempt;
            return out;
        } catch (const GatewayError& e) {
            const bool retryable = e.kind() == GatewayErrorKind::transport ||
                                   e.kind() == GatewayErrorKind::rate_limited;
            if (!retryable || attempt + 1 >= attempts) throw;
            if (retry.backoff_base_ms > 0) {
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(retry.backoff_base_ms << attempt));
            }
        }
    }
}

std::vector<GenerationResult> batch_generate(const std::vector<RenderedPrompt>& prompts,
                                             const GenerationParams& params, Backend& backend,
                                             int parallelism, const RetryPolicy& retry) {
    if (parallelism < 1) {
        throw GatewayError(GatewayErrorKind::validation, "parallelism must be >= 1");
    }
    std::vector<GenerationResult> results(prompts.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= prompts.size()) return;
            try {
                results[i].completion = generate(prompts[i], params, backend, retry);
            } catch (const GatewayError& e) {
                results[i].error_kind = e.kind();
                results[i].error = e.what();
            } catch (const std::exception& e) {
                results[i].error_kind = GatewayErrorKind::backend;
                results[i].error = e.what();
            }
        }
    };

    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(parallelism), prompts.size());
    if (workers <= 1) {
        worker();
        return results;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return results;
}

}  // namespace crag
