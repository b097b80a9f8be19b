#include <chrono>
#include <cstdlib>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "crag/gateway.hpp"

namespace crag {

namespace {

std::optional<std::string> env_api_key() {
    const char* value = std::getenv("CRAG_API_KEY");
    if (value == nullptr || *value == '\0') return std::nullopt;
    return std::string(value);
}

}  // namespace

HttpBackend::HttpBackend(HttpBackendOptions options) : options_(std::move(options)) {
    if (!options_.api_key) options_.api_key = env_api_key();
}

std::string HttpBackend::id() const {
    return "http:" + options_.base_url + options_.path + "#" + options_.model;
}

Completion HttpBackend::complete(const std::string& prompt, const GenerationParams& params) {
    if (options_.require_auth && !options_.api_key) {
        throw GatewayError(GatewayErrorKind::auth,
                           "no API credential: set CRAG_API_KEY or configure api_key");
    }

    nlohmann::json body{
        {"model", options_.model},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
        {"temperature", params.effective_temperature()},
        {"max_tokens", params.max_new_tokens},
    };
    if (params.seed) body["seed"] = *params.seed;

    httplib::Client client(options_.base_url);
    client.set_connection_timeout(options_.connect_timeout_s, 0);
    client.set_read_timeout(options_.read_timeout_s, 0);
    httplib::Headers headers;
    if (options_.api_key) {
        headers.emplace("Authorization", "Bearer " + *options_.api_key);
    }

    const auto started = std::chrono::steady_clock::now();
    requests_issued_.fetch_add(1);
    httplib::Result res = client.Post(options_.path, headers, body.dump(), "application/json");
    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - started)
                             .count();

    if (!res) {
        throw GatewayError(GatewayErrorKind::transport,
                           "transport failure: " + httplib::to_string(res.error()));
    }
    if (res->status == 429) {
        throw GatewayError(GatewayErrorKind::rate_limited, "rate limited (HTTP 429)");
    }
    if (res->status == 401 || res->status == 403) {
        throw GatewayError(GatewayErrorKind::auth,
                           "authentication rejected (HTTP " + std::to_string(res->status) + ")");
    }
    if (res->status >= 500) {
        throw GatewayError(GatewayErrorKind::transport,
                           "server error (HTTP " + std::to_string(res->status) + ")");
    }
    if (res->status != 200) {
        throw GatewayError(GatewayErrorKind::backend,
                           "backend error (HTTP " + std::to_string(res->status) +
                               "): " + res->body);
    }

    nlohmann::json payload = nlohmann::json::parse(res->body, nullptr, false);
    if (payload.is_discarded()) {
        throw GatewayError(GatewayErrorKind::backend, "backend returned malformed JSON");
    }
    if (payload.contains("error")) {
        throw GatewayError(GatewayErrorKind::backend,
                           "backend error: " + payload["error"].dump());
    }

    Completion out;
    try {
        out.text = payload.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        throw GatewayError(GatewayErrorKind::backend,
                           "backend response missing choices[0].message.content");
    }
    if (payload.contains("usage")) {
        TokenUsage usage;
        usage.prompt_tokens = payload["usage"].value("prompt_tokens", 0);
        usage.output_tokens = payload["usage"].value("completion_tokens", 0);
        out.usage = usage;
    }
    out.backend_id = id();
    out.latency_ms = static_cast<std::int64_t>(elapsed);
    return out;
}

}  // namespace crag
