#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "crag/gateway.hpp"
#include "crag/jsonl.hpp"

using namespace crag;

namespace {

RenderedPrompt make_prompt(const std::string& text) {
    return RenderedPrompt{PromptFamily::crag, text, {}};
}

RetryPolicy fast_retry() {
    RetryPolicy policy;
    policy.backoff_base_ms = 1;
    return policy;
}

/// Local OpenAI-style stub that fails `failures` times before succeeding.
struct StubServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> hits{0};

    StubServer(int failures, int failure_status, const std::string& reply_text) {
        server.Post("/v1/chat/completions", [this, failures, failure_status, reply_text](
                                                const httplib::Request&,
                                                httplib::Response& res) {
            const int n = hits.fetch_add(1);
            if (n < failures) {
                res.status = failure_status;
                res.set_content("{\"error\":{\"message\":\"try later\"}}", "application/json");
                return;
            }
            nlohmann::json body{
                {"choices",
                 nlohmann::json::array(
                     {{{"message", {{"role", "assistant"}, {"content", reply_text}}}}})},
                {"usage", {{"prompt_tokens", 12}, {"completion_tokens", 3}}}};
            res.set_content(body.dump(), "application/json");
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this]() { server.listen_after_bind(); });
        server.wait_until_ready();
    }

    ~StubServer() {
        server.stop();
        thread.join();
    }

    HttpBackendOptions options() const {
        HttpBackendOptions o;
        o.base_url = "http://127.0.0.1:" + std::to_string(port);
        o.api_key = "test-key";
        return o;
    }
};

}  // namespace

TEST_CASE("mock backend serves scripted and default responses") {
    MockBackend backend("fallback");
    backend.script_response("prompt one", "X");

    GenerationParams params;
    CHECK(generate(make_prompt("prompt one"), params, backend).text == "X");
    CHECK(generate(make_prompt("anything else"), params, backend).text == "fallback");
    CHECK(generate(make_prompt("prompt one"), params, backend).backend_id == "mock");
}

TEST_CASE("mock lookup is greedy-deterministic") {
    MockBackend backend("d");
    backend.script_response("p", "value");
    GenerationParams params;
    const auto a = generate(make_prompt("p"), params, backend);
    const auto b = generate(make_prompt("p"), params, backend);
    CHECK(a.text == b.text);
    CHECK(a.retries == 0);
}

TEST_CASE("greedy decoding forces effective temperature zero") {
    GenerationParams params;
    CHECK(params.decoding == Decoding::greedy);
    CHECK(params.temperature == doctest::Approx(0.4));
    CHECK(params.effective_temperature() == 0.0);
    params.decoding = Decoding::sampled;
    CHECK(params.effective_temperature() == doctest::Approx(0.4));
}

TEST_CASE("scripted transport errors are retried, others are not") {
    MockBackend backend("d");
    backend.script_error("boom", GatewayErrorKind::transport, "down");
    GenerationParams params;
    CHECK_THROWS_AS(generate(make_prompt("boom"), params, backend, fast_retry()),
                    GatewayError);
    CHECK(backend.requests_issued() == 3);  // all attempts consumed

    MockBackend backend2("d");
    backend2.script_error("bad", GatewayErrorKind::backend, "no");
    CHECK_THROWS_AS(generate(make_prompt("bad"), params, backend2, fast_retry()),
                    GatewayError);
    CHECK(backend2.requests_issued() == 1);  // content errors never retry
}

TEST_CASE("http backend retries 429 twice then succeeds with retry count 2") {
    StubServer stub(2, 429, "#Answer: ok");
    HttpBackend backend(stub.options());
    GenerationParams params;
    const auto completion = generate(make_prompt("hello"), params, backend, fast_retry());
    CHECK(completion.text == "#Answer: ok");
    CHECK(completion.retries == 2);
    CHECK(stub.hits.load() == 3);
    REQUIRE(completion.usage.has_value());
    CHECK(completion.usage->prompt_tokens == 12);
    CHECK(completion.usage->output_tokens == 3);
}

TEST_CASE("http backend maps status classes onto error kinds") {
    SUBCASE("rate limit exhausts retries") {
        StubServer stub(99, 429, "unused");
        HttpBackend backend(stub.options());
        GenerationParams params;
        try {
            generate(make_prompt("x"), params, backend, fast_retry());
            FAIL("expected rate-limit error");
        } catch (const GatewayError& e) {
            CHECK(e.kind() == GatewayErrorKind::rate_limited);
        }
        CHECK(stub.hits.load() == 3);
    }
    SUBCASE("auth failure does not retry") {
        StubServer stub(99, 401, "unused");
        HttpBackend backend(stub.options());
        GenerationParams params;
        try {
            generate(make_prompt("x"), params, backend, fast_retry());
            FAIL("expected auth error");
        } catch (const GatewayError& e) {
            CHECK(e.kind() == GatewayErrorKind::auth);
        }
        CHECK(stub.hits.load() == 1);
    }
    SUBCASE("client error maps to backend kind") {
        StubServer stub(99, 404, "unused");
        HttpBackend backend(stub.options());
        GenerationParams params;
        try {
            generate(make_prompt("x"), params, backend, fast_retry());
            FAIL("expected backend error");
        } catch (const GatewayError& e) {
            CHECK(e.kind() == GatewayErrorKind::backend);
        }
        CHECK(stub.hits.load() == 1);
    }
}

TEST_CASE("missing credential fails before any network call") {
    HttpBackendOptions options;
    options.base_url = "http://127.0.0.1:9";  // nothing listens there
    unsetenv("CRAG_API_KEY");
    HttpBackend backend(options);
    GenerationParams params;
    try {
        generate(make_prompt("x"), params, backend, fast_retry());
        FAIL("expected auth error");
    } catch (const GatewayError& e) {
        CHECK(e.kind() == GatewayErrorKind::auth);
    }
    CHECK(backend.requests_issued() == 0);
}

TEST_CASE("batch preserves order and isolates failures") {
    MockBackend backend("default");
    std::vector<RenderedPrompt> prompts;
    for (int i = 0; i < 10; ++i) {
        const std::string text = "prompt " + std::to_string(i);
        prompts.push_back(make_prompt(text));
        backend.script_response(text, "reply " + std::to_string(i));
    }
    backend.script_error("prompt 4", GatewayErrorKind::backend, "scripted failure");

    GenerationParams params;
    const auto results = batch_generate(prompts, params, backend, 3, fast_retry());
    REQUIRE(results.size() == 10);
    for (int i = 0; i < 10; ++i) {
        if (i == 4) {
            CHECK_FALSE(results[static_cast<std::size_t>(i)].ok());
            CHECK(results[static_cast<std::size_t>(i)].error == "scripted failure");
        } else {
            REQUIRE(results[static_cast<std::size_t>(i)].ok());
            CHECK(results[static_cast<std::size_t>(i)].completion->text ==
                  "reply " + std::to_string(i));
        }
    }
}

TEST_CASE("batch output is independent of the parallelism level") {
    MockBackend backend("fallback");
    std::vector<RenderedPrompt> prompts;
    for (int i = 0; i < 25; ++i) {
        const std::string text = "p" + std::to_string(i);
        prompts.push_back(make_prompt(text));
        backend.script_response(text, "r" + std::to_string(i));
    }
    GenerationParams params;
    const auto serial = batch_generate(prompts, params, backend, 1);
    const auto wide = batch_generate(prompts, params, backend, 8);
    REQUIRE(serial.size() == wide.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].completion->text == wide[i].completion->text);
    }
}

TEST_CASE("at most `parallelism` requests are in flight") {
    std::atomic<int> in_flight{0};
    std::atomic<int> max_seen{0};
    CallbackBackend backend([&](const std::string&) {
        const int now = in_flight.fetch_add(1) + 1;
        int expected = max_seen.load();
        while (now > expected && !max_seen.compare_exchange_weak(expected, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
        in_flight.fetch_sub(1);
        return std::string("ok");
    });

    std::vector<RenderedPrompt> prompts(24, make_prompt("x"));
    GenerationParams params;
    batch_generate(prompts, params, backend, 3);
    CHECK(max_seen.load() <= 3);
    CHECK(backend.requests_issued() == 24);
}

TEST_CASE("mock script files load by fingerprint") {
    const auto dir = std::filesystem::temp_directory_path();
    const auto path = dir / "mock_script_test.jsonl";
    {
        std::vector<nlohmann::json> lines;
        lines.push_back({{"fingerprint", prompt_fingerprint("scripted prompt")},
                         {"response", "scripted response"}});
        crag::write_jsonl(path, lines);
    }
    MockBackend backend = MockBackend::from_script_jsonl(path, "dflt");
    GenerationParams params;
    CHECK(generate(make_prompt("scripted prompt"), params, backend).text ==
          "scripted response");
    CHECK(generate(make_prompt("other"), params, backend).text == "dflt");
}

TEST_CASE("invalid params are validation errors") {
    MockBackend backend("d");
    GenerationParams params;
    params.max_new_tokens = 0;
    CHECK_THROWS_AS(generate(make_prompt("x"), params, backend), GatewayError);
    params.max_new_tokens = 10;
    params.temperature = -1.0;
    CHECK_THROWS_AS(generate(make_prompt("x"), params, backend), GatewayError);
    CHECK_THROWS_AS(batch_generate({}, GenerationParams{}, backend, 0), GatewayError);
}
