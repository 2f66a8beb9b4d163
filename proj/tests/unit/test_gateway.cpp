#include <atomic>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "iclmod/common.hpp"
#include "iclmod/gateway.hpp"
#include "json.hpp"
#include "test_util.hpp"

using namespace iclmod;
using nlohmann::json;

namespace {

ModelEndpoint mock_endpoint(EndpointKind kind, const std::string& constant = "") {
    ModelEndpoint e;
    e.name = "test";
    e.kind = kind;
    e.constant_label = constant;
    return e;
}

RenderedPrompt rendered_binary(const std::vector<DemoRef>& demos, const std::string& query) {
    PromptConfig config;
    config.task = Task::binary;
    config.k = demos.size();
    return render_prompt(config, demos, query);
}

}  // namespace

TEST_CASE("parse_label: normalization, exact and token matches") {
    std::vector<std::string> allowed = {"benign", "illicit"};
    CHECK(parse_label("Illicit.", allowed) == "illicit");
    CHECK(parse_label("  'benign'  ", allowed) == "benign");
    CHECK(parse_label("\"ILLICIT!\"", allowed) == "illicit");
    CHECK(parse_label("I cannot determine that", allowed) == std::nullopt);
    CHECK(parse_label("benign or illicit", allowed) == std::nullopt);  // ambiguous
    CHECK(parse_label("The category is illicit", allowed) == "illicit");
    CHECK(parse_label("illicit\nbut wait, maybe benign", allowed) == "illicit");  // first line only
    CHECK(parse_label("benignly speaking", allowed) == std::nullopt);  // not a whole token
}

TEST_CASE("parse_label: abstract symbols and idempotence") {
    std::vector<std::string> digits = {"0", "1"};
    CHECK(parse_label("1", digits) == "1");
    CHECK(parse_label("Category: 1", digits) == "1");
    CHECK(parse_label("10", digits) == std::nullopt);
    for (const auto& label : {"benign", "illicit"}) {
        auto parsed = parse_label(label, {"benign", "illicit"});
        REQUIRE(parsed.has_value());
        CHECK(*parsed == label);
    }
    CHECK_THROWS_AS(parse_label("x", {}), Error);
    CHECK_THROWS_AS(parse_label("x", {"A", "a"}), Error);  // collide after normalization
}

TEST_CASE("failure_rate arithmetic") {
    auto pred = [](PredStatus status) {
        Prediction p;
        p.status = status;
        return p;
    };
    std::vector<Prediction> ten;
    for (int i = 0; i < 8; ++i) ten.push_back(pred(PredStatus::ok));
    ten.push_back(pred(PredStatus::parse_failure));
    ten.push_back(pred(PredStatus::transport_failure));
    CHECK(failure_rate(ten) == doctest::Approx(0.2));

    std::vector<Prediction> all_ok(5, pred(PredStatus::ok));
    CHECK(failure_rate(all_ok) == 0.0);

    std::vector<Prediction> paper_scale;
    for (int i = 0; i < 10000; ++i) {
        paper_scale.push_back(pred(i < 5894 ? PredStatus::parse_failure : PredStatus::ok));
    }
    CHECK(failure_rate(paper_scale) == doctest::Approx(0.5894));

    CHECK_THROWS_AS(failure_rate({}), Error);
}

TEST_CASE("mock_constant replies with its label on any prompt") {
    Gateway gateway;
    auto prompt = rendered_binary({}, "anything at all");
    auto prediction = gateway.complete(prompt, mock_endpoint(EndpointKind::mock_constant, "benign"));
    CHECK(prediction.raw == "benign");
    CHECK(prediction.status == PredStatus::ok);
    CHECK(*prediction.parsed == "benign");
}

TEST_CASE("mock_copy_oracle copies the label of the exact-match demo at any position") {
    Gateway gateway;
    std::string query = "the exact query text";
    for (std::size_t pos = 0; pos < 4; ++pos) {
        std::vector<DemoRef> demos;
        for (std::size_t i = 0; i < 3; ++i) {
            demos.push_back({"h" + std::to_string(i), "hay text " + std::to_string(i), "benign"});
        }
        demos.insert(demos.begin() + static_cast<std::ptrdiff_t>(pos),
                     {"needle", query, "illicit"});
        auto prediction = gateway.complete(rendered_binary(demos, query),
                                           mock_endpoint(EndpointKind::mock_copy_oracle));
        CHECK(prediction.raw == "illicit");
        CHECK(prediction.status == PredStatus::ok);
    }
    // no exact match -> empty completion -> parse failure
    auto miss = gateway.complete(rendered_binary({{"a", "different", "benign"}}, query),
                                 mock_endpoint(EndpointKind::mock_copy_oracle));
    CHECK(miss.raw.empty());
    CHECK(miss.status == PredStatus::parse_failure);
}

TEST_CASE("mock_majority takes the most frequent label, lexicographic on ties") {
    Gateway gateway;
    std::vector<DemoRef> demos = {{"1", "a", "illicit"}, {"2", "b", "illicit"},
                                  {"3", "c", "benign"}};
    auto majority = gateway.complete(rendered_binary(demos, "q"),
                                     mock_endpoint(EndpointKind::mock_majority));
    CHECK(majority.raw == "illicit");
    std::vector<DemoRef> tied = {{"1", "a", "illicit"}, {"2", "b", "benign"}};
    auto tie = gateway.complete(rendered_binary(tied, "q"),
                                mock_endpoint(EndpointKind::mock_majority));
    CHECK(tie.raw == "benign");
}

TEST_CASE("mock_recency copies the demonstration nearest the query") {
    Gateway gateway;
    std::vector<DemoRef> demos = {{"1", "a", "benign"}, {"2", "b", "illicit"}};
    auto prediction = gateway.complete(rendered_binary(demos, "q"),
                                       mock_endpoint(EndpointKind::mock_recency));
    CHECK(prediction.raw == "illicit");
}

TEST_CASE("response cache: second call is served from disk, byte-identical") {
    auto dir = testutil::fresh_temp_dir("gw_cache");
    GatewayOptions options;
    options.cache_dir = dir;
    Gateway gateway(options);
    auto endpoint = mock_endpoint(EndpointKind::mock_constant, "benign");
    auto prompt = rendered_binary({}, "cache me");
    auto first = gateway.complete(prompt, endpoint);
    CHECK_FALSE(first.from_cache);
    CHECK(gateway.live_calls() == 1);
    auto second = gateway.complete(prompt, endpoint);
    CHECK(second.from_cache);
    CHECK(second.raw == first.raw);
    CHECK(gateway.live_calls() == 1);

    // A fresh gateway over the same directory still hits the cache.
    Gateway warm(options);
    auto third = warm.complete(prompt, endpoint);
    CHECK(third.from_cache);
    CHECK(warm.live_calls() == 0);
}

TEST_CASE("response cache never crosses endpoint identities") {
    auto dir = testutil::fresh_temp_dir("gw_cache_iso");
    GatewayOptions options;
    options.cache_dir = dir;
    Gateway gateway(options);
    auto prompt = rendered_binary({}, "same prompt");
    auto a = gateway.complete(prompt, mock_endpoint(EndpointKind::mock_constant, "benign"));
    auto b = gateway.complete(prompt, mock_endpoint(EndpointKind::mock_constant, "illicit"));
    CHECK(a.raw == "benign");
    CHECK(b.raw == "illicit");
    CHECK_FALSE(b.from_cache);
    CHECK(gateway.live_calls() == 2);
}

TEST_CASE("--no-cache semantics: cache can be disabled") {
    auto dir = testutil::fresh_temp_dir("gw_nocache");
    GatewayOptions options;
    options.cache_dir = dir;
    options.use_cache = false;
    Gateway gateway(options);
    auto endpoint = mock_endpoint(EndpointKind::mock_constant, "benign");
    auto prompt = rendered_binary({}, "q");
    gateway.complete(prompt, endpoint);
    gateway.complete(prompt, endpoint);
    CHECK(gateway.live_calls() == 2);
}

TEST_CASE("remote endpoint via a local OpenAI-compatible server, with retry") {
    std::atomic<int> hits{0};
    std::mutex seen_mu;
    std::string seen_model, seen_auth;
    httplib::Server server;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        int n = ++hits;
        auto body = json::parse(req.body);
        {
            std::lock_guard<std::mutex> lock(seen_mu);
            seen_model = body.value("model", "");
            seen_auth = req.get_header_value("Authorization");
        }
        if (n == 1) {
            res.status = 500;  // first call fails, the retry must succeed
            res.set_content("overloaded", "text/plain");
            return;
        }
        json reply = {{"choices", {{{"message", {{"role", "assistant"},
                                                 {"content", "illicit"}}}}}}};
        res.set_content(reply.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    setenv("ICLMOD_TEST_TOKEN", "sekret", 1);
    ModelEndpoint endpoint;
    endpoint.name = "local";
    endpoint.kind = EndpointKind::remote;
    endpoint.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    endpoint.model = "test-model";
    endpoint.api_key_env = "ICLMOD_TEST_TOKEN";

    GatewayOptions options;
    options.retry_base_ms = 1;
    Gateway gateway(options);
    auto prompt = rendered_binary({}, "is this ok");
    auto prediction = gateway.complete(prompt, endpoint);
    CHECK(prediction.status == PredStatus::ok);
    CHECK(prediction.raw == "illicit");
    CHECK(hits.load() == 2);
    {
        std::lock_guard<std::mutex> lock(seen_mu);
        CHECK(seen_model == "test-model");
        CHECK(seen_auth == "Bearer sekret");
    }

    server.stop();
    server_thread.join();
}

TEST_CASE("transport failure after exhausted retries is recorded, not thrown") {
    ModelEndpoint endpoint;
    endpoint.name = "dead";
    endpoint.kind = EndpointKind::remote;
    endpoint.base_url = "http://127.0.0.1:1/v1";  // nothing listens here
    endpoint.model = "x";
    GatewayOptions options;
    options.max_retries = 1;
    options.retry_base_ms = 1;
    options.timeout_sec = 1;
    Gateway gateway(options);
    auto prediction = gateway.complete(rendered_binary({}, "q"), endpoint);
    CHECK(prediction.status == PredStatus::transport_failure);
    CHECK_FALSE(prediction.parsed.has_value());
}

TEST_CASE("endpoint validation and identity") {
    ModelEndpoint remote;
    remote.name = "r";
    remote.kind = EndpointKind::remote;
    CHECK_THROWS_AS(remote.validate(), Error);
    remote.base_url = "http://x/v1";
    remote.model = "m";
    remote.validate();
    ModelEndpoint constant = mock_endpoint(EndpointKind::mock_constant, "");
    CHECK_THROWS_AS(constant.validate(), Error);
    CHECK(mock_endpoint(EndpointKind::mock_constant, "a").identity() !=
          mock_endpoint(EndpointKind::mock_constant, "b").identity());
}

TEST_CASE("an empty prompt is refused") {
    Gateway gateway;
    RenderedPrompt empty;
    CHECK_THROWS_AS(gateway.complete(empty, mock_endpoint(EndpointKind::mock_constant, "x")),
                    Error);
}
