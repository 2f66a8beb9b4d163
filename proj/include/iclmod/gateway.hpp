#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "iclmod/prompting.hpp"

namespace iclmod {

enum class EndpointKind {
    remote,
    mock_constant,     // always replies with a fixed string
    mock_copy_oracle,  // replies with the answer of the demo whose text equals the query
    mock_majority,     // most frequent demo answer; ties -> lexicographically smallest
    mock_recency,      // answer of the demonstration nearest the query
};

std::string_view endpoint_kind_name(EndpointKind k);
std::optional<EndpointKind> parse_endpoint_kind(std::string_view s);

struct DecodingParams {
    double temperature = 0.0;
    int max_output_tokens = 16;
};

struct ModelEndpoint {
    std::string name;
    EndpointKind kind = EndpointKind::remote;
    std::string base_url;
    std::string model;
    DecodingParams decoding;
    std::string api_key_env;
    std::string constant_label;  // mock_constant only

    // Canonical identity; partitions the response cache so entries never
    // cross endpoints.
    std::string identity() const;
    void validate() const;
};

enum class PredStatus { ok, parse_failure, transport_failure };

std::string_view pred_status_name(PredStatus s);

struct Prediction {
    std::string raw;
    std::optional<std::string> parsed;  // in allowed_labels iff status == ok
    PredStatus status = PredStatus::parse_failure;
    double latency_ms = 0.0;  // in-memory only; never serialized into reports
    std::string prompt_hash;
    bool from_cache = false;
};

// Normalization: trim, strip surrounding quotes and terminal punctuation,
// lowercase. Exact match against an allowed label wins; otherwise if exactly
// one allowed label occurs as a whole token in the first line, that label
// wins; otherwise nullopt.
std::optional<std::string> parse_label(const std::string& raw,
                                       const std::vector<std::string>& allowed);

// (#parse_failure + #transport_failure) / total. Empty input throws.
double failure_rate(const std::vector<Prediction>& predictions);

struct GatewayOptions {
    std::filesystem::path cache_dir;  // empty disables the response cache
    bool use_cache = true;
    int max_retries = 3;
    int retry_base_ms = 100;
    int timeout_sec = 60;
    int max_in_flight = 4;
};

class Gateway {
public:
    explicit Gateway(GatewayOptions options = {});

    // Raw completion with caching + bounded retries. transport_ok false means
    // retries were exhausted; the failure is recorded, never thrown.
    struct RawOutcome {
        std::string raw;
        bool transport_ok = true;
        bool from_cache = false;
        double latency_ms = 0.0;
    };
    RawOutcome complete_text(const std::string& prompt_text, const ModelEndpoint& endpoint);

    // Completion + parse against the prompt's allowed labels.
    Prediction complete(const RenderedPrompt& prompt, const ModelEndpoint& endpoint);

    // Number of actual endpoint invocations (cache hits excluded).
    std::uint64_t live_calls() const { return live_calls_.load(); }

    int max_in_flight() const { return options_.max_in_flight; }

private:
    std::string mock_reply(const std::string& prompt_text, const ModelEndpoint& endpoint) const;

    GatewayOptions options_;
    std::atomic<std::uint64_t> live_calls_{0};
    std::mutex cache_write_mu_;
};

}  // namespace iclmod
