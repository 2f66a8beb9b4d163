#include "iclmod/gateway.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <thread>

#include "iclmod/common.hpp"
#include "iclmod/http_util.hpp"
#include "json.hpp"

namespace iclmod {

using nlohmann::json;

std::string_view endpoint_kind_name(EndpointKind k) {
    switch (k) {
        case EndpointKind::remote: return "remote";
        case EndpointKind::mock_constant: return "mock_constant";
        case EndpointKind::mock_copy_oracle: return "mock_copy_oracle";
        case EndpointKind::mock_majority: return "mock_majority";
        case EndpointKind::mock_recency: return "mock_recency";
    }
    throw Error("unreachable endpoint kind");
}

std::optional<EndpointKind> parse_endpoint_kind(std::string_view s) {
    if (s == "remote") return EndpointKind::remote;
    if (s == "mock_constant") return EndpointKind::mock_constant;
    if (s == "mock_copy_oracle") return EndpointKind::mock_copy_oracle;
    if (s == "mock_majority") return EndpointKind::mock_majority;
    if (s == "mock_recency") return EndpointKind::mock_recency;
    return std::nullopt;
}

std::string ModelEndpoint::identity() const {
    std::string id(endpoint_kind_name(kind));
    switch (kind) {
        case EndpointKind::remote:
            id += "|" + base_url + "|" + model + "|t=" + std::to_string(decoding.temperature) +
                  "|max=" + std::to_string(decoding.max_output_tokens);
            break;
        case EndpointKind::mock_constant:
            id += "|" + constant_label;
            break;
        default:
            break;
    }
    return id;
}

void ModelEndpoint::validate() const {
    if (kind == EndpointKind::remote && (base_url.empty() || model.empty())) {
        throw Error("remote endpoint '" + name + "' requires base_url and model");
    }
    if (kind == EndpointKind::mock_constant && constant_label.empty()) {
        throw Error("mock_constant endpoint '" + name + "' requires constant_label");
    }
}

std::string_view pred_status_name(PredStatus s) {
    switch (s) {
        case PredStatus::ok: return "ok";
        case PredStatus::parse_failure: return "parse_failure";
        case PredStatus::transport_failure: return "transport_failure";
    }
    throw Error("unreachable status");
}

namespace {

bool is_quote(char c) {
    return c == '\'' || c == '"' || c == '`';
}

bool is_terminal_punct(char c) {
    return c == '.' || c == '!' || c == '?' || c == ',' || c == ';' || c == ':';
}

std::string normalize_for_match(std::string s) {
    for (;;) {
        std::string before = s;
        s = trim(s);
        if (s.size() >= 2 && is_quote(s.front()) && s.back() == s.front()) {
            s = s.substr(1, s.size() - 2);
        }
        while (!s.empty() && is_terminal_punct(s.back())) s.pop_back();
        if (s == before) break;
    }
    return to_lower(s);
}

bool is_token_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
}

// Whole-token occurrence of `needle` in lowercase `line`.
bool occurs_as_token(const std::string& line, const std::string& needle) {
    std::size_t pos = 0;
    while ((pos = line.find(needle, pos)) != std::string::npos) {
        bool left_ok = pos == 0 || !is_token_char(line[pos - 1]);
        std::size_t end = pos + needle.size();
        bool right_ok = end >= line.size() || !is_token_char(line[end]);
        if (left_ok && right_ok) return true;
        ++pos;
    }
    return false;
}

}  // namespace

std::optional<std::string> parse_label(const std::string& raw,
                                       const std::vector<std::string>& allowed) {
    if (allowed.empty()) throw Error("parse_label: allowed label set is empty");
    std::vector<std::string> normalized_allowed;
    normalized_allowed.reserve(allowed.size());
    for (const auto& a : allowed) normalized_allowed.push_back(normalize_for_match(a));
    for (std::size_t i = 0; i < normalized_allowed.size(); ++i) {
        for (std::size_t j = i + 1; j < normalized_allowed.size(); ++j) {
            if (normalized_allowed[i] == normalized_allowed[j]) {
                throw Error("allowed labels collide after normalization: '" + allowed[i] +
                            "' vs '" + allowed[j] + "'");
            }
        }
    }

    std::string norm = normalize_for_match(raw);
    for (std::size_t i = 0; i < allowed.size(); ++i) {
        if (norm == normalized_allowed[i]) return allowed[i];
    }

    std::string first_line = raw.substr(0, raw.find('\n'));
    first_line = to_lower(first_line);
    std::optional<std::string> found;
    for (std::size_t i = 0; i < allowed.size(); ++i) {
        if (occurs_as_token(first_line, normalized_allowed[i])) {
            if (found) return std::nullopt;  // ambiguous: two labels present
            found = allowed[i];
        }
    }
    return found;
}

double failure_rate(const std::vector<Prediction>& predictions) {
    if (predictions.empty()) throw Error("failure_rate: empty prediction list");
    std::size_t failures = 0;
    for (const auto& p : predictions) {
        if (p.status != PredStatus::ok) ++failures;
    }
    return static_cast<double>(failures) / static_cast<double>(predictions.size());
}

Gateway::Gateway(GatewayOptions options) : options_(std::move(options)) {}

std::string Gateway::mock_reply(const std::string& prompt_text,
                                const ModelEndpoint& endpoint) const {
    if (endpoint.kind == EndpointKind::mock_constant) return endpoint.constant_label;
    auto scan = scan_prompt_blocks(prompt_text);
    switch (endpoint.kind) {
        case EndpointKind::mock_copy_oracle: {
            for (const auto& [text, answer] : scan.demos) {
                if (text == scan.query) return answer;
            }
            return "";  // no exact match -> parse failure downstream
        }
        case EndpointKind::mock_majority: {
            if (scan.demos.empty()) return "";
            std::map<std::string, std::size_t> counts;
            for (const auto& [text, answer] : scan.demos) ++counts[answer];
            std::string best;
            std::size_t best_count = 0;
            for (const auto& [answer, count] : counts) {
                if (count > best_count) {  // map order = lexicographic tie-break
                    best = answer;
                    best_count = count;
                }
            }
            return best;
        }
        case EndpointKind::mock_recency:
            return scan.demos.empty() ? "" : scan.demos.back().second;
        default:
            throw Error("unexpected mock kind");
    }
}

Gateway::RawOutcome Gateway::complete_text(const std::string& prompt_text,
                                           const ModelEndpoint& endpoint) {
    if (prompt_text.empty()) throw Error("refusing to send an empty prompt");
    endpoint.validate();
    RawOutcome outcome;
    std::string prompt_hash = sha256_hex(prompt_text);
    std::filesystem::path cache_file;
    const bool use_cache = options_.use_cache && !options_.cache_dir.empty();
    if (use_cache) {
        cache_file = options_.cache_dir / "responses" /
                     sha256_hex(endpoint.identity()).substr(0, 16) / (prompt_hash + ".json");
        if (std::filesystem::exists(cache_file)) {
            json rec = json::parse(read_file(cache_file));
            outcome.raw = rec.at("raw").get<std::string>();
            outcome.from_cache = true;
            return outcome;
        }
    }

    auto started = std::chrono::steady_clock::now();
    if (endpoint.kind != EndpointKind::remote) {
        live_calls_.fetch_add(1);
        outcome.raw = mock_reply(prompt_text, endpoint);
    } else {
        json body;
        body["model"] = endpoint.model;
        body["messages"] = json::array({{{"role", "user"}, {"content", prompt_text}}});
        body["temperature"] = endpoint.decoding.temperature;
        body["max_tokens"] = endpoint.decoding.max_output_tokens;
        std::string payload = body.dump();
        bool done = false;
        for (int attempt = 0; attempt <= options_.max_retries && !done; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(options_.retry_base_ms << (attempt - 1)));
            }
            live_calls_.fetch_add(1);
            auto resp = http_post_json(endpoint.base_url, "/chat/completions", payload,
                                       endpoint.api_key_env, options_.timeout_sec);
            if (resp.ok) {
                try {
                    json parsed = json::parse(resp.body);
                    outcome.raw =
                        parsed.at("choices").at(0).at("message").at("content").get<std::string>();
                    done = true;
                } catch (const json::exception&) {
                    // malformed body; retry like a transport error
                }
            } else if (!resp.retryable) {
                break;
            }
        }
        if (!done) {
            outcome.transport_ok = false;
        }
    }
    outcome.latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
            .count();

    if (use_cache && outcome.transport_ok) {
        json rec;
        rec["raw"] = outcome.raw;
        rec["endpoint"] = endpoint.identity();
        rec["prompt_hash"] = prompt_hash;
        std::lock_guard<std::mutex> lock(cache_write_mu_);
        write_file_atomic(cache_file, rec.dump());
    }
    return outcome;
}

Prediction Gateway::complete(const RenderedPrompt& prompt, const ModelEndpoint& endpoint) {
    Prediction prediction;
    prediction.prompt_hash = prompt.hash();
    auto outcome = complete_text(prompt.text, endpoint);
    prediction.raw = outcome.raw;
    prediction.from_cache = outcome.from_cache;
    prediction.latency_ms = outcome.latency_ms;
    if (!outcome.transport_ok) {
        prediction.status = PredStatus::transport_failure;
        return prediction;
    }
    prediction.parsed = parse_label(prediction.raw, prompt.allowed_labels);
    prediction.status = prediction.parsed ? PredStatus::ok : PredStatus::parse_failure;
    return prediction;
}

}  // namespace iclmod
