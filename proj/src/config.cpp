#include "iclmod/config.hpp"

#include "iclmod/common.hpp"
#include "iclmod/retrieval.hpp"

namespace iclmod {

using nlohmann::json;

PromptConfig prompt_config_from_json(const json& j) {
    PromptConfig config;
    if (j.contains("task")) {
        auto raw = j.at("task").get<std::string>();
        auto parsed = parse_task(raw);
        if (!parsed) throw Error("config field 'task': unknown task '" + raw + "'");
        config.task = *parsed;
    }
    config.k = j.value("k", std::size_t{0});
    if (j.contains("strategy")) {
        auto raw = j.at("strategy").get<std::string>();
        auto parsed = parse_strategy(raw);
        if (!parsed) throw Error("config field 'strategy': unknown strategy '" + raw + "'");
        config.strategy = *parsed;
    }
    if (j.contains("label_scheme")) {
        auto raw = j.at("label_scheme").get<std::string>();
        auto parsed = parse_label_scheme(raw);
        if (!parsed) throw Error("config field 'label_scheme': unknown scheme '" + raw + "'");
        config.label_scheme = *parsed;
    }
    if (j.contains("abstract_style")) {
        auto style = j.at("abstract_style").get<std::string>();
        if (style == "digits") config.abstract_style = AbstractStyle::digits;
        else if (style == "letters") config.abstract_style = AbstractStyle::letters;
        else throw Error("config field 'abstract_style': unknown style '" + style + "'");
    }
    if (j.contains("ordering")) {
        config.ordering = OrderingPolicy::parse(j.at("ordering").get<std::string>());
    }
    config.needle = j.value("needle", false);
    config.seed = j.value("seed", std::uint64_t{0});
    config.truncate_chars = j.value("truncate_chars", std::size_t{4000});
    config.validate();
    return config;
}

AppConfig AppConfig::load(const std::filesystem::path& path) {
    json parsed;
    try {
        parsed = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw UsageError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    AppConfig config;
    try {
        if (parsed.contains("endpoints")) {
            for (const auto& e : parsed.at("endpoints")) {
                ModelEndpoint endpoint;
                endpoint.name = e.at("name").get<std::string>();
                auto kind_str = e.value("kind", std::string("remote"));
                auto kind = parse_endpoint_kind(kind_str);
                if (!kind) {
                    throw Error("endpoint '" + endpoint.name + "': unknown kind '" + kind_str +
                                "'");
                }
                endpoint.kind = *kind;
                endpoint.base_url = e.value("base_url", "");
                endpoint.model = e.value("model", "");
                endpoint.decoding.temperature = e.value("temperature", 0.0);
                endpoint.decoding.max_output_tokens = e.value("max_output_tokens", 16);
                endpoint.api_key_env = e.value("api_key_env", "");
                endpoint.constant_label = e.value("constant_label", "");
                endpoint.validate();
                config.endpoints.push_back(std::move(endpoint));
            }
        }
        if (parsed.contains("embedding")) {
            const auto& e = parsed.at("embedding");
            config.embedding.kind = e.value("kind", std::string("mock_hash"));
            config.embedding.base_url = e.value("base_url", "");
            config.embedding.model = e.value("model", "");
            config.embedding.api_key_env = e.value("api_key_env", "");
            config.embedding.path = e.value("path", std::string(""));
            config.embedding.dim = e.value("dim", std::size_t{64});
        }
        config.cache_dir = parsed.value("cache_dir", std::string(".iclmod-cache"));
        config.max_in_flight = parsed.value("max_in_flight", 4);
        config.max_retries = parsed.value("max_retries", 3);
        config.retry_base_ms = parsed.value("retry_base_ms", 100);
        config.timeout_sec = parsed.value("timeout_sec", 60);
        if (parsed.contains("prompt")) {
            config.prompt = prompt_config_from_json(parsed.at("prompt"));
        }
    } catch (const json::exception& e) {
        throw UsageError("config file " + path.string() + ": " + e.what());
    }
    return config;
}

const ModelEndpoint& AppConfig::endpoint(const std::string& name) const {
    for (const auto& e : endpoints) {
        if (e.name == name) return e;
    }
    std::string known;
    for (const auto& e : endpoints) known += (known.empty() ? "" : ", ") + e.name;
    throw UsageError("unknown endpoint '" + name + "'; configured endpoints: " +
                (known.empty() ? "(none)" : known));
}

std::unique_ptr<EmbeddingProvider> AppConfig::make_embedder() const {
    if (embedding.kind == "mock_hash") return make_hash_embedder(embedding.dim);
    if (embedding.kind == "file") return make_file_embedder(embedding.path);
    if (embedding.kind == "remote") {
        RemoteEmbeddingConfig remote;
        remote.base_url = embedding.base_url;
        remote.model = embedding.model;
        remote.api_key_env = embedding.api_key_env;
        remote.max_retries = max_retries;
        remote.retry_base_ms = retry_base_ms;
        remote.timeout_sec = timeout_sec;
        return make_remote_embedder(std::move(remote));
    }
    throw Error("unknown embedding kind '" + embedding.kind + "'");
}

GatewayOptions AppConfig::gateway_options(bool use_cache) const {
    GatewayOptions options;
    options.cache_dir = cache_dir;
    options.use_cache = use_cache;
    options.max_retries = max_retries;
    options.retry_base_ms = retry_base_ms;
    options.timeout_sec = timeout_sec;
    options.max_in_flight = max_in_flight;
    return options;
}

json AppConfig::to_json() const {
    json j;
    json endpoints_json = json::array();
    for (const auto& e : endpoints) {
        json ej;
        ej["name"] = e.name;
        ej["kind"] = std::string(endpoint_kind_name(e.kind));
        if (!e.base_url.empty()) ej["base_url"] = e.base_url;
        if (!e.model.empty()) ej["model"] = e.model;
        ej["temperature"] = e.decoding.temperature;
        ej["max_output_tokens"] = e.decoding.max_output_tokens;
        if (!e.api_key_env.empty()) ej["api_key_env"] = e.api_key_env;
        if (!e.constant_label.empty()) ej["constant_label"] = e.constant_label;
        endpoints_json.push_back(ej);
    }
    j["endpoints"] = endpoints_json;
    j["embedding"] = {{"kind", embedding.kind}, {"dim", embedding.dim}};
    if (!embedding.base_url.empty()) j["embedding"]["base_url"] = embedding.base_url;
    if (!embedding.model.empty()) j["embedding"]["model"] = embedding.model;
    if (!embedding.path.empty()) j["embedding"]["path"] = embedding.path.string();
    j["cache_dir"] = cache_dir.string();
    j["max_in_flight"] = max_in_flight;
    j["max_retries"] = max_retries;
    j["retry_base_ms"] = retry_base_ms;
    j["timeout_sec"] = timeout_sec;
    return j;
}

}  // namespace iclmod
