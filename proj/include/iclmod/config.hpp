#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "iclmod/embeddings.hpp"
#include "iclmod/gateway.hpp"
#include "iclmod/prompting.hpp"
#include "json.hpp"

namespace iclmod {

struct EmbeddingSettings {
    std::string kind = "mock_hash";  // remote | file | mock_hash
    std::string base_url;
    std::string model;
    std::string api_key_env;
    std::filesystem::path path;  // file kind
    std::size_t dim = 64;        // mock_hash kind
};

// The committed config file: endpoint registry, embedding provider, cache
// location, limits, and prompt defaults. Secrets only ever come from the
// environment variables the endpoints name.
struct AppConfig {
    std::vector<ModelEndpoint> endpoints;
    EmbeddingSettings embedding;
    std::filesystem::path cache_dir = ".iclmod-cache";
    int max_in_flight = 4;
    int max_retries = 3;
    int retry_base_ms = 100;
    int timeout_sec = 60;
    PromptConfig prompt;

    static AppConfig load(const std::filesystem::path& path);

    // Errors list the configured endpoint names.
    const ModelEndpoint& endpoint(const std::string& name) const;

    std::unique_ptr<EmbeddingProvider> make_embedder() const;
    GatewayOptions gateway_options(bool use_cache = true) const;

    nlohmann::json to_json() const;  // resolved config, echoed into run manifests
};

PromptConfig prompt_config_from_json(const nlohmann::json& j);

}  // namespace iclmod
