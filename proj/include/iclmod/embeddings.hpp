#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace iclmod {

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    // Stable identity; partitions the on-disk cache.
    virtual std::string identity() const = 0;
    // One vector per input, not necessarily normalized. Throws on failure.
    virtual std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts) = 0;
};

struct EmbedOptions {
    std::filesystem::path cache_dir;  // empty disables caching
    std::size_t batch_size = 64;
};

// Embeds the texts through the provider, L2-normalizing every vector and
// caching results on disk keyed by (provider identity, content hash of the
// text). Throws on dimension mismatch within the result set.
std::vector<std::vector<double>> embed_texts(const std::vector<std::string>& texts,
                                             EmbeddingProvider& provider,
                                             const EmbedOptions& opts = {});

// OpenAI-compatible /v1/embeddings endpoint.
struct RemoteEmbeddingConfig {
    std::string base_url;  // e.g. http://localhost:8080/v1
    std::string model;
    std::string api_key_env;
    int max_retries = 3;
    int retry_base_ms = 100;
    int timeout_sec = 60;
};
std::unique_ptr<EmbeddingProvider> make_remote_embedder(RemoteEmbeddingConfig config);

// Precomputed vectors from a JSONL file of {"hash": <sha256 of text>,
// "vector": [...]}. A text whose hash is absent raises an error naming the
// hash.
std::unique_ptr<EmbeddingProvider> make_file_embedder(const std::filesystem::path& path);

// Deterministic hashed bag-of-tokens embedder for offline runs and tests.
std::unique_ptr<EmbeddingProvider> make_hash_embedder(std::size_t dim);

}  // namespace iclmod
