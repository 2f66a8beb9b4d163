#include "iclmod/embeddings.hpp"

#include <chrono>
#include <cmath>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "iclmod/common.hpp"
#include "iclmod/http_util.hpp"
#include "iclmod/tokenize.hpp"
#include "json.hpp"

namespace iclmod {

using nlohmann::json;

namespace {

void l2_normalize(std::vector<double>& v) {
    double norm2 = 0;
    for (double x : v) norm2 += x * x;
    double norm = std::sqrt(norm2);
    if (norm == 0.0) throw Error("embedding has zero norm; cannot normalize");
    for (double& x : v) x /= norm;
}

std::filesystem::path cache_path(const EmbedOptions& opts, const std::string& provider_id,
                                 const std::string& hash) {
    return opts.cache_dir / "embeddings" / sha256_hex(provider_id).substr(0, 16) /
           (hash + ".json");
}

std::mutex g_cache_write_mu;

}  // namespace

std::vector<std::vector<double>> embed_texts(const std::vector<std::string>& texts,
                                             EmbeddingProvider& provider,
                                             const EmbedOptions& opts) {
    std::vector<std::vector<double>> out(texts.size());
    std::vector<std::string> hashes(texts.size());
    std::vector<std::size_t> misses;
    const bool use_cache = !opts.cache_dir.empty();
    std::unordered_map<std::string, std::size_t> first_seen;  // dedup inside the call

    for (std::size_t i = 0; i < texts.size(); ++i) {
        hashes[i] = sha256_hex(texts[i]);
        auto [it, inserted] = first_seen.emplace(hashes[i], i);
        if (!inserted) continue;  // filled from the twin below
        if (use_cache) {
            auto path = cache_path(opts, provider.identity(), hashes[i]);
            if (std::filesystem::exists(path)) {
                json rec = json::parse(read_file(path));
                out[i] = rec.at("vector").get<std::vector<double>>();
                continue;
            }
        }
        misses.push_back(i);
    }

    for (std::size_t start = 0; start < misses.size(); start += opts.batch_size) {
        std::size_t end = std::min(misses.size(), start + opts.batch_size);
        std::vector<std::string> batch;
        batch.reserve(end - start);
        for (std::size_t j = start; j < end; ++j) batch.push_back(texts[misses[j]]);
        auto vectors = provider.embed_batch(batch);
        if (vectors.size() != batch.size()) {
            throw Error("embedding provider returned " + std::to_string(vectors.size()) +
                        " vectors for " + std::to_string(batch.size()) + " inputs");
        }
        for (std::size_t j = start; j < end; ++j) {
            auto& vec = vectors[j - start];
            l2_normalize(vec);
            out[misses[j]] = std::move(vec);
        }
    }

    // Propagate duplicates and check dimensional consistency.
    std::size_t dim = 0;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (out[i].empty()) out[i] = out[first_seen.at(hashes[i])];
        if (dim == 0) dim = out[i].size();
        if (out[i].size() != dim) {
            throw Error("embedding dimension mismatch across batch: " + std::to_string(dim) +
                        " vs " + std::to_string(out[i].size()));
        }
    }

    if (use_cache) {
        std::lock_guard<std::mutex> lock(g_cache_write_mu);
        for (std::size_t i : misses) {
            json rec;
            rec["vector"] = out[i];
            write_file_atomic(cache_path(opts, provider.identity(), hashes[i]), rec.dump());
        }
    }
    return out;
}

namespace {

class RemoteEmbedder final : public EmbeddingProvider {
public:
    explicit RemoteEmbedder(RemoteEmbeddingConfig config) : config_(std::move(config)) {}

    std::string identity() const override {
        return "remote-embed|" + config_.base_url + "|" + config_.model;
    }

    std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts) override {
        json body;
        body["model"] = config_.model;
        body["input"] = texts;
        std::string last_error;
        for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(config_.retry_base_ms << (attempt - 1)));
            }
            auto resp = http_post_json(config_.base_url, "/embeddings", body.dump(),
                                       config_.api_key_env, config_.timeout_sec);
            if (!resp.ok) {
                last_error = resp.error;
                if (!resp.retryable) break;
                continue;
            }
            json parsed = json::parse(resp.body);
            const auto& data = parsed.at("data");
            std::vector<std::vector<double>> vectors(texts.size());
            for (const auto& item : data) {
                std::size_t index = item.at("index").get<std::size_t>();
                if (index >= vectors.size()) throw Error("embedding response index out of range");
                vectors[index] = item.at("embedding").get<std::vector<double>>();
            }
            return vectors;
        }
        throw Error("embedding endpoint failed after retries: " + last_error);
    }

private:
    RemoteEmbeddingConfig config_;
};

class FileEmbedder final : public EmbeddingProvider {
public:
    explicit FileEmbedder(const std::filesystem::path& path) : path_(path) {
        for_each_line(path, [&](std::size_t line_no, std::string_view line) {
            if (trim(line).empty()) return;
            json rec;
            try {
                rec = json::parse(line);
                vectors_[rec.at("hash").get<std::string>()] =
                    rec.at("vector").get<std::vector<double>>();
            } catch (const json::exception& e) {
                throw Error("bad embedding file " + path.string() + " line " +
                            std::to_string(line_no) + ": " + e.what());
            }
        });
    }

    std::string identity() const override { return "file-embed|" + path_.string(); }

    std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts) override {
        std::vector<std::vector<double>> out;
        out.reserve(texts.size());
        for (const auto& text : texts) {
            auto hash = sha256_hex(text);
            auto it = vectors_.find(hash);
            if (it == vectors_.end()) {
                throw Error("precomputed embedding file has no vector for text hash " + hash);
            }
            out.push_back(it->second);
        }
        return out;
    }

private:
    std::filesystem::path path_;
    std::unordered_map<std::string, std::vector<double>> vectors_;
};

class HashEmbedder final : public EmbeddingProvider {
public:
    explicit HashEmbedder(std::size_t dim) : dim_(dim) {
        if (dim_ == 0) throw Error("hash embedder dimension must be positive");
    }

    std::string identity() const override { return "hash-embed|" + std::to_string(dim_); }

    std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts) override {
        std::vector<std::vector<double>> out;
        out.reserve(texts.size());
        for (const auto& text : texts) {
            std::vector<double> v(dim_, 0.0);
            for (const auto& token : tokenize(text)) {
                std::uint64_t h = fnv1a64(token);
                double sign = (h >> 32) & 1 ? 1.0 : -1.0;
                v[h % dim_] += sign;
            }
            bool all_zero = true;
            for (double x : v) {
                if (x != 0.0) {
                    all_zero = false;
                    break;
                }
            }
            if (all_zero) v[0] = 1.0;  // keep the unit-norm postcondition satisfiable
            out.push_back(std::move(v));
        }
        return out;
    }

private:
    std::size_t dim_;
};

}  // namespace

std::unique_ptr<EmbeddingProvider> make_remote_embedder(RemoteEmbeddingConfig config) {
    return std::make_unique<RemoteEmbedder>(std::move(config));
}

std::unique_ptr<EmbeddingProvider> make_file_embedder(const std::filesystem::path& path) {
    return std::make_unique<FileEmbedder>(path);
}

std::unique_ptr<EmbeddingProvider> make_hash_embedder(std::size_t dim) {
    return std::make_unique<HashEmbedder>(dim);
}

}  // namespace iclmod
