#include "iclmod/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "iclmod/common.hpp"
#include "iclmod/tokenize.hpp"

namespace iclmod {

std::string_view task_name(Task t) {
    return t == Task::binary ? "binary" : "multiclass";
}

std::optional<Task> parse_task(std::string_view s) {
    if (s == "binary") return Task::binary;
    if (s == "multiclass") return Task::multiclass;
    return std::nullopt;
}

std::string task_label(const Sample& s, Task task) {
    if (task == Task::binary) {
        if (!s.binary_label) throw Error("sample " + s.id + " has no binary label");
        return std::string(binary_label_name(*s.binary_label));
    }
    if (!s.category) throw Error("sample " + s.id + " has no category");
    return std::string(category_name(*s.category));
}

std::string_view strategy_name(Strategy s) {
    switch (s) {
        case Strategy::random: return "random";
        case Strategy::lexical: return "lexical";
        case Strategy::semantic: return "semantic";
    }
    throw Error("unreachable strategy");
}

std::optional<Strategy> parse_strategy(std::string_view s) {
    if (s == "random") return Strategy::random;
    if (s == "lexical") return Strategy::lexical;
    if (s == "semantic") return Strategy::semantic;
    return std::nullopt;
}

LexicalIndex build_lexical_index(const std::vector<Sample>& entries) {
    LexicalIndex index;
    index.doc_lengths.resize(entries.size(), 0);
    std::uint64_t total_len = 0;
    for (std::size_t d = 0; d < entries.size(); ++d) {
        auto tokens = tokenize(entries[d].text);
        index.doc_lengths[d] = static_cast<std::uint32_t>(tokens.size());
        total_len += tokens.size();
        std::map<std::string, std::uint32_t> tf;
        for (auto& t : tokens) ++tf[t];
        for (auto& [term, count] : tf) {
            index.postings[term].push_back({static_cast<std::uint32_t>(d), count});
        }
    }
    index.avg_doc_length =
        entries.empty() ? 0.0 : static_cast<double>(total_len) / static_cast<double>(entries.size());
    return index;
}

double bm25_idf(std::size_t num_docs, std::size_t doc_freq) {
    double n = static_cast<double>(num_docs);
    double df = static_cast<double>(doc_freq);
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

DemonstrationPool DemonstrationPool::build(std::vector<Sample> entries, Task task) {
    for (const auto& s : entries) task_label(s, task);  // throws when missing
    DemonstrationPool pool;
    pool.entries = std::move(entries);
    pool.lexical = build_lexical_index(pool.entries);
    return pool;
}

void DemonstrationPool::attach_embeddings(std::vector<std::vector<double>> vectors) {
    if (vectors.size() != entries.size()) {
        throw Error("embedding index size " + std::to_string(vectors.size()) +
                    " does not match pool size " + std::to_string(entries.size()));
    }
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        double norm2 = 0;
        for (double v : vectors[i]) norm2 += v * v;
        if (std::abs(std::sqrt(norm2) - 1.0) > 1e-6) {
            throw Error("embedding " + std::to_string(i) + " is not unit norm");
        }
        if (!vectors.empty() && vectors[i].size() != vectors[0].size()) {
            throw Error("embedding dimension mismatch within index");
        }
    }
    embeddings = std::move(vectors);
}

namespace {

// Ranks all pool indices by (score desc, index asc) and keeps the first k.
SelectionResult take_top_k(std::vector<double> scores, std::size_t k, Strategy strategy) {
    SelectionResult result;
    result.strategy = strategy;
    result.k = k;
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (k > order.size()) {
        k = order.size();
        result.truncated_to_pool = true;
    }
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (scores[a] != scores[b]) return scores[a] > scores[b];
                          return a < b;
                      });
    order.resize(k);
    result.indices = order;
    result.scores.reserve(k);
    for (auto i : order) result.scores.push_back(scores[i]);
    return result;
}

}  // namespace

SelectionResult select_random(const DemonstrationPool& pool, Task task, std::size_t k,
                              std::uint64_t seed,
                              const std::map<std::string, std::size_t>* balance) {
    if (k > pool.size()) {
        throw Error("k=" + std::to_string(k) + " exceeds pool size " + std::to_string(pool.size()));
    }
    SelectionResult result;
    result.strategy = Strategy::random;
    result.k = k;
    result.seed = seed;
    Rng rng(seed);
    if (balance == nullptr) {
        result.indices = rng.sample_indices(pool.size(), k);
    } else {
        std::size_t quota_sum = 0;
        for (const auto& [label, q] : *balance) quota_sum += q;
        if (quota_sum != k) {
            throw Error("balance quotas sum to " + std::to_string(quota_sum) + ", expected k=" +
                        std::to_string(k));
        }
        std::map<std::string, std::vector<std::size_t>> by_label;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            by_label[task_label(pool.entries[i], task)].push_back(i);
        }
        for (const auto& [label, quota] : *balance) {
            auto it = by_label.find(label);
            std::size_t have = it == by_label.end() ? 0 : it->second.size();
            if (have < quota) {
                throw Error("quota for label '" + label + "' is " + std::to_string(quota) +
                            " but pool has " + std::to_string(have));
            }
            auto picks = rng.sample_indices(have, quota);
            for (auto p : picks) result.indices.push_back(it->second[p]);
        }
        rng.shuffle(result.indices);  // mix the per-label groups
    }
    result.scores.assign(result.indices.size(), 0.0);
    return result;
}

SelectionResult score_bm25(const std::string& query, const DemonstrationPool& pool, std::size_t k,
                           Bm25Params params) {
    const auto& index = pool.lexical;
    auto tokens = tokenize(query);
    std::set<std::string> terms(tokens.begin(), tokens.end());  // distinct query terms

    std::vector<double> scores(pool.size(), 0.0);
    bool any_hit = false;
    for (const auto& term : terms) {
        auto it = index.postings.find(term);
        if (it == index.postings.end()) continue;
        any_hit = true;
        double idf = bm25_idf(index.num_docs(), it->second.size());
        for (const auto& posting : it->second) {
            double tf = posting.tf;
            double len_norm = params.k1 * (1.0 - params.b +
                                           params.b * index.doc_lengths[posting.doc] /
                                               index.avg_doc_length);
            scores[posting.doc] += idf * (tf * (params.k1 + 1.0)) / (tf + len_norm);
        }
    }
    auto result = take_top_k(std::move(scores), k, Strategy::lexical);
    result.zero_score_fallback = !any_hit;
    return result;
}

SelectionResult select_semantic(const std::vector<double>& query_vec,
                                const DemonstrationPool& pool, std::size_t k) {
    if (!pool.embeddings) throw Error("pool has no embedding index");
    const auto& index = *pool.embeddings;
    if (!index.empty() && index[0].size() != query_vec.size()) {
        throw Error("query embedding dimension " + std::to_string(query_vec.size()) +
                    " does not match index dimension " + std::to_string(index[0].size()));
    }
    std::vector<double> scores(index.size(), 0.0);
    for (std::size_t d = 0; d < index.size(); ++d) {
        double dot = 0;
        for (std::size_t j = 0; j < query_vec.size(); ++j) dot += query_vec[j] * index[d][j];
        scores[d] = dot;  // cosine: both sides unit norm
    }
    return take_top_k(std::move(scores), k, Strategy::semantic);
}

}  // namespace iclmod
