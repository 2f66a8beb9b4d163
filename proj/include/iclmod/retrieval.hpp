#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "iclmod/corpus.hpp"

namespace iclmod {

enum class Task { binary, multiclass };

std::string_view task_name(Task t);
std::optional<Task> parse_task(std::string_view s);

// The label a demonstration carries under the given task: "benign"/"illicit"
// or a unified category name. Throws when the sample is missing it.
std::string task_label(const Sample& s, Task task);

enum class Strategy { random, lexical, semantic };

std::string_view strategy_name(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view s);

// Okapi BM25 parameters. The +1 inside the log keeps IDF (and so scores)
// non-negative for any document frequency.
struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct LexicalIndex {
    struct Posting {
        std::uint32_t doc = 0;
        std::uint32_t tf = 0;
    };
    std::unordered_map<std::string, std::vector<Posting>> postings;
    std::vector<std::uint32_t> doc_lengths;
    double avg_doc_length = 0.0;

    std::size_t num_docs() const { return doc_lengths.size(); }
};

LexicalIndex build_lexical_index(const std::vector<Sample>& entries);

double bm25_idf(std::size_t num_docs, std::size_t doc_freq);

struct DemonstrationPool {
    std::vector<Sample> entries;
    LexicalIndex lexical;
    std::optional<std::vector<std::vector<double>>> embeddings;  // unit norm, aligned to entries

    // Validates that every entry carries the task's label and builds the
    // lexical index.
    static DemonstrationPool build(std::vector<Sample> entries, Task task);

    // Attaches unit-normalized vectors (one per entry, norms within 1e-6 of 1).
    void attach_embeddings(std::vector<std::vector<double>> vectors);

    std::size_t size() const { return entries.size(); }
};

struct SelectionResult {
    std::vector<std::size_t> indices;  // into pool.entries, result order
    std::vector<double> scores;        // aligned with indices
    Strategy strategy = Strategy::random;
    std::size_t k = 0;
    std::optional<std::uint64_t> seed;
    bool truncated_to_pool = false;   // k exceeded pool size (lexical/semantic)
    bool zero_score_fallback = false; // query shared no token with the index
};

// Uniform sample without replacement, in random order. With `balance`,
// quotas (task label -> count) must sum to k and be satisfiable; the picked
// entries are then shuffled together.
SelectionResult select_random(const DemonstrationPool& pool, Task task, std::size_t k,
                              std::uint64_t seed,
                              const std::map<std::string, std::size_t>* balance = nullptr);

// Top-k by Okapi BM25 (descending score, ties by ascending pool index).
// A query with no tokens in common with the index yields all-zero scores and
// index-order ranking, flagged via zero_score_fallback.
SelectionResult score_bm25(const std::string& query, const DemonstrationPool& pool, std::size_t k,
                           Bm25Params params = {});

// Top-k by cosine similarity against the attached embedding index
// (descending, ties by ascending pool index). Exhaustive scan.
SelectionResult select_semantic(const std::vector<double>& query_vec,
                                const DemonstrationPool& pool, std::size_t k);

}  // namespace iclmod
