#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "iclmod/corpus.hpp"
#include "iclmod/embeddings.hpp"
#include "iclmod/gateway.hpp"
#include "iclmod/metrics.hpp"
#include "iclmod/prompting.hpp"
#include "iclmod/retrieval.hpp"

namespace iclmod {

// Everything a protocol run needs besides the data and the grid point.
struct RunContext {
    Gateway* gateway = nullptr;
    const ModelEndpoint* endpoint = nullptr;
    EmbeddingProvider* embedder = nullptr;  // required for the semantic strategy
    std::filesystem::path embed_cache_dir;
    bool keep_items = true;  // per-item records (incl. manifests) in reports
};

struct ItemOutcome {
    std::string query_id;
    std::string gold;                      // task label
    std::optional<std::string> predicted;  // task label, mapped back from the scheme
    std::string raw;                       // raw completion, kept for audit
    PredStatus status = PredStatus::parse_failure;
    std::vector<std::pair<std::string, std::string>> manifest;  // (id, verbalized label)
    std::size_t needle_position = static_cast<std::size_t>(-1);

    nlohmann::json to_json() const;
};

struct SeedRun {
    std::uint64_t seed = 0;
    Metrics metrics;
    std::vector<ItemOutcome> items;
};

struct EvalReport {
    std::string protocol;
    nlohmann::json config;  // grid point + provenance (dataset hash, endpoint identity)
    std::vector<SeedRun> per_seed;
    std::map<std::string, Aggregate> aggregate;
    std::vector<std::string> flags;

    nlohmann::json to_json() const;
    std::string to_csv() const;  // one row per seed
    // report_<name>.json + metrics_<name>.csv under dir.
    void save(const std::filesystem::path& dir, const std::string& name) const;
};

// Paper-default grids.
extern const std::vector<std::size_t> kDefaultShotList;     // 0,2,4,8,16,32,64,128
extern const std::vector<std::size_t> kDefaultNeedleSizes;  // 2,4,8,16,32,64,128
extern const std::vector<std::size_t> kDefaultOrderShots;   // 4,8,16,32,64

// select -> order -> render -> complete -> parse -> score, per seed.
EvalReport run_classification(const DatasetSplit& dataset, const PromptConfig& config,
                              const RunContext& ctx, const std::vector<std::uint64_t>& seeds);

// One report per shot count, shared seeds. Shots exceeding the pool are
// flagged and run with the full pool.
struct SweepResult {
    std::string sweep_id;
    std::vector<EvalReport> reports;
    std::vector<std::string> flags;
};
SweepResult run_shot_sweep(const DatasetSplit& dataset, PromptConfig base,
                           const std::vector<std::size_t>& shots, const RunContext& ctx,
                           const std::vector<std::uint64_t>& seeds);

// Holds each query's demonstration set fixed and reshuffles its order,
// reporting the F1 spread across permutations.
struct OrderPerturbationReport {
    nlohmann::json config;
    struct PerSeed {
        std::uint64_t seed = 0;
        std::vector<double> f1_per_permutation;
        double f1_std = 0;
        // [permutation][query] -> sorted manifest ids; filled when keep_items.
        std::vector<std::vector<std::vector<std::string>>> sorted_manifests;
    };
    std::vector<PerSeed> per_seed;
    double mean_f1_std = 0;
    bool manifests_consistent = false;

    nlohmann::json to_json() const;
    void save(const std::filesystem::path& dir, const std::string& name) const;
};
OrderPerturbationReport run_order_perturbation(const DatasetSplit& dataset,
                                               const PromptConfig& config, const RunContext& ctx,
                                               std::size_t permutations,
                                               const std::vector<std::uint64_t>& seeds);

// Same demonstration sets, different global label placements.
struct LabelPositionReport {
    nlohmann::json config;
    struct Placement {
        std::string name;
        std::vector<SeedRun> per_seed;
        std::map<std::string, Aggregate> aggregate;
    };
    std::vector<Placement> placements;
    bool manifests_consistent = false;

    nlohmann::json to_json() const;
    void save(const std::filesystem::path& dir, const std::string& name) const;
};
LabelPositionReport run_label_position(const DatasetSplit& dataset, const PromptConfig& config,
                                       const RunContext& ctx,
                                       const std::vector<OrderingPolicy>& placements,
                                       const std::vector<std::uint64_t>& seeds);

// n-1 random haystack demonstrations plus one exact copy of the query at a
// uniformly random slot; accuracy per haystack size.
struct NeedleReport {
    nlohmann::json config;
    struct PerSize {
        std::size_t n = 0;
        std::vector<SeedRun> per_seed;
        Aggregate accuracy;
    };
    std::vector<PerSize> sizes;

    nlohmann::json to_json() const;
    void save(const std::filesystem::path& dir, const std::string& name) const;
};
NeedleReport run_needle_haystack(const std::vector<Sample>& queries,
                                 const std::vector<Sample>& haystack, Task task,
                                 const std::vector<std::size_t>& sizes, const RunContext& ctx,
                                 const std::vector<std::uint64_t>& seeds);

// Table III definitions.
double unseen_gain(double excluded_accuracy, double zero_shot_accuracy);
double unseen_gap(double excluded_accuracy, double included_accuracy);

// Zero-shot / excluded / included binary runs against a single target
// category's test samples. The excluded setting provably contains no
// target-category demonstration (exhaustive manifest scan; violation throws).
struct UnseenCategoryReport {
    std::string category;
    nlohmann::json config;
    struct Setting {
        std::string name;
        std::vector<SeedRun> per_seed;
        Aggregate accuracy;
    };
    Setting zero_shot;
    Setting excluded;
    Setting included;
    double gain_over_zero_shot = 0;
    double gap_vs_included = 0;
    std::size_t excluded_prompts_scanned = 0;

    nlohmann::json to_json() const;
    void save(const std::filesystem::path& dir, const std::string& name) const;
};
UnseenCategoryReport run_unseen_category(const DatasetSplit& dataset, Category target,
                                         const RunContext& ctx,
                                         const std::vector<std::uint64_t>& seeds,
                                         std::size_t k = 64,
                                         std::size_t included_target_demos = 4);

}  // namespace iclmod
