#include "iclmod/protocols.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "iclmod/common.hpp"

namespace iclmod {

using nlohmann::json;

const std::vector<std::size_t> kDefaultShotList = {0, 2, 4, 8, 16, 32, 64, 128};
const std::vector<std::size_t> kDefaultNeedleSizes = {2, 4, 8, 16, 32, 64, 128};
const std::vector<std::size_t> kDefaultOrderShots = {4, 8, 16, 32, 64};

namespace {

// Seed streams: one per purpose so draws never alias across stages.
constexpr std::uint64_t kSelectStream = 1;
constexpr std::uint64_t kOrderStream = 2;
constexpr std::uint64_t kNeedleStream = 3;
constexpr std::uint64_t kPermStream = 4;
constexpr std::uint64_t kMixStream = 5;
constexpr std::uint64_t kHaystackStream = 6;
constexpr std::uint64_t kUnseenStream = 7;

DemoRef make_demo(const Sample& s, Task task) {
    return DemoRef{s.id, s.text, task_label(s, task)};
}

std::vector<DemoRef> materialize(const DemonstrationPool& pool, const SelectionResult& sel,
                                 Task task) {
    std::vector<DemoRef> demos;
    demos.reserve(sel.indices.size());
    for (auto i : sel.indices) demos.push_back(make_demo(pool.entries[i], task));
    return demos;
}

void require_gateway(const RunContext& ctx) {
    if (ctx.gateway == nullptr || ctx.endpoint == nullptr) {
        throw Error("run context needs a gateway and an endpoint");
    }
}

ItemOutcome eval_one(const RunContext& ctx, const PromptConfig& config,
                     const std::vector<DemoRef>& demos, const Sample& query, Task task) {
    ItemOutcome outcome;
    outcome.query_id = query.id;
    outcome.gold = task_label(query, task);
    auto prompt = render_prompt(config, demos, query.text);
    outcome.manifest = prompt.manifest;
    auto prediction = ctx.gateway->complete(prompt, *ctx.endpoint);
    outcome.raw = prediction.raw;
    outcome.status = prediction.status;
    if (prediction.status == PredStatus::ok) {
        outcome.predicted = unverbalize_label(task, *prediction.parsed, config.label_scheme,
                                              config.abstract_style);
    }
    return outcome;
}

Metrics metrics_from_items(const std::vector<ItemOutcome>& items, Task task) {
    std::vector<ScoredItem> scored;
    scored.reserve(items.size());
    for (const auto& item : items) scored.push_back({item.gold, item.predicted});
    if (task == Task::binary) return compute_binary_metrics(scored, "illicit");
    std::vector<std::string> classes;
    for (Category c : all_categories()) classes.emplace_back(category_name(c));
    return compute_multiclass_metrics(scored, classes);
}

std::vector<std::vector<double>> embed_all(const RunContext& ctx,
                                           const std::vector<std::string>& texts) {
    if (ctx.embedder == nullptr) {
        throw Error("semantic strategy requires an embedding provider");
    }
    EmbedOptions opts;
    opts.cache_dir = ctx.embed_cache_dir;
    return embed_texts(texts, *ctx.embedder, opts);
}

json config_to_json(const PromptConfig& config) {
    json j;
    j["task"] = std::string(task_name(config.task));
    j["k"] = config.k;
    j["strategy"] = std::string(strategy_name(config.strategy));
    j["label_scheme"] = std::string(label_scheme_name(config.label_scheme));
    j["abstract_style"] = config.abstract_style == AbstractStyle::digits ? "digits" : "letters";
    j["ordering"] = config.ordering.to_string();
    j["needle"] = config.needle;
    j["truncate_chars"] = config.truncate_chars;
    return j;
}

json provenance_json(const DatasetSplit& dataset, const RunContext& ctx,
                     const std::vector<std::uint64_t>& seeds) {
    json j;
    j["dataset_hash"] = dataset.content_hash();
    j["endpoint"] = ctx.endpoint->identity();
    j["seeds"] = seeds;
    j["n_train"] = dataset.train.size();
    j["n_test"] = dataset.test.size();
    return j;
}

json aggregate_to_json(const std::map<std::string, Aggregate>& agg) {
    json j;
    for (const auto& [name, a] : agg) {
        j[name] = {{"mean", a.mean}, {"std", a.std}};
        if (a.single_seed) j[name]["single_seed"] = true;
    }
    return j;
}

std::vector<std::string> sorted_manifest_ids(const ItemOutcome& item) {
    std::vector<std::string> ids;
    ids.reserve(item.manifest.size());
    for (const auto& [id, label] : item.manifest) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::string fmt6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

json ItemOutcome::to_json() const {
    json j;
    j["id"] = query_id;
    j["gold"] = gold;
    j["pred"] = predicted ? json(*predicted) : json(nullptr);
    j["status"] = std::string(pred_status_name(status));
    j["raw"] = raw;
    json manifest_json = json::array();
    for (const auto& [id, label] : manifest) manifest_json.push_back({id, label});
    j["manifest"] = manifest_json;
    if (needle_position != static_cast<std::size_t>(-1)) j["needle_position"] = needle_position;
    return j;
}

json EvalReport::to_json() const {
    json j;
    j["schema_version"] = 1;
    j["protocol"] = protocol;
    j["config"] = config;
    j["std_definition"] = "sample(n-1)";
    json seeds_json = json::array();
    for (const auto& run : per_seed) {
        json r;
        r["seed"] = run.seed;
        r["metrics"] = run.metrics.to_json();
        if (!run.items.empty()) {
            json items_json = json::array();
            for (const auto& item : run.items) items_json.push_back(item.to_json());
            r["items"] = items_json;
        }
        seeds_json.push_back(r);
    }
    j["per_seed"] = seeds_json;
    j["aggregate"] = aggregate_to_json(aggregate);
    if (!flags.empty()) j["flags"] = flags;
    return j;
}

std::string EvalReport::to_csv() const {
    std::string out =
        "protocol,task,k,strategy,label_scheme,ordering,seed,precision,recall,f1,fpr,accuracy,n,"
        "n_failures\n";
    for (const auto& run : per_seed) {
        out += protocol + "," + config.value("task", "") + "," +
               std::to_string(config.value("k", std::size_t{0})) + "," +
               config.value("strategy", "") + "," + config.value("label_scheme", "") + "," +
               config.value("ordering", "") + "," + std::to_string(run.seed) + "," +
               fmt6(run.metrics.precision) + "," + fmt6(run.metrics.recall) + "," +
               fmt6(run.metrics.f1) + "," + fmt6(run.metrics.fpr) + "," +
               fmt6(run.metrics.accuracy) + "," + std::to_string(run.metrics.n) + "," +
               std::to_string(run.metrics.n_failures) + "\n";
    }
    return out;
}

void EvalReport::save(const std::filesystem::path& dir, const std::string& name) const {
    std::filesystem::create_directories(dir);
    write_file_atomic(dir / ("report_" + name + ".json"), to_json().dump(2) + "\n");
    write_file_atomic(dir / ("metrics_" + name + ".csv"), to_csv());
}

EvalReport run_classification(const DatasetSplit& dataset, const PromptConfig& config,
                              const RunContext& ctx, const std::vector<std::uint64_t>& seeds) {
    require_gateway(ctx);
    config.validate();
    if (seeds.empty()) throw Error("at least one seed is required");
    const Task task = config.task;
    auto pool = DemonstrationPool::build(dataset.train, task);
    const auto& queries = dataset.test;
    if (queries.empty()) throw Error("dataset has no test samples");

    std::vector<std::vector<double>> query_vecs;
    if (config.strategy == Strategy::semantic && config.k > 0) {
        std::vector<std::string> texts;
        for (const auto& s : pool.entries) texts.push_back(s.text);
        pool.attach_embeddings(embed_all(ctx, texts));
        texts.clear();
        for (const auto& s : queries) texts.push_back(s.text);
        query_vecs = embed_all(ctx, texts);
    }

    EvalReport report;
    report.protocol = "classification";
    report.config = config_to_json(config);
    report.config["provenance"] = provenance_json(dataset, ctx, seeds);

    std::vector<Metrics> per_seed_metrics;
    for (std::uint64_t seed : seeds) {
        std::vector<ItemOutcome> items(queries.size());
        parallel_for(queries.size(), ctx.gateway->max_in_flight(), [&](std::size_t i) {
            const Sample& query = queries[i];
            std::vector<DemoRef> demos;
            if (config.k > 0) {
                SelectionResult sel;
                switch (config.strategy) {
                    case Strategy::random:
                        sel = select_random(pool, task, config.k,
                                            derive_seed(seed, kSelectStream, i));
                        break;
                    case Strategy::lexical:
                        sel = score_bm25(query.text, pool, config.k);
                        break;
                    case Strategy::semantic:
                        sel = select_semantic(query_vecs[i], pool, config.k);
                        break;
                }
                demos = apply_ordering(materialize(pool, sel, task), config.ordering,
                                       derive_seed(seed, kOrderStream, i));
            }
            std::size_t needle_pos = static_cast<std::size_t>(-1);
            if (config.needle) {
                DemoRef needle{"needle:" + query.id, query.text, task_label(query, task)};
                demos = insert_needle(std::move(demos), std::move(needle),
                                      derive_seed(seed, kNeedleStream, i), &needle_pos);
            }
            items[i] = eval_one(ctx, config, demos, query, task);
            items[i].needle_position = needle_pos;
        });
        SeedRun run;
        run.seed = seed;
        run.metrics = metrics_from_items(items, task);
        per_seed_metrics.push_back(run.metrics);
        if (ctx.keep_items) run.items = std::move(items);
        report.per_seed.push_back(std::move(run));
    }
    report.aggregate = aggregate_seeds(per_seed_metrics);
    return report;
}

SweepResult run_shot_sweep(const DatasetSplit& dataset, PromptConfig base,
                           const std::vector<std::size_t>& shots, const RunContext& ctx,
                           const std::vector<std::uint64_t>& seeds) {
    if (shots.empty()) throw Error("shot list is empty");
    SweepResult result;
    {
        json id_src;
        id_src["config"] = config_to_json(base);
        id_src["shots"] = shots;
        id_src["seeds"] = seeds;
        id_src["dataset"] = dataset.content_hash();
        result.sweep_id = sha256_hex(id_src.dump()).substr(0, 12);
    }
    const std::size_t pool_size = dataset.train.size();
    for (std::size_t shot : shots) {
        PromptConfig config = base;
        config.k = shot;
        std::string flag;
        if (shot > pool_size) {
            flag = "shot " + std::to_string(shot) + " exceeds pool size " +
                   std::to_string(pool_size) + "; ran with the full pool";
            result.flags.push_back(flag);
            config.k = pool_size;
        }
        auto report = run_classification(dataset, config, ctx, seeds);
        report.protocol = "shot_sweep";
        report.config["shot"] = shot;
        report.config["sweep_id"] = result.sweep_id;
        if (!flag.empty()) report.flags.push_back(flag);
        result.reports.push_back(std::move(report));
    }
    return result;
}

json OrderPerturbationReport::to_json() const {
    json j;
    j["schema_version"] = 1;
    j["protocol"] = "order_perturbation";
    j["config"] = config;
    j["std_definition"] = "sample(n-1)";
    json seeds_json = json::array();
    for (const auto& run : per_seed) {
        json r;
        r["seed"] = run.seed;
        r["f1_per_permutation"] = run.f1_per_permutation;
        r["f1_std"] = run.f1_std;
        seeds_json.push_back(r);
    }
    j["per_seed"] = seeds_json;
    j["mean_f1_std"] = mean_f1_std;
    j["manifests_consistent"] = manifests_consistent;
    return j;
}

void OrderPerturbationReport::save(const std::filesystem::path& dir,
                                   const std::string& name) const {
    std::filesystem::create_directories(dir);
    write_file_atomic(dir / ("report_" + name + ".json"), to_json().dump(2) + "\n");
}

OrderPerturbationReport run_order_perturbation(const DatasetSplit& dataset,
                                               const PromptConfig& config, const RunContext& ctx,
                                               std::size_t permutations,
                                               const std::vector<std::uint64_t>& seeds) {
    require_gateway(ctx);
    if (config.k < 2) throw Error("order perturbation requires k >= 2");
    if (permutations == 0) throw Error("at least one permutation is required");
    const Task task = config.task;
    auto pool = DemonstrationPool::build(dataset.train, task);
    const auto& queries = dataset.test;
    if (queries.empty()) throw Error("dataset has no test samples");

    std::vector<std::vector<double>> query_vecs;
    if (config.strategy == Strategy::semantic) {
        std::vector<std::string> texts;
        for (const auto& s : pool.entries) texts.push_back(s.text);
        pool.attach_embeddings(embed_all(ctx, texts));
        texts.clear();
        for (const auto& s : queries) texts.push_back(s.text);
        query_vecs = embed_all(ctx, texts);
    }

    OrderPerturbationReport report;
    report.config = config_to_json(config);
    report.config["permutations"] = permutations;
    report.config["provenance"] = provenance_json(dataset, ctx, seeds);
    report.manifests_consistent = true;

    std::vector<double> stds;
    for (std::uint64_t seed : seeds) {
        // One demonstration set per query, fixed across permutations.
        std::vector<std::vector<DemoRef>> demo_sets(queries.size());
        for (std::size_t i = 0; i < queries.size(); ++i) {
            SelectionResult sel;
            switch (config.strategy) {
                case Strategy::random:
                    sel = select_random(pool, task, config.k, derive_seed(seed, kSelectStream, i));
                    break;
                case Strategy::lexical:
                    sel = score_bm25(queries[i].text, pool, config.k);
                    break;
                case Strategy::semantic:
                    sel = select_semantic(query_vecs[i], pool, config.k);
                    break;
            }
            demo_sets[i] = materialize(pool, sel, task);
        }

        OrderPerturbationReport::PerSeed per_seed;
        per_seed.seed = seed;
        std::vector<std::vector<std::string>> reference;  // [query] sorted ids of permutation 0
        for (std::size_t p = 0; p < permutations; ++p) {
            std::uint64_t perm_seed = derive_seed(seed, kPermStream, p);
            std::vector<ItemOutcome> items(queries.size());
            parallel_for(queries.size(), ctx.gateway->max_in_flight(), [&](std::size_t i) {
                OrderingPolicy shuffle{OrderingKind::shuffled, ""};
                auto ordered =
                    apply_ordering(demo_sets[i], shuffle, derive_seed(perm_seed, kOrderStream, i));
                items[i] = eval_one(ctx, config, ordered, queries[i], task);
            });
            std::vector<std::vector<std::string>> manifests(queries.size());
            for (std::size_t i = 0; i < queries.size(); ++i) {
                manifests[i] = sorted_manifest_ids(items[i]);
            }
            if (p == 0) {
                reference = manifests;
            } else if (manifests != reference) {
                throw Error("order perturbation broke protocol isolation: demonstration "
                            "multiset changed across permutations");
            }
            per_seed.f1_per_permutation.push_back(metrics_from_items(items, task).f1);
            if (ctx.keep_items) per_seed.sorted_manifests.push_back(std::move(manifests));
        }
        per_seed.f1_std = aggregate_series(per_seed.f1_per_permutation).std;
        stds.push_back(per_seed.f1_std);
        report.per_seed.push_back(std::move(per_seed));
    }
    report.mean_f1_std = aggregate_series(stds).mean;
    return report;
}

json LabelPositionReport::to_json() const {
    json j;
    j["schema_version"] = 1;
    j["protocol"] = "label_position";
    j["config"] = config;
    json placements_json = json::array();
    for (const auto& placement : placements) {
        json p;
        p["placement"] = placement.name;
        json seeds_json = json::array();
        for (const auto& run : placement.per_seed) {
            json r;
            r["seed"] = run.seed;
            r["metrics"] = run.metrics.to_json();
            seeds_json.push_back(r);
        }
        p["per_seed"] = seeds_json;
        p["aggregate"] = aggregate_to_json(placement.aggregate);
        placements_json.push_back(p);
    }
    j["placements"] = placements_json;
    j["manifests_consistent"] = manifests_consistent;
    return j;
}

void LabelPositionReport::save(const std::filesystem::path& dir, const std::string& name) const {
    std::filesystem::create_directories(dir);
    write_file_atomic(dir / ("report_" + name + ".json"), to_json().dump(2) + "\n");
}

LabelPositionReport run_label_position(const DatasetSplit& dataset, const PromptConfig& config,
                                       const RunContext& ctx,
                                       const std::vector<OrderingPolicy>& placements,
                                       const std::vector<std::uint64_t>& seeds) {
    require_gateway(ctx);
    if (config.task != Task::binary) throw Error("label position study is binary-task only");
    if (config.k < 2 || config.k % 2 != 0) {
        throw Error("label position study needs an even k >= 2 for the per-label split");
    }
    if (placements.empty()) throw Error("no placements given");
    auto pool = DemonstrationPool::build(dataset.train, Task::binary);
    const auto& queries = dataset.test;
    if (queries.empty()) throw Error("dataset has no test samples");

    LabelPositionReport report;
    report.config = config_to_json(config);
    report.config["provenance"] = provenance_json(dataset, ctx, seeds);
    report.manifests_consistent = true;

    std::map<std::string, std::size_t> quotas = {{"benign", config.k / 2},
                                                 {"illicit", config.k / 2}};
    report.placements.resize(placements.size());
    for (std::size_t pi = 0; pi < placements.size(); ++pi) {
        report.placements[pi].name = placements[pi].kind == OrderingKind::shuffled
                                         ? "mixed"
                                         : placements[pi].to_string();
    }

    for (std::uint64_t seed : seeds) {
        // Balanced selection shared by every placement; only the order moves.
        std::vector<std::vector<DemoRef>> demo_sets(queries.size());
        for (std::size_t i = 0; i < queries.size(); ++i) {
            auto sel =
                select_random(pool, Task::binary, config.k, derive_seed(seed, kSelectStream, i),
                              &quotas);
            demo_sets[i] = materialize(pool, sel, Task::binary);
        }
        std::vector<std::vector<std::string>> reference;
        for (std::size_t pi = 0; pi < placements.size(); ++pi) {
            std::vector<ItemOutcome> items(queries.size());
            parallel_for(queries.size(), ctx.gateway->max_in_flight(), [&](std::size_t i) {
                auto ordered = apply_ordering(demo_sets[i], placements[pi],
                                              derive_seed(seed, kMixStream, i));
                items[i] = eval_one(ctx, config, ordered, queries[i], Task::binary);
            });
            std::vector<std::vector<std::string>> manifests(queries.size());
            for (std::size_t i = 0; i < queries.size(); ++i) {
                manifests[i] = sorted_manifest_ids(items[i]);
            }
            if (pi == 0) {
                reference = manifests;
            } else if (manifests != reference) {
                throw Error("label position study broke protocol isolation: demonstration "
                            "multiset changed across placements");
            }
            SeedRun run;
            run.seed = seed;
            run.metrics = metrics_from_items(items, Task::binary);
            if (ctx.keep_items) run.items = std::move(items);
            report.placements[pi].per_seed.push_back(std::move(run));
        }
    }
    for (auto& placement : report.placements) {
        std::vector<Metrics> ms;
        for (const auto& run : placement.per_seed) ms.push_back(run.metrics);
        placement.aggregate = aggregate_seeds(ms);
    }
    return report;
}

json NeedleReport::to_json() const {
    json j;
    j["schema_version"] = 1;
    j["protocol"] = "needle_haystack";
    j["config"] = config;
    json sizes_json = json::array();
    for (const auto& size : sizes) {
        json s;
        s["n"] = size.n;
        s["accuracy"] = {{"mean", size.accuracy.mean}, {"std", size.accuracy.std}};
        json seeds_json = json::array();
        for (const auto& run : size.per_seed) {
            json r;
            r["seed"] = run.seed;
            r["accuracy"] = run.metrics.accuracy;
            r["n_failures"] = run.metrics.n_failures;
            seeds_json.push_back(r);
        }
        s["per_seed"] = seeds_json;
        sizes_json.push_back(s);
    }
    j["sizes"] = sizes_json;
    return j;
}

void NeedleReport::save(const std::filesystem::path& dir, const std::string& name) const {
    std::filesystem::create_directories(dir);
    write_file_atomic(dir / ("report_" + name + ".json"), to_json().dump(2) + "\n");
}

NeedleReport run_needle_haystack(const std::vector<Sample>& queries,
                                 const std::vector<Sample>& haystack, Task task,
                                 const std::vector<std::size_t>& sizes, const RunContext& ctx,
                                 const std::vector<std::uint64_t>& seeds) {
    require_gateway(ctx);
    if (queries.empty()) throw Error("no queries given");
    if (sizes.empty()) throw Error("no haystack sizes given");
    {
        std::set<std::string> query_ids;
        for (const auto& q : queries) query_ids.insert(q.id);
        for (const auto& h : haystack) {
            if (query_ids.count(h.id) > 0) {
                throw Error("haystack pool overlaps the queries (id " + h.id + ")");
            }
        }
    }
    std::size_t max_n = *std::max_element(sizes.begin(), sizes.end());
    if (max_n < 1) throw Error("haystack sizes must be >= 1");
    if (haystack.size() < max_n - 1) {
        throw Error("haystack pool of " + std::to_string(haystack.size()) +
                    " cannot fill n-1 = " + std::to_string(max_n - 1) + " slots");
    }

    PromptConfig config;
    config.task = task;
    config.needle = true;

    NeedleReport report;
    report.config = config_to_json(config);
    report.config["sizes"] = sizes;
    report.config["endpoint"] = ctx.endpoint->identity();
    report.config["seeds"] = seeds;

    for (std::size_t n : sizes) {
        NeedleReport::PerSize per_size;
        per_size.n = n;
        std::vector<double> accs;
        for (std::uint64_t seed : seeds) {
            std::vector<ItemOutcome> items(queries.size());
            parallel_for(queries.size(), ctx.gateway->max_in_flight(), [&](std::size_t i) {
                const Sample& query = queries[i];
                // Candidates exclude exact text twins of the query so the
                // needle stays unique in the prompt.
                std::vector<std::size_t> candidates;
                for (std::size_t h = 0; h < haystack.size(); ++h) {
                    if (haystack[h].text != query.text) candidates.push_back(h);
                }
                if (candidates.size() < n - 1) {
                    throw Error("haystack pool too small for query " + query.id +
                                " after excluding text twins");
                }
                Rng rng(derive_seed(derive_seed(seed, kHaystackStream, n), 0, i));
                auto picks = rng.sample_indices(candidates.size(), n - 1);
                std::vector<DemoRef> demos;
                demos.reserve(n);
                for (auto p : picks) demos.push_back(make_demo(haystack[candidates[p]], task));
                DemoRef needle{"needle:" + query.id, query.text, task_label(query, task)};
                std::size_t pos = 0;
                demos = insert_needle(std::move(demos), std::move(needle),
                                      derive_seed(derive_seed(seed, kNeedleStream, n), 0, i), &pos);
                auto cfg = config;
                cfg.k = n;
                items[i] = eval_one(ctx, cfg, demos, query, task);
                items[i].needle_position = pos;
            });
            SeedRun run;
            run.seed = seed;
            run.metrics = metrics_from_items(items, task);
            accs.push_back(run.metrics.accuracy);
            if (ctx.keep_items) run.items = std::move(items);
            per_size.per_seed.push_back(std::move(run));
        }
        per_size.accuracy = aggregate_series(accs);
        report.sizes.push_back(std::move(per_size));
    }
    return report;
}

double unseen_gain(double excluded_accuracy, double zero_shot_accuracy) {
    return excluded_accuracy - zero_shot_accuracy;
}

double unseen_gap(double excluded_accuracy, double included_accuracy) {
    return excluded_accuracy - included_accuracy;
}

json UnseenCategoryReport::to_json() const {
    json j;
    j["schema_version"] = 1;
    j["protocol"] = "unseen_category";
    j["category"] = category;
    j["config"] = config;
    auto setting_json = [](const Setting& s) {
        json out;
        out["accuracy"] = {{"mean", s.accuracy.mean}, {"std", s.accuracy.std}};
        json seeds_json = json::array();
        for (const auto& run : s.per_seed) {
            json r;
            r["seed"] = run.seed;
            r["accuracy"] = run.metrics.accuracy;
            r["n_failures"] = run.metrics.n_failures;
            seeds_json.push_back(r);
        }
        out["per_seed"] = seeds_json;
        return out;
    };
    j["zero_shot"] = setting_json(zero_shot);
    j["excluded"] = setting_json(excluded);
    j["included"] = setting_json(included);
    j["gain_over_zero_shot"] = gain_over_zero_shot;
    j["gap_vs_included"] = gap_vs_included;
    j["excluded_prompts_scanned"] = excluded_prompts_scanned;
    return j;
}

void UnseenCategoryReport::save(const std::filesystem::path& dir, const std::string& name) const {
    std::filesystem::create_directories(dir);
    write_file_atomic(dir / ("report_" + name + ".json"), to_json().dump(2) + "\n");
}

UnseenCategoryReport run_unseen_category(const DatasetSplit& dataset, Category target,
                                         const RunContext& ctx,
                                         const std::vector<std::uint64_t>& seeds,
                                         std::size_t k, std::size_t included_target_demos) {
    require_gateway(ctx);
    if (k < 2 || k % 2 != 0) throw Error("unseen-category protocol needs an even k >= 2");
    const std::size_t half = k / 2;
    const std::size_t t = included_target_demos;
    if (t > half) throw Error("included_target_demos exceeds the per-label share");

    std::vector<Sample> queries;
    for (const auto& s : dataset.test) {
        if (s.category && *s.category == target) queries.push_back(s);
    }
    if (queries.empty()) {
        throw Error("category '" + std::string(category_name(target)) + "' has no test samples");
    }

    // Index the train pool by role.
    std::vector<std::size_t> benign_ix, illicit_ix, target_ix, nontarget_ix;
    std::set<Category> other_cats;
    std::map<std::string, Category> category_by_id;
    for (std::size_t i = 0; i < dataset.train.size(); ++i) {
        const auto& s = dataset.train[i];
        if (!s.category) throw Error("unseen-category protocol needs category-labeled train data");
        category_by_id[s.id] = *s.category;
        if (*s.category == Category::benign) {
            benign_ix.push_back(i);
        } else {
            illicit_ix.push_back(i);
            if (*s.category == target) target_ix.push_back(i);
            else {
                nontarget_ix.push_back(i);
                other_cats.insert(*s.category);
            }
        }
    }
    if (target != Category::benign && other_cats.size() < 2) {
        throw Error("pool needs illicit samples from at least two non-target categories");
    }

    const bool target_is_benign = target == Category::benign;
    if (target_is_benign) {
        if (illicit_ix.size() < k) throw Error("pool has too few illicit samples for k");
        if (benign_ix.size() < t) throw Error("pool has too few benign samples for the included setting");
    } else {
        if (benign_ix.size() < half) throw Error("pool has too few benign samples");
        if (nontarget_ix.size() < half) throw Error("pool has too few non-target illicit samples");
        if (target_ix.size() < t) {
            throw Error("pool has too few target-category samples for the included setting");
        }
    }

    PromptConfig config;
    config.task = Task::binary;
    config.k = k;

    UnseenCategoryReport report;
    report.category = std::string(category_name(target));
    report.config = config_to_json(config);
    report.config["included_target_demos"] = t;
    report.config["provenance"] = provenance_json(dataset, ctx, seeds);
    report.zero_shot.name = "zero_shot";
    report.excluded.name = "excluded";
    report.included.name = "included";

    auto pick = [&](const std::vector<std::size_t>& from, std::size_t count, Rng& rng) {
        auto picks = rng.sample_indices(from.size(), count);
        std::vector<std::size_t> out;
        out.reserve(count);
        for (auto p : picks) out.push_back(from[p]);
        return out;
    };
    auto to_demos = [&](const std::vector<std::size_t>& ix) {
        std::vector<DemoRef> demos;
        demos.reserve(ix.size());
        for (auto i : ix) demos.push_back(make_demo(dataset.train[i], Task::binary));
        return demos;
    };

    auto run_setting = [&](const std::string& which, UnseenCategoryReport::Setting& setting) {
        std::vector<double> accs;
        for (std::uint64_t seed : seeds) {
            std::vector<ItemOutcome> items(queries.size());
            parallel_for(queries.size(), ctx.gateway->max_in_flight(), [&](std::size_t i) {
                std::vector<DemoRef> demos;
                if (which != "zero_shot") {
                    Rng rng(derive_seed(derive_seed(seed, kUnseenStream, i), 0, 0));
                    std::vector<std::size_t> chosen;
                    if (target_is_benign) {
                        // Excluded drops benign entirely; included swaps t
                        // illicit demos for t benign ones.
                        auto illicit_draw = pick(illicit_ix, k, rng);
                        if (which == "excluded") {
                            chosen = illicit_draw;
                        } else {
                            chosen.assign(illicit_draw.begin(),
                                          illicit_draw.begin() +
                                              static_cast<std::ptrdiff_t>(k - t));
                            auto benign_draw = pick(benign_ix, t, rng);
                            chosen.insert(chosen.end(), benign_draw.begin(), benign_draw.end());
                        }
                    } else {
                        // Paired draws: included replaces the tail t of the
                        // same non-target draw with target demos, keeping the
                        // 50/50 label split and everything else fixed.
                        auto benign_draw = pick(benign_ix, half, rng);
                        auto nontarget_draw = pick(nontarget_ix, half, rng);
                        chosen = benign_draw;
                        if (which == "excluded") {
                            chosen.insert(chosen.end(), nontarget_draw.begin(),
                                          nontarget_draw.end());
                        } else {
                            chosen.insert(chosen.end(), nontarget_draw.begin(),
                                          nontarget_draw.begin() +
                                              static_cast<std::ptrdiff_t>(half - t));
                            auto target_draw = pick(target_ix, t, rng);
                            chosen.insert(chosen.end(), target_draw.begin(), target_draw.end());
                        }
                    }
                    demos = to_demos(chosen);
                    Rng mix(derive_seed(derive_seed(seed, kMixStream, i), 0, 1));
                    mix.shuffle(demos);
                }
                auto cfg = config;
                cfg.k = demos.size();
                items[i] = eval_one(ctx, cfg, demos, queries[i], Task::binary);
            });
            if (which == "excluded") {
                // Exclusion must be airtight: scan every rendered manifest.
                for (const auto& item : items) {
                    for (const auto& [id, label] : item.manifest) {
                        auto it = category_by_id.find(id);
                        if (it != category_by_id.end() && it->second == target) {
                            throw Error("excluded setting leaked a target-category "
                                        "demonstration: " + id);
                        }
                    }
                    report.excluded_prompts_scanned += 1;
                }
            }
            SeedRun run;
            run.seed = seed;
            run.metrics = metrics_from_items(items, Task::binary);
            accs.push_back(run.metrics.accuracy);
            if (ctx.keep_items) run.items = std::move(items);
            setting.per_seed.push_back(std::move(run));
        }
        setting.accuracy = aggregate_series(accs);
    };

    run_setting("zero_shot", report.zero_shot);
    run_setting("excluded", report.excluded);
    run_setting("included", report.included);
    report.gain_over_zero_shot =
        unseen_gain(report.excluded.accuracy.mean, report.zero_shot.accuracy.mean);
    report.gap_vs_included =
        unseen_gap(report.excluded.accuracy.mean, report.included.accuracy.mean);
    return report;
}

}  // namespace iclmod
