// iclmod: in-context-learning toolkit for illicit promotion detection.
// Subcommands: dataset, prompt, classify, eval, discover, report.
// stdout carries results only; diagnostics go to stderr.
// Exit codes: 0 ok, 1 runtime error, 2 usage/config error, 3 transport failures.

#include <chrono>
#include <ctime>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "iclmod/common.hpp"
#include "iclmod/config.hpp"
#include "iclmod/corpus.hpp"
#include "iclmod/discovery.hpp"
#include "iclmod/gateway.hpp"
#include "iclmod/protocols.hpp"
#include "iclmod/reporting.hpp"
#include "json.hpp"

using nlohmann::json;
using namespace iclmod;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string iso_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

// Every run writes exactly one manifest alongside its outputs. Wall-clock
// provenance lives here and only here, so the report files themselves stay
// byte-stable across reruns.
class RunManifest {
public:
    RunManifest(int argc, char** argv) {
        std::string cmd;
        for (int i = 0; i < argc; ++i) cmd += (i ? " " : "") + std::string(argv[i]);
        body_["command"] = cmd;
        body_["version"] = kVersion;
        body_["started_at"] = iso_now();
        body_["input_hashes"] = json::object();
        body_["outputs"] = json::array();
    }

    void set_config(const json& resolved) { body_["resolved_config"] = resolved; }
    void add_input(const std::filesystem::path& path) {
        if (std::filesystem::is_regular_file(path)) {
            body_["input_hashes"][path.string()] = sha256_hex(read_file(path));
        }
    }
    void add_output(const std::filesystem::path& path) {
        body_["outputs"].push_back(path.string());
    }
    void write(const std::filesystem::path& out_dir) {
        body_["finished_at"] = iso_now();
        std::filesystem::create_directories(out_dir);
        write_file_atomic(out_dir / "run_manifest.json", body_.dump(2) + "\n");
    }

private:
    json body_;
};

std::vector<std::uint64_t> parse_u64_list(const std::string& csv) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(csv);
    std::string part;
    while (std::getline(ss, part, ',')) {
        auto token = trim(part);
        if (token.empty()) continue;
        try {
            out.push_back(std::stoull(token));
        } catch (const std::exception&) {
            throw UsageError("not a number: '" + token + "'");
        }
    }
    if (out.empty()) throw UsageError("empty list: '" + csv + "'");
    return out;
}

std::vector<std::size_t> parse_size_list(const std::string& csv) {
    std::vector<std::size_t> out;
    for (auto v : parse_u64_list(csv)) out.push_back(static_cast<std::size_t>(v));
    return out;
}

struct CommonEvalArgs {
    std::string config_path;
    std::string dataset_dir;
    std::string endpoint_name;
    std::string seeds_csv = "1,2,3,4,5,6,7,8,9,10";
    std::string out_dir = "runs/latest";
    bool no_cache = false;
    bool no_items = false;
};

void add_common_eval_options(CLI::App* cmd, CommonEvalArgs& args) {
    cmd->add_option("--config", args.config_path, "config file (endpoints, cache, prompt defaults)")
        ->required();
    cmd->add_option("--dataset", args.dataset_dir, "dataset directory from `dataset build`")
        ->required();
    cmd->add_option("--endpoint", args.endpoint_name, "endpoint name from the config")->required();
    cmd->add_option("--seeds", args.seeds_csv, "comma-separated seeds");
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_flag("--no-cache", args.no_cache, "force live calls");
    cmd->add_flag("--no-items", args.no_items, "omit per-item records from reports");
}

struct EvalSession {
    AppConfig app;
    DatasetSplit dataset;
    Gateway gateway;
    ModelEndpoint endpoint;
    std::unique_ptr<EmbeddingProvider> embedder;
    RunContext ctx;

    explicit EvalSession(const CommonEvalArgs& args)
        : app(AppConfig::load(args.config_path)),
          dataset(load_dataset(args.dataset_dir)),
          gateway(app.gateway_options(!args.no_cache)),
          endpoint(app.endpoint(args.endpoint_name)),
          embedder(app.make_embedder()) {
        ctx.gateway = &gateway;
        ctx.endpoint = &endpoint;
        ctx.embedder = embedder.get();
        ctx.embed_cache_dir = app.cache_dir;
        ctx.keep_items = !args.no_items;
    }
};

PromptConfig prompt_from_flags(const AppConfig& app, const std::string& task, long k,
                               const std::string& strategy, const std::string& scheme,
                               const std::string& ordering) {
    PromptConfig config = app.prompt;
    if (!task.empty()) {
        auto parsed = parse_task(task);
        if (!parsed) throw UsageError("unknown task '" + task + "'");
        config.task = *parsed;
    }
    if (k >= 0) config.k = static_cast<std::size_t>(k);
    if (!strategy.empty()) {
        auto parsed = parse_strategy(strategy);
        if (!parsed) throw UsageError("unknown strategy '" + strategy + "'");
        config.strategy = *parsed;
    }
    if (!scheme.empty()) {
        auto parsed = parse_label_scheme(scheme);
        if (!parsed) throw UsageError("unknown label scheme '" + scheme + "'");
        config.label_scheme = *parsed;
    }
    if (!ordering.empty()) config.ordering = OrderingPolicy::parse(ordering);
    config.validate();
    return config;
}

std::vector<FewShotExample> load_examples(const std::string& path, std::size_t k,
                                          std::uint64_t seed) {
    std::vector<FewShotExample> examples;
    for_each_line(path, [&](std::size_t line_no, std::string_view line) {
        if (trim(line).empty()) return;
        try {
            json rec = json::parse(line);
            examples.push_back(
                {rec.at("text").get<std::string>(), rec.at("label").get<std::string>()});
        } catch (const json::exception& e) {
            throw Error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    });
    if (k > 0 && examples.size() > k) {
        Rng rng(seed);
        auto picks = rng.sample_indices(examples.size(), k);
        std::vector<FewShotExample> chosen;
        chosen.reserve(k);
        for (auto p : picks) chosen.push_back(examples[p]);
        return chosen;
    }
    return examples;
}

Completer make_completer(Gateway& gateway, const ModelEndpoint& endpoint) {
    return [&gateway, &endpoint](const std::string& prompt) {
        auto outcome = gateway.complete_text(prompt, endpoint);
        if (!outcome.transport_ok) {
            throw Error("transport failure from endpoint " + endpoint.name);
        }
        return outcome.raw;
    };
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"in-context-learning toolkit for illicit promotion detection"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    // ---- dataset ----------------------------------------------------------
    auto* dataset_cmd = app.add_subcommand("dataset", "build balanced datasets");
    dataset_cmd->require_subcommand(1);
    auto* dataset_build = dataset_cmd->add_subcommand("build", "ingest JSONL and build a split");
    std::vector<std::string> ds_inputs;
    std::string ds_source = "twitter", ds_task = "binary", ds_split = "4:1", ds_out = "dataset";
    std::size_t ds_total = 5600, ds_per_class = 500;
    std::uint64_t ds_seed = 1;
    bool ds_route_unmapped = false;
    dataset_build->add_option("--input", ds_inputs, "input JSONL file(s)")->required();
    dataset_build->add_option("--source-tag", ds_source, "default source for records without one");
    dataset_build->add_option("--task", ds_task, "binary | multiclass");
    dataset_build->add_option("--total", ds_total, "binary dataset size");
    dataset_build->add_option("--split", ds_split, "train:test ratio, e.g. 4:1");
    dataset_build->add_option("--per-class", ds_per_class, "multiclass per-category size");
    dataset_build->add_option("--seed", ds_seed, "sampling seed");
    dataset_build->add_option("--out", ds_out, "output directory");
    dataset_build->add_flag("--route-unmapped-others", ds_route_unmapped,
                            "map unknown raw labels to 'others' instead of failing");

    // ---- prompt -----------------------------------------------------------
    auto* prompt_cmd = app.add_subcommand("prompt", "prompt debugging");
    prompt_cmd->require_subcommand(1);
    auto* prompt_render = prompt_cmd->add_subcommand("render", "render one prompt to stdout");
    std::string pr_config, pr_query, pr_pool, pr_task, pr_strategy, pr_scheme, pr_ordering;
    long pr_k = -1;
    std::uint64_t pr_seed = 1;
    prompt_render->add_option("--config", pr_config)->required();
    prompt_render->add_option("--query", pr_query)->required();
    prompt_render->add_option("--pool", pr_pool, "dataset dir; train side is the pool");
    prompt_render->add_option("--task", pr_task);
    prompt_render->add_option("--k", pr_k);
    prompt_render->add_option("--strategy", pr_strategy);
    prompt_render->add_option("--scheme", pr_scheme);
    prompt_render->add_option("--ordering", pr_ordering);
    prompt_render->add_option("--seed", pr_seed);

    // ---- classify ---------------------------------------------------------
    auto* classify_cmd = app.add_subcommand("classify", "classify text(s)");
    std::string cl_config, cl_endpoint, cl_text, cl_file, cl_pool, cl_out = "runs/classify";
    std::string cl_task, cl_strategy, cl_scheme, cl_ordering;
    long cl_k = -1;
    std::uint64_t cl_seed = 1;
    bool cl_no_cache = false;
    classify_cmd->add_option("--config", cl_config)->required();
    classify_cmd->add_option("--endpoint", cl_endpoint)->required();
    classify_cmd->add_option("--text", cl_text, "single text");
    classify_cmd->add_option("--file", cl_file, "JSONL of {text} records");
    classify_cmd->add_option("--pool", cl_pool, "dataset dir; train side is the pool");
    classify_cmd->add_option("--out", cl_out);
    classify_cmd->add_option("--task", cl_task);
    classify_cmd->add_option("--k", cl_k);
    classify_cmd->add_option("--strategy", cl_strategy);
    classify_cmd->add_option("--scheme", cl_scheme);
    classify_cmd->add_option("--ordering", cl_ordering);
    classify_cmd->add_option("--seed", cl_seed);
    classify_cmd->add_flag("--no-cache", cl_no_cache);

    // ---- eval -------------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("eval", "experiment protocols");
    eval_cmd->require_subcommand(1);
    CommonEvalArgs run_args, sweep_args, order_args, labelpos_args, needle_args, unseen_args;
    std::string ev_task, ev_strategy, ev_scheme, ev_ordering;
    long ev_k = -1;

    auto* eval_run = eval_cmd->add_subcommand("run", "single classification run");
    add_common_eval_options(eval_run, run_args);
    eval_run->add_option("--task", ev_task);
    eval_run->add_option("--k", ev_k);
    eval_run->add_option("--strategy", ev_strategy);
    eval_run->add_option("--scheme", ev_scheme);
    eval_run->add_option("--ordering", ev_ordering);

    auto* eval_sweep = eval_cmd->add_subcommand("sweep", "shot-count sweep");
    add_common_eval_options(eval_sweep, sweep_args);
    std::string sw_shots = "0,2,4,8,16,32,64,128", sw_task, sw_strategy, sw_scheme;
    eval_sweep->add_option("--shots", sw_shots);
    eval_sweep->add_option("--task", sw_task);
    eval_sweep->add_option("--strategy", sw_strategy);
    eval_sweep->add_option("--scheme", sw_scheme);

    auto* eval_order = eval_cmd->add_subcommand("order", "demonstration-order perturbation");
    add_common_eval_options(eval_order, order_args);
    std::string ord_shots = "4,8,16,32,64", ord_task, ord_strategy;
    std::size_t ord_permutations = 10;
    eval_order->add_option("--shots", ord_shots);
    eval_order->add_option("--permutations", ord_permutations);
    eval_order->add_option("--task", ord_task);
    eval_order->add_option("--strategy", ord_strategy);

    auto* eval_labelpos = eval_cmd->add_subcommand("label-pos", "label placement study");
    add_common_eval_options(eval_labelpos, labelpos_args);
    long lp_k = 8;
    eval_labelpos->add_option("--k", lp_k);

    auto* eval_needle = eval_cmd->add_subcommand("needle", "needle-in-a-haystack probe");
    add_common_eval_options(eval_needle, needle_args);
    std::string nd_sizes = "2,4,8,16,32,64,128", nd_task;
    eval_needle->add_option("--sizes", nd_sizes);
    eval_needle->add_option("--task", nd_task);

    auto* eval_unseen = eval_cmd->add_subcommand("unseen", "unseen-category generalization");
    add_common_eval_options(eval_unseen, unseen_args);
    std::string un_category;
    std::size_t un_k = 64, un_included = 4;
    eval_unseen->add_option("--category", un_category)->required();
    eval_unseen->add_option("--unseen-k", un_k);
    eval_unseen->add_option("--included-target", un_included);

    // ---- discover ---------------------------------------------------------
    auto* discover_cmd = app.add_subcommand("discover", "two-stage category discovery");
    discover_cmd->require_subcommand(1);
    auto* disc_annotate = discover_cmd->add_subcommand("annotate", "stage 1: free-form labels");
    std::string da_config, da_endpoint, da_input, da_mode = "open_ended", da_examples,
                da_out = "runs/discover";
    std::size_t da_shots = 8;
    std::uint64_t da_seed = 1;
    bool da_no_cache = false;
    disc_annotate->add_option("--config", da_config)->required();
    disc_annotate->add_option("--endpoint", da_endpoint)->required();
    disc_annotate->add_option("--input", da_input, "unlabeled JSONL corpus")->required();
    disc_annotate->add_option("--mode", da_mode, "anchored | open_ended");
    disc_annotate->add_option("--examples", da_examples, "few-shot JSONL of {text,label}");
    disc_annotate->add_option("--shots", da_shots, "few-shot example count");
    disc_annotate->add_option("--seed", da_seed);
    disc_annotate->add_option("--out", da_out);
    disc_annotate->add_flag("--no-cache", da_no_cache);

    auto* disc_consolidate =
        discover_cmd->add_subcommand("consolidate", "stage 2: conceptual clustering");
    std::string dc_config, dc_endpoint, dc_annotations, dc_out = "runs/discover";
    std::size_t dc_batch = 200;
    bool dc_no_cache = false;
    disc_consolidate->add_option("--config", dc_config)->required();
    disc_consolidate->add_option("--endpoint", dc_endpoint)->required();
    disc_consolidate->add_option("--annotations", dc_annotations)->required();
    disc_consolidate->add_option("--batch-size", dc_batch);
    disc_consolidate->add_option("--out", dc_out);
    disc_consolidate->add_flag("--no-cache", dc_no_cache);

    auto* disc_diff = discover_cmd->add_subcommand("diff", "mark clusters known or novel");
    std::string dd_taxonomy, dd_overrides, dd_annotations, dd_texts, dd_out = "runs/discover";
    disc_diff->add_option("--taxonomy", dd_taxonomy)->required();
    disc_diff->add_option("--overrides", dd_overrides);
    disc_diff->add_option("--annotations", dd_annotations);
    disc_diff->add_option("--texts", dd_texts, "corpus JSONL for example snippets");
    disc_diff->add_option("--out", dd_out);

    // ---- report -----------------------------------------------------------
    auto* report_cmd = app.add_subcommand("report", "summarize a run directory");
    std::string rp_run, rp_out;
    report_cmd->add_option("--run", rp_run)->required();
    report_cmd->add_option("--out", rp_out, "defaults to the run directory");

    CLI11_PARSE(app, argc, argv);

    try {
        RunManifest manifest(argc, argv);

        if (dataset_build->parsed()) {
            IngestOptions opts;
            auto src = parse_source(ds_source);
            if (!src) throw UsageError("unknown source tag '" + ds_source + "'");
            opts.default_source = *src;
            opts.route_unmapped_to_others = ds_route_unmapped;
            std::vector<Sample> samples;
            for (const auto& input : ds_inputs) {
                manifest.add_input(input);
                auto result = ingest_samples(input, opts);
                for (const auto& issue : result.issues) {
                    std::cerr << input << ":" << issue.line << ": " << issue.message << "\n";
                }
                samples.insert(samples.end(), result.samples.begin(), result.samples.end());
            }
            DatasetSplit dataset;
            if (ds_task == "binary") {
                dataset = build_binary_dataset(samples, ds_total, parse_split_ratio(ds_split),
                                               ds_seed);
            } else if (ds_task == "multiclass") {
                dataset = build_multiclass_dataset(samples, ds_per_class, ds_seed,
                                                   parse_split_ratio(ds_split));
            } else {
                throw UsageError("unknown task '" + ds_task + "'");
            }
            save_dataset(dataset, ds_out);
            manifest.add_output(std::filesystem::path(ds_out) / "train.jsonl");
            manifest.add_output(std::filesystem::path(ds_out) / "test.jsonl");
            manifest.add_output(std::filesystem::path(ds_out) / "manifest.json");
            manifest.write(ds_out);
            std::cout << "train=" << dataset.train.size() << " test=" << dataset.test.size()
                      << " hash=" << dataset.content_hash() << "\n";
            return 0;
        }

        if (prompt_render->parsed()) {
            AppConfig config = AppConfig::load(pr_config);
            PromptConfig prompt_config =
                prompt_from_flags(config, pr_task, pr_k, pr_strategy, pr_scheme, pr_ordering);
            std::vector<DemoRef> demos;
            if (prompt_config.k > 0) {
                if (pr_pool.empty()) throw UsageError("k > 0 needs --pool");
                auto dataset = load_dataset(pr_pool);
                auto pool = DemonstrationPool::build(dataset.train, prompt_config.task);
                SelectionResult sel;
                if (prompt_config.strategy == Strategy::lexical) {
                    sel = score_bm25(pr_query, pool, prompt_config.k);
                } else if (prompt_config.strategy == Strategy::semantic) {
                    auto embedder = config.make_embedder();
                    EmbedOptions opts;
                    opts.cache_dir = config.cache_dir;
                    std::vector<std::string> texts;
                    for (const auto& s : pool.entries) texts.push_back(s.text);
                    pool.attach_embeddings(embed_texts(texts, *embedder, opts));
                    auto qvec = embed_texts({pr_query}, *embedder, opts);
                    sel = select_semantic(qvec[0], pool, prompt_config.k);
                } else {
                    sel = select_random(pool, prompt_config.task, prompt_config.k,
                                        derive_seed(pr_seed, 1, 0));
                }
                for (auto i : sel.indices) {
                    demos.push_back({pool.entries[i].id, pool.entries[i].text,
                                     task_label(pool.entries[i], prompt_config.task)});
                }
                demos = apply_ordering(std::move(demos), prompt_config.ordering,
                                       derive_seed(pr_seed, 2, 0));
            }
            auto rendered = render_prompt(prompt_config, demos, pr_query);
            std::cout << rendered.text;
            return 0;
        }

        if (classify_cmd->parsed()) {
            AppConfig config = AppConfig::load(cl_config);
            PromptConfig prompt_config =
                prompt_from_flags(config, cl_task, cl_k, cl_strategy, cl_scheme, cl_ordering);
            const ModelEndpoint& endpoint = config.endpoint(cl_endpoint);
            Gateway gateway(config.gateway_options(!cl_no_cache));

            std::vector<Sample> inputs;
            if (!cl_text.empty()) {
                Sample s;
                s.text = cl_text;
                s.id = content_id(cl_text);
                inputs.push_back(std::move(s));
            } else if (!cl_file.empty()) {
                manifest.add_input(cl_file);
                IngestOptions opts;
                opts.label_mode = LabelMode::unlabeled;
                auto result = ingest_samples(cl_file, opts);
                for (const auto& issue : result.issues) {
                    std::cerr << cl_file << ":" << issue.line << ": " << issue.message << "\n";
                }
                inputs = std::move(result.samples);
            } else {
                throw UsageError("classify needs --text or --file");
            }

            std::optional<DemonstrationPool> pool;
            std::unique_ptr<EmbeddingProvider> embedder;
            std::vector<std::vector<double>> qvecs;
            if (prompt_config.k > 0) {
                if (cl_pool.empty()) throw UsageError("k > 0 needs --pool");
                auto dataset = load_dataset(cl_pool);
                pool = DemonstrationPool::build(dataset.train, prompt_config.task);
                if (prompt_config.strategy == Strategy::semantic) {
                    embedder = config.make_embedder();
                    EmbedOptions opts;
                    opts.cache_dir = config.cache_dir;
                    std::vector<std::string> texts;
                    for (const auto& s : pool->entries) texts.push_back(s.text);
                    pool->attach_embeddings(embed_texts(texts, *embedder, opts));
                    texts.clear();
                    for (const auto& s : inputs) texts.push_back(s.text);
                    qvecs = embed_texts(texts, *embedder, opts);
                }
            }

            std::vector<Prediction> predictions(inputs.size());
            std::vector<std::string> labels(inputs.size());
            parallel_for(inputs.size(), gateway.max_in_flight(), [&](std::size_t i) {
                std::vector<DemoRef> demos;
                if (prompt_config.k > 0) {
                    SelectionResult sel;
                    switch (prompt_config.strategy) {
                        case Strategy::random:
                            sel = select_random(*pool, prompt_config.task, prompt_config.k,
                                                derive_seed(cl_seed, 1, i));
                            break;
                        case Strategy::lexical:
                            sel = score_bm25(inputs[i].text, *pool, prompt_config.k);
                            break;
                        case Strategy::semantic:
                            sel = select_semantic(qvecs[i], *pool, prompt_config.k);
                            break;
                    }
                    for (auto ix : sel.indices) {
                        demos.push_back({pool->entries[ix].id, pool->entries[ix].text,
                                         task_label(pool->entries[ix], prompt_config.task)});
                    }
                    demos = apply_ordering(std::move(demos), prompt_config.ordering,
                                           derive_seed(cl_seed, 2, i));
                }
                auto rendered = render_prompt(prompt_config, demos, inputs[i].text);
                predictions[i] = gateway.complete(rendered, endpoint);
                labels[i] = predictions[i].parsed
                                ? unverbalize_label(prompt_config.task, *predictions[i].parsed,
                                                    prompt_config.label_scheme,
                                                    prompt_config.abstract_style)
                                : "";
            });

            std::filesystem::create_directories(cl_out);
            std::string jsonl;
            bool transport_failed = false;
            for (std::size_t i = 0; i < inputs.size(); ++i) {
                json rec;
                rec["id"] = inputs[i].id;
                rec["label"] = labels[i].empty() ? json(nullptr) : json(labels[i]);
                rec["status"] = std::string(pred_status_name(predictions[i].status));
                rec["raw"] = predictions[i].raw;
                jsonl += rec.dump() + "\n";
                std::cout << (labels[i].empty() ? "(failed)" : labels[i]) << "\n";
                if (predictions[i].status == PredStatus::transport_failure) {
                    transport_failed = true;
                }
            }
            write_file_atomic(std::filesystem::path(cl_out) / "predictions.jsonl", jsonl);
            manifest.set_config(config.to_json());
            manifest.add_output(std::filesystem::path(cl_out) / "predictions.jsonl");
            manifest.write(cl_out);
            return transport_failed ? 3 : 0;
        }

        if (eval_run->parsed()) {
            EvalSession session(run_args);
            PromptConfig config =
                prompt_from_flags(session.app, ev_task, ev_k, ev_strategy, ev_scheme, ev_ordering);
            auto report = run_classification(session.dataset, config, session.ctx,
                                             parse_u64_list(run_args.seeds_csv));
            report.save(run_args.out_dir, "classification");
            manifest.set_config(session.app.to_json());
            manifest.add_output(std::filesystem::path(run_args.out_dir) /
                                "report_classification.json");
            manifest.write(run_args.out_dir);
            std::cout << "f1 " << report.aggregate.at("f1").mean << " ± "
                      << report.aggregate.at("f1").std << "\n";
            return 0;
        }

        if (eval_sweep->parsed()) {
            EvalSession session(sweep_args);
            PromptConfig config =
                prompt_from_flags(session.app, sw_task, -1, sw_strategy, sw_scheme, "");
            auto sweep = run_shot_sweep(session.dataset, config, parse_size_list(sw_shots),
                                        session.ctx, parse_u64_list(sweep_args.seeds_csv));
            for (const auto& flag : sweep.flags) std::cerr << "warning: " << flag << "\n";
            manifest.set_config(session.app.to_json());
            for (auto& report : sweep.reports) {
                auto shot = report.config.at("shot").get<std::size_t>();
                report.save(sweep_args.out_dir, "shot" + std::to_string(shot));
                std::cout << "shot " << shot << ": f1 " << report.aggregate.at("f1").mean << " ± "
                          << report.aggregate.at("f1").std << "\n";
            }
            manifest.write(sweep_args.out_dir);
            return 0;
        }

        if (eval_order->parsed()) {
            EvalSession session(order_args);
            PromptConfig config = prompt_from_flags(session.app, ord_task, -1, ord_strategy, "", "");
            for (auto shot : parse_size_list(ord_shots)) {
                config.k = shot;
                auto report =
                    run_order_perturbation(session.dataset, config, session.ctx, ord_permutations,
                                           parse_u64_list(order_args.seeds_csv));
                report.save(order_args.out_dir, "order_k" + std::to_string(shot));
                std::cout << "k " << shot << ": f1 std " << report.mean_f1_std << "\n";
            }
            manifest.set_config(session.app.to_json());
            manifest.write(order_args.out_dir);
            return 0;
        }

        if (eval_labelpos->parsed()) {
            EvalSession session(labelpos_args);
            PromptConfig config = session.app.prompt;
            config.task = Task::binary;
            config.k = static_cast<std::size_t>(lp_k);
            std::vector<OrderingPolicy> placements = {
                OrderingPolicy{OrderingKind::shuffled, ""},
                OrderingPolicy{OrderingKind::grouped_label_first, "illicit"},
                OrderingPolicy{OrderingKind::grouped_label_first, "benign"},
                OrderingPolicy{OrderingKind::grouped_label_last, "illicit"},
                OrderingPolicy{OrderingKind::grouped_label_last, "benign"},
            };
            auto report = run_label_position(session.dataset, config, session.ctx, placements,
                                             parse_u64_list(labelpos_args.seeds_csv));
            report.save(labelpos_args.out_dir, "label_position");
            for (const auto& placement : report.placements) {
                std::cout << placement.name << ": accuracy "
                          << placement.aggregate.at("accuracy").mean << " fpr "
                          << placement.aggregate.at("fpr").mean << "\n";
            }
            manifest.set_config(session.app.to_json());
            manifest.write(labelpos_args.out_dir);
            return 0;
        }

        if (eval_needle->parsed()) {
            EvalSession session(needle_args);
            Task task = Task::binary;
            if (!nd_task.empty()) {
                auto parsed = parse_task(nd_task);
                if (!parsed) throw UsageError("unknown task '" + nd_task + "'");
                task = *parsed;
            } else if (session.dataset.spec.task == "multiclass") {
                task = Task::multiclass;
            }
            auto report = run_needle_haystack(session.dataset.test, session.dataset.train, task,
                                              parse_size_list(nd_sizes), session.ctx,
                                              parse_u64_list(needle_args.seeds_csv));
            report.save(needle_args.out_dir, "needle");
            for (const auto& size : report.sizes) {
                std::cout << "n " << size.n << ": accuracy " << size.accuracy.mean << " ± "
                          << size.accuracy.std << "\n";
            }
            manifest.set_config(session.app.to_json());
            manifest.write(needle_args.out_dir);
            return 0;
        }

        if (eval_unseen->parsed()) {
            EvalSession session(unseen_args);
            auto category = parse_category(un_category);
            if (!category) throw UsageError("unknown category '" + un_category + "'");
            auto report = run_unseen_category(session.dataset, *category, session.ctx,
                                              parse_u64_list(unseen_args.seeds_csv), un_k,
                                              un_included);
            report.save(unseen_args.out_dir, "unseen_" + un_category);
            std::cout << "zero-shot " << report.zero_shot.accuracy.mean << " excluded "
                      << report.excluded.accuracy.mean << " included "
                      << report.included.accuracy.mean << " gain " << report.gain_over_zero_shot
                      << " gap " << report.gap_vs_included << "\n";
            manifest.set_config(session.app.to_json());
            manifest.write(unseen_args.out_dir);
            return 0;
        }

        if (disc_annotate->parsed()) {
            AppConfig config = AppConfig::load(da_config);
            const ModelEndpoint& endpoint = config.endpoint(da_endpoint);
            Gateway gateway(config.gateway_options(!da_no_cache));
            auto mode = parse_annotation_mode(da_mode);
            if (!mode) throw UsageError("unknown mode '" + da_mode + "'");
            std::vector<FewShotExample> examples;
            if (!da_examples.empty()) {
                manifest.add_input(da_examples);
                examples = load_examples(da_examples, da_shots, da_seed);
            }
            manifest.add_input(da_input);
            IngestOptions opts;
            opts.label_mode = LabelMode::unlabeled;
            auto corpus = ingest_samples(da_input, opts);
            for (const auto& issue : corpus.issues) {
                std::cerr << da_input << ":" << issue.line << ": " << issue.message << "\n";
            }
            auto completer = make_completer(gateway, endpoint);
            std::vector<FreeFormLabel> annotations(corpus.samples.size());
            parallel_for(corpus.samples.size(), gateway.max_in_flight(), [&](std::size_t i) {
                annotations[i] = annotate_free_form(corpus.samples[i], *mode, completer, examples);
            });
            std::string jsonl;
            std::size_t failed = 0;
            for (const auto& a : annotations) {
                json rec;
                rec["text_id"] = a.text_id;
                rec["raw"] = a.raw;
                rec["normalized"] = a.normalized;
                rec["mode"] = std::string(annotation_mode_name(a.mode));
                rec["parse_ok"] = a.parse_ok;
                jsonl += rec.dump() + "\n";
                failed += a.parse_ok ? 0 : 1;
            }
            std::filesystem::create_directories(da_out);
            write_file_atomic(std::filesystem::path(da_out) / "annotations.jsonl", jsonl);
            manifest.set_config(config.to_json());
            manifest.add_output(std::filesystem::path(da_out) / "annotations.jsonl");
            manifest.write(da_out);
            std::cout << "annotated " << annotations.size() << " texts (" << failed
                      << " parse failures)\n";
            return 0;
        }

        if (disc_consolidate->parsed()) {
            AppConfig config = AppConfig::load(dc_config);
            const ModelEndpoint& endpoint = config.endpoint(dc_endpoint);
            Gateway gateway(config.gateway_options(!dc_no_cache));
            manifest.add_input(dc_annotations);
            std::vector<FreeFormLabel> annotations;
            for_each_line(dc_annotations, [&](std::size_t, std::string_view line) {
                if (trim(line).empty()) return;
                json rec = json::parse(line);
                FreeFormLabel a;
                a.text_id = rec.value("text_id", "");
                a.raw = rec.value("raw", "");
                a.normalized = rec.value("normalized", "");
                a.parse_ok = rec.value("parse_ok", false);
                annotations.push_back(std::move(a));
            });
            auto labels = normalize_labels(annotations);
            std::cerr << "unique labels: " << labels.size() << "\n";
            ConsolidateOptions opts;
            opts.batch_size = dc_batch;
            auto clusters = consolidate_clusters(labels, make_completer(gateway, endpoint), opts);
            json out;
            out["schema_version"] = 1;
            json clusters_json = json::array();
            for (const auto& cluster : clusters) {
                clusters_json.push_back({{"name", cluster.name},
                                         {"summary", cluster.summary},
                                         {"members", cluster.members}});
            }
            out["clusters"] = clusters_json;
            std::filesystem::create_directories(dc_out);
            write_file_atomic(std::filesystem::path(dc_out) / "taxonomy.json", out.dump(2) + "\n");
            manifest.set_config(config.to_json());
            manifest.add_output(std::filesystem::path(dc_out) / "taxonomy.json");
            manifest.write(dc_out);
            std::cout << "clusters: " << clusters.size() << "\n";
            return 0;
        }

        if (disc_diff->parsed()) {
            manifest.add_input(dd_taxonomy);
            json taxonomy = json::parse(read_file(dd_taxonomy));
            std::vector<TaxonomyCluster> clusters;
            for (const auto& c : taxonomy.at("clusters")) {
                TaxonomyCluster cluster;
                cluster.name = c.at("name").get<std::string>();
                cluster.summary = c.value("summary", "");
                for (const auto& m : c.at("members")) {
                    cluster.members.push_back(m.get<std::string>());
                }
                clusters.push_back(std::move(cluster));
            }
            std::map<std::string, Category> overrides;
            if (!dd_overrides.empty()) {
                manifest.add_input(dd_overrides);
                overrides = load_override_file(dd_overrides);
            }
            std::vector<FreeFormLabel> annotations;
            std::map<std::string, std::string> texts_by_id;
            bool with_examples = !dd_annotations.empty() && !dd_texts.empty();
            if (with_examples) {
                for_each_line(dd_annotations, [&](std::size_t, std::string_view line) {
                    if (trim(line).empty()) return;
                    json rec = json::parse(line);
                    FreeFormLabel a;
                    a.text_id = rec.value("text_id", "");
                    a.normalized = rec.value("normalized", "");
                    a.parse_ok = rec.value("parse_ok", false);
                    annotations.push_back(std::move(a));
                });
                IngestOptions opts;
                opts.label_mode = LabelMode::unlabeled;
                for (const auto& s : ingest_samples(dd_texts, opts).samples) {
                    texts_by_id[s.id] = s.text;
                }
            }
            auto report =
                diff_taxonomy(clusters, overrides, with_examples ? &annotations : nullptr,
                              with_examples ? &texts_by_id : nullptr);
            std::filesystem::create_directories(dd_out);
            write_file_atomic(std::filesystem::path(dd_out) / "novelty.json",
                              report.to_json().dump(2) + "\n");
            write_file_atomic(std::filesystem::path(dd_out) / "novelty.md", report.to_markdown());
            manifest.add_output(std::filesystem::path(dd_out) / "novelty.json");
            manifest.add_output(std::filesystem::path(dd_out) / "novelty.md");
            manifest.write(dd_out);
            std::size_t novel = 0;
            for (const auto& entry : report.entries) novel += entry.novel ? 1 : 0;
            std::cout << report.entries.size() << " clusters, " << novel << " novel\n";
            return 0;
        }

        if (report_cmd->parsed()) {
            auto summary = summarize_run_dir(rp_run);
            write_summary(summary, rp_out.empty() ? rp_run : rp_out);
            std::cout << summary.markdown;
            return 0;
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
