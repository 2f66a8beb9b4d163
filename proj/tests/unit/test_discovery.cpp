#include <algorithm>
#include <set>

#include "doctest.h"
#include "iclmod/common.hpp"
#include "iclmod/discovery.hpp"
#include "json.hpp"
#include "test_util.hpp"

using namespace iclmod;
using nlohmann::json;

namespace {

Completer scripted(std::vector<std::string> responses) {
    auto remaining = std::make_shared<std::vector<std::string>>(std::move(responses));
    return [remaining](const std::string&) {
        if (remaining->empty()) throw Error("scripted completer ran dry");
        std::string next = remaining->front();
        remaining->erase(remaining->begin());
        return next;
    };
}

std::string clusters_json(const std::vector<TaxonomyCluster>& clusters) {
    json body;
    body["clusters"] = json::array();
    for (const auto& c : clusters) {
        body["clusters"].push_back(
            {{"name", c.name}, {"summary", c.summary}, {"members", c.members}});
    }
    return body.dump();
}

FreeFormLabel ok_label(const std::string& normalized) {
    FreeFormLabel l;
    l.normalized = normalized;
    l.raw = normalized;
    l.parse_ok = true;
    return l;
}

}  // namespace

TEST_CASE("normalize_free_label: case, punctuation and whitespace classes collapse") {
    CHECK(normalize_free_label("Luxury-Goods-Counterfeit") == "luxury-goods-counterfeit");
    CHECK(normalize_free_label("Drug sale") == "drug-sale");
    CHECK(normalize_free_label("drug-sale") == "drug-sale");
    CHECK(normalize_free_label("DRUG SALE") == "drug-sale");
    CHECK(normalize_free_label("  live streaming / sex!  ") == "live-streaming-sex");
    CHECK(normalize_free_label("...") == "");
}

TEST_CASE("normalize_labels: equivalence classes merge with counts") {
    std::vector<FreeFormLabel> labels = {ok_label(normalize_free_label("Drug sale")),
                                         ok_label(normalize_free_label("drug-sale")),
                                         ok_label(normalize_free_label("DRUG SALE")),
                                         ok_label("usury")};
    auto counts = normalize_labels(labels);
    REQUIRE(counts.size() == 2);
    CHECK(counts[0].label == "drug-sale");
    CHECK(counts[0].count == 3);
    CHECK(counts[1].label == "usury");
    CHECK(counts[1].count == 1);
}

TEST_CASE("normalize_labels: disjoint labels keep size, failures are skipped") {
    std::vector<FreeFormLabel> labels = {ok_label("aa"), ok_label("bb"), ok_label("cc")};
    FreeFormLabel failed;
    failed.parse_ok = false;
    labels.push_back(failed);
    auto counts = normalize_labels(labels);
    CHECK(counts.size() == 3);
    for (const auto& lc : counts) CHECK(lc.count == 1);
    CHECK_THROWS_AS(normalize_labels({}), Error);
}

TEST_CASE("normalize_labels: idempotent, permutation-invariant, never grows") {
    Rng rng(99);
    std::vector<std::string> base = {"a-b", "A B", "c", "d e", "D-E", "f", "a_b", "G"};
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<std::string> raws = base;
        rng.shuffle(raws);
        std::size_t n = 1 + rng.below(raws.size());
        raws.resize(n);
        std::vector<FreeFormLabel> labels;
        for (const auto& raw : raws) {
            auto norm = normalize_free_label(raw);
            if (!norm.empty()) labels.push_back(ok_label(norm));
        }
        if (labels.empty()) continue;
        auto once = normalize_labels(labels);
        CHECK(once.size() <= labels.size());
        // idempotence: feeding the normalized set back changes nothing
        std::vector<FreeFormLabel> again;
        for (const auto& lc : once) {
            for (std::size_t i = 0; i < lc.count; ++i) again.push_back(ok_label(lc.label));
        }
        auto twice = normalize_labels(again);
        REQUIRE(twice.size() == once.size());
        for (std::size_t i = 0; i < once.size(); ++i) {
            CHECK(twice[i].label == once[i].label);
            CHECK(twice[i].count == once[i].count);
        }
        // permutation invariance
        std::reverse(labels.begin(), labels.end());
        auto reversed = normalize_labels(labels);
        REQUIRE(reversed.size() == once.size());
        for (std::size_t i = 0; i < once.size(); ++i) {
            CHECK(reversed[i].label == once[i].label);
        }
    }
}

TEST_CASE("annotation prompts: anchored lists all 12 known names, open-ended none") {
    std::string anchored = render_annotation_prompt("some text", AnnotationMode::anchored, {});
    std::string open = render_annotation_prompt("some text", AnnotationMode::open_ended, {});
    auto instruction_block = [](const std::string& prompt) {
        return prompt.substr(0, prompt.find("\n\n=="));
    };
    std::string anchored_head = instruction_block(anchored);
    std::string open_head = instruction_block(open);
    for (Category cat : illicit_categories()) {
        std::string name(category_name(cat));
        CHECK(anchored_head.find(name) != std::string::npos);
        CHECK(open_head.find(name) == std::string::npos);
    }
    CHECK(anchored_head.find("propose a new") != std::string::npos);
}

TEST_CASE("annotation prompt embeds few-shot examples and ends at the answer slot") {
    std::vector<FewShotExample> examples = {{"example text", "usury"}};
    std::string prompt =
        render_annotation_prompt("the target", AnnotationMode::open_ended, examples);
    CHECK(prompt.find("Query: example text\n\nAnswer: usury") != std::string::npos);
    CHECK(prompt.rfind("Query: the target\n\nAnswer: ") == prompt.size() -
                                                                std::string("Query: the target"
                                                                            "\n\nAnswer: ")
                                                                    .size());
}

TEST_CASE("annotate_free_form normalizes the paper-style completion") {
    Sample s = testutil::make_sample("t1", "replica bags for sale", Source::twitter,
                                     Category::benign);
    auto label = annotate_free_form(s, AnnotationMode::open_ended,
                                    scripted({"Luxury-Goods-Counterfeit"}), {});
    CHECK(label.parse_ok);
    CHECK(label.raw == "Luxury-Goods-Counterfeit");
    CHECK(label.normalized == "luxury-goods-counterfeit");
    CHECK(label.text_id == "t1");
}

TEST_CASE("annotate_free_form flags empty and rambling completions") {
    Sample s = testutil::make_sample("t2", "text", Source::twitter, Category::benign);
    CHECK_FALSE(annotate_free_form(s, AnnotationMode::open_ended, scripted({""}), {}).parse_ok);
    CHECK_FALSE(annotate_free_form(s, AnnotationMode::open_ended,
                                   scripted({"category one\nand also category two"}), {})
                    .parse_ok);
    CHECK_FALSE(annotate_free_form(s, AnnotationMode::open_ended,
                                   scripted({std::string(80, 'x')}), {})
                    .parse_ok);
    // trailing blank lines are not rambling
    CHECK(annotate_free_form(s, AnnotationMode::open_ended, scripted({"usury\n\n"}), {}).parse_ok);
}

TEST_CASE("consolidate: a valid grouping is accepted and partition-verified") {
    std::vector<LabelCount> labels = {{"drug-sale", 3}, {"narcotics", 2}, {"usury", 2},
                                      {"loan-shark", 1}, {"payday-trap", 1}};
    auto reply = clusters_json({{"drug trade", "sales of narcotics", {"drug-sale", "narcotics"}},
                                {"usury", "predatory lending", {"usury", "loan-shark",
                                                                "payday-trap"}}});
    auto clusters = consolidate_clusters(labels, scripted({reply}));
    REQUIRE(clusters.size() == 2);
    CHECK(clusters[0].members.size() == 2);
    CHECK(clusters[1].members.size() == 3);
}

TEST_CASE("consolidate: one repair round fixes an omission") {
    std::vector<LabelCount> labels = {{"a", 1}, {"b", 1}, {"c", 1}};
    auto incomplete = clusters_json({{"g1", "s", {"a", "b"}}});
    auto complete = clusters_json({{"g1", "s", {"a", "b"}}, {"g2", "s", {"c"}}});
    int calls = 0;
    std::vector<std::string> seen_prompts;
    Completer counting = [&](const std::string& prompt) {
        ++calls;
        seen_prompts.push_back(prompt);
        return calls == 1 ? incomplete : complete;
    };
    auto clusters = consolidate_clusters(labels, counting);
    CHECK(calls == 2);
    CHECK(clusters.size() == 2);
    // The repair prompt names the violation.
    REQUIRE(seen_prompts.size() == 2);
    CHECK(seen_prompts[1].find("missing from every group: c") != std::string::npos);
}

TEST_CASE("consolidate: duplicates and unknown labels also trigger repair") {
    std::vector<LabelCount> labels = {{"a", 1}, {"b", 1}};
    auto doubled = clusters_json({{"g1", "s", {"a", "b"}}, {"g2", "s", {"a"}}});
    auto foreign = clusters_json({{"g1", "s", {"a", "b", "zzz"}}});
    auto good = clusters_json({{"g1", "s", {"a", "b"}}});
    auto clusters = consolidate_clusters(labels, scripted({doubled, foreign, good}));
    CHECK(clusters.size() == 1);
}

TEST_CASE("consolidate: the repair budget is finite and the residue is reported") {
    std::vector<LabelCount> labels = {{"a", 1}, {"b", 1}};
    auto bad = clusters_json({{"g1", "s", {"a"}}});
    CHECK_THROWS_WITH_AS(
        consolidate_clusters(labels, scripted({bad, bad, bad, bad, bad, bad})),
        doctest::Contains("unplaced labels: b"), Error);
}

TEST_CASE("consolidate: non-JSON output consumes a repair round") {
    std::vector<LabelCount> labels = {{"a", 1}};
    auto good = clusters_json({{"g", "s", {"a"}}});
    auto clusters =
        consolidate_clusters(labels, scripted({"I think these all look similar!", good}));
    CHECK(clusters.size() == 1);
}

TEST_CASE("consolidate: a single label lands in a single cluster") {
    std::vector<LabelCount> labels = {{"solo", 4}};
    auto reply = clusters_json({{"solo cluster", "just one", {"solo"}}});
    auto clusters = consolidate_clusters(labels, scripted({reply}));
    REQUIRE(clusters.size() == 1);
    CHECK(clusters[0].members == std::vector<std::string>{"solo"});
}

TEST_CASE("consolidate: batching splits the calls and a merge call unifies them") {
    // 5 labels, batch size 3 -> two batch calls plus one merge call.
    std::vector<LabelCount> labels = {{"l1", 5}, {"l2", 4}, {"l3", 3}, {"l4", 2}, {"l5", 1}};
    auto batch1 = clusters_json({{"alpha", "s1", {"l1", "l3"}},
                                 {"beta", "s2", {"l2"}}});
    auto batch2 = clusters_json({{"gamma", "s3", {"l4", "l5"}}});
    auto merge = clusters_json({{"alpha", "merged s1", {"alpha", "gamma"}},
                                {"beta", "s2", {"beta"}}});
    ConsolidateOptions opts;
    opts.batch_size = 3;
    auto clusters = consolidate_clusters(labels, scripted({batch1, batch2, merge}), opts);
    REQUIRE(clusters.size() == 2);
    std::set<std::string> alpha_members(clusters[0].members.begin(), clusters[0].members.end());
    CHECK(alpha_members == std::set<std::string>{"l1", "l3", "l4", "l5"});
    CHECK(clusters[1].members == std::vector<std::string>{"l2"});
    // The merged result still partitions the full label set.
    std::set<std::string> all;
    for (const auto& c : clusters) {
        for (const auto& m : c.members) CHECK(all.insert(m).second);
    }
    CHECK(all.size() == 5);
}

TEST_CASE("diff_taxonomy: exact names are known, overrides apply, the rest is novel") {
    std::vector<TaxonomyCluster> clusters = {
        {"usury", "predatory lending", {"usury", "loan-shark"}},
        {"gambling", "betting", {"casino-ads"}},
        {"narcotics sales", "drug trade", {"drug-sale"}},
    };
    std::map<std::string, Category> overrides = {{"narcotics sales", Category::drug}};
    auto report = diff_taxonomy(clusters, overrides);
    REQUIRE(report.entries.size() == 3);
    CHECK(report.entries[0].novel);
    CHECK_FALSE(report.entries[1].novel);
    CHECK(report.entries[1].mapped == Category::gambling);
    CHECK_FALSE(report.entries[2].novel);
    CHECK(report.entries[2].mapped == Category::drug);

    auto markdown = report.to_markdown();
    CHECK(markdown.find("usury") != std::string::npos);
    CHECK(markdown.find("1 novel") != std::string::npos);
}

TEST_CASE("diff_taxonomy: novel clusters pick up example texts when wired through") {
    std::vector<TaxonomyCluster> clusters = {{"usury", "loans", {"usury"}}};
    std::vector<FreeFormLabel> annotations = {ok_label("usury")};
    annotations[0].text_id = "t9";
    std::map<std::string, std::string> texts = {{"t9", "quick cash, 30% weekly interest"}};
    auto report = diff_taxonomy(clusters, {}, &annotations, &texts);
    REQUIRE(report.entries.size() == 1);
    REQUIRE(report.entries[0].example_texts.size() == 1);
    CHECK(report.entries[0].example_texts[0].find("30%") != std::string::npos);
}

TEST_CASE("override file loading validates categories") {
    auto dir = testutil::fresh_temp_dir("overrides");
    write_file_atomic(dir / "o.json", R"({"narcotics sales": "drug"})");
    auto overrides = load_override_file(dir / "o.json");
    CHECK(overrides.at("narcotics sales") == Category::drug);
    write_file_atomic(dir / "bad.json", R"({"x": "not-a-category"})");
    CHECK_THROWS_AS(load_override_file(dir / "bad.json"), Error);
}
