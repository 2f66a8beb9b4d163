#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "iclmod/corpus.hpp"
#include "json.hpp"

namespace iclmod {

enum class AnnotationMode { anchored, open_ended };

std::string_view annotation_mode_name(AnnotationMode m);
std::optional<AnnotationMode> parse_annotation_mode(std::string_view s);

// A raw-prompt completion function; lets tests script the model and the CLI
// plug in a gateway endpoint. Throws on transport failure.
using Completer = std::function<std::string(const std::string& prompt)>;

struct FewShotExample {
    std::string text;
    std::string label;
};

struct FreeFormLabel {
    std::string text_id;
    std::string raw;         // first line of the completion, untouched
    std::string normalized;  // lowercase, hyphen-joined tokens
    AnnotationMode mode = AnnotationMode::open_ended;
    bool parse_ok = false;   // failed annotations are skipped in stage 2
};

// Lowercases and splits on ASCII separators/punctuation, joining the pieces
// with hyphens: "Luxury-Goods-Counterfeit" -> "luxury-goods-counterfeit".
// Returns "" when nothing survives.
std::string normalize_free_label(const std::string& raw);

// Stage-1 prompt. Anchored mode lists the 12 known illicit categories and
// explicitly permits new names; open-ended mode mentions none of them.
std::string render_annotation_prompt(const std::string& text, AnnotationMode mode,
                                     const std::vector<FewShotExample>& examples);

FreeFormLabel annotate_free_form(const Sample& sample, AnnotationMode mode,
                                 const Completer& complete,
                                 const std::vector<FewShotExample>& examples);

struct LabelCount {
    std::string label;  // normalized
    std::size_t count = 0;
};

// Case/punctuation/whitespace-insensitive dedup with counts, ordered by
// (count desc, label asc). Annotations that failed to parse are skipped.
std::vector<LabelCount> normalize_labels(const std::vector<FreeFormLabel>& labels);

struct TaxonomyCluster {
    std::string name;
    std::string summary;
    std::vector<std::string> members;  // normalized free-form labels
};

struct ConsolidateOptions {
    std::size_t batch_size = 200;
    int repair_budget = 3;
};

// Stage-2 prompt over one batch of labels (exposed for the CLI debug path
// and the prompt-content tests).
std::string render_consolidation_prompt(const std::vector<LabelCount>& labels);

// Groups the labels into named, summarized clusters via the LLM. The result
// must partition the input label set; violations trigger up to
// `repair_budget` re-prompts listing the offending labels, after which the
// residue is reported in the thrown error. Batches larger inputs and merges
// the per-batch clusters with one final call.
std::vector<TaxonomyCluster> consolidate_clusters(const std::vector<LabelCount>& labels,
                                                  const Completer& complete,
                                                  const ConsolidateOptions& opts = {});

struct NoveltyEntry {
    TaxonomyCluster cluster;
    bool novel = false;
    std::optional<Category> mapped;  // for known clusters
    std::vector<std::string> example_texts;
};

struct NoveltyReport {
    std::vector<NoveltyEntry> entries;

    nlohmann::json to_json() const;
    std::string to_markdown() const;
};

// Marks each cluster known (exact normalized-name match against the unified
// taxonomy, or an entry in the override map) or novel. When annotations and
// their texts are supplied, novel clusters carry up to three example texts.
NoveltyReport diff_taxonomy(const std::vector<TaxonomyCluster>& clusters,
                            const std::map<std::string, Category>& overrides = {},
                            const std::vector<FreeFormLabel>* annotations = nullptr,
                            const std::map<std::string, std::string>* texts_by_id = nullptr);

// Override file: JSON object {"cluster name": "unified category", ...}.
std::map<std::string, Category> load_override_file(const std::filesystem::path& path);

}  // namespace iclmod
