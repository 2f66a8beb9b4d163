#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "iclmod/retrieval.hpp"

namespace iclmod {

enum class LabelScheme { original, inverted, abstract_symbols, none };
enum class AbstractStyle { digits, letters };  // letters is the binary A/B variant

std::string_view label_scheme_name(LabelScheme s);
std::optional<LabelScheme> parse_label_scheme(std::string_view s);

enum class OrderingKind { as_retrieved, shuffled, grouped_label_first, grouped_label_last };

struct OrderingPolicy {
    OrderingKind kind = OrderingKind::as_retrieved;
    std::string label;  // for the grouped kinds: the task label moved together

    std::string to_string() const;
    static OrderingPolicy parse(std::string_view s);  // "shuffled", "grouped_label_last:illicit", ...
};

struct PromptConfig {
    Task task = Task::binary;
    std::size_t k = 0;
    Strategy strategy = Strategy::random;
    LabelScheme label_scheme = LabelScheme::original;
    AbstractStyle abstract_style = AbstractStyle::digits;
    OrderingPolicy ordering;
    bool needle = false;
    std::uint64_t seed = 0;
    // Per-demonstration character budget; longer texts are truncated with a
    // marker and the event recorded. 0 disables truncation.
    std::size_t truncate_chars = 4000;

    void validate() const;  // scheme/task compatibility, grouped needs k >= 2
};

// A demonstration as it enters ordering/rendering: pool sample or needle.
struct DemoRef {
    std::string id;
    std::string text;
    std::string task_label;  // "benign"/"illicit" or a category name
};

struct RenderedPrompt {
    std::string text;
    // (sample id, verbalized label) in textual order; the label is empty
    // under the no-label scheme.
    std::vector<std::pair<std::string, std::string>> manifest;
    std::vector<std::string> allowed_labels;
    PromptConfig config;
    std::vector<std::size_t> truncated_demos;  // positions whose text was cut

    std::string hash() const;  // sha256 of text
};

// Verbalizes a task label under the scheme; nullopt for the no-label scheme.
// Throws on scheme/task mismatches (inverted and none are binary-only).
std::optional<std::string> apply_label_scheme(Task task, const std::string& label,
                                              LabelScheme scheme,
                                              AbstractStyle style = AbstractStyle::digits);

// Maps an emitted label string back to the task label; inverse of
// apply_label_scheme over the allowed set. Under the no-label scheme the
// model still answers with the original strings.
std::string unverbalize_label(Task task, const std::string& emitted, LabelScheme scheme,
                              AbstractStyle style = AbstractStyle::digits);

// The option list under the scheme, in template order.
std::vector<std::string> scheme_allowed_labels(Task task, LabelScheme scheme,
                                               AbstractStyle style = AbstractStyle::digits);

// Returns a permutation of the input per the policy. Shuffles are uniform
// given the seed; grouped kinds keep within-group input order and error when
// the grouping label is absent.
std::vector<DemoRef> apply_ordering(std::vector<DemoRef> demos, const OrderingPolicy& policy,
                                    std::uint64_t seed);

// Inserts the needle at a slot drawn uniformly from |haystack|+1 positions,
// preserving the haystack's relative order. Reports the slot when asked.
std::vector<DemoRef> insert_needle(std::vector<DemoRef> haystack, DemoRef needle,
                                   std::uint64_t seed, std::size_t* position = nullptr);

RenderedPrompt render_prompt(const PromptConfig& config, const std::vector<DemoRef>& demos,
                             const std::string& query);

// The full prompt templates, byte-identical to the files under templates/.
const std::string& binary_template();
const std::string& multiclass_template();

// The 13 category names in the multiclass template's option-list order
// (drives the abstract index mapping).
const std::vector<std::string>& template_category_order();

// Recovers (demonstration text, answer) pairs and the trailing query from a
// rendered prompt. This is what the format-aware mock endpoints and the
// manifest-consistency checks rely on.
struct PromptScan {
    std::vector<std::pair<std::string, std::string>> demos;  // (text, answer)
    std::string query;
};
PromptScan scan_prompt_blocks(const std::string& prompt_text);

}  // namespace iclmod
