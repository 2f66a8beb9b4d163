#include "iclmod/prompting.hpp"

#include <algorithm>
#include <map>

#include "iclmod/common.hpp"
#include "iclmod/tokenize.hpp"

namespace iclmod {

namespace {

// Appendix-style block skeleton shared by both tasks.
constexpr const char* kBlockSeparator = "\n\n==\n\nQuery: ";
constexpr const char* kAnswerMarker = "\n\nAnswer: ";
constexpr const char* kTruncationMarker = " ...";

const std::string kBinaryHead =
    "You will act as a content detector to decide if a given text is illicit promotion, "
    "i.e., involving the promotion of illicit goods and services.\n"
    "\n"
    "If it is, label it as 'illicit', otherwise, label it as 'benign'.\n"
    "\n"
    "First, you will be given a set of message examples along with their labels. Then, you "
    "will answer the category of the last message from the following options:\n"
    "\n"
    "- 'benign': Content that does not contain illicit promotion\n"
    "\n"
    "- 'illicit': Content that contain illicit promotion\n"
    "\n"
    "Return only the name of the category, and nothing else.";

const std::string kMulticlassHead =
    "You will act as a content detector.\n"
    "\n"
    "First, you will be given a set of message examples along with their labels. Then, you "
    "will answer the category of the last message from the following options:\n"
    "\n"
    "- 'benign': Content that does not contain illicit promotion\n"
    "\n"
    "- 'porn': Content that is sexually explicit or pornographic in nature\n"
    "\n"
    "- 'surrogacy': Content related to surrogate mothers and gestational surrogacy\n"
    "\n"
    "- 'gambling': Content related to gambling or betting activities\n"
    "\n"
    "- 'drug': Content related to illegal drug use, sales, or promotions\n"
    "\n"
    "- 'data-theft': Content involving the theft or illegal use of data, identity theft, or "
    "similar activities\n"
    "\n"
    "- 'money-laundry': Content involving the promotion or recruitment for money laundering "
    "activities\n"
    "\n"
    "- 'counterfeit': Content related to fake goods, forged certificates or false accounts\n"
    "\n"
    "- 'advertisement': Content related to illegal marketing and black hat SEO\n"
    "\n"
    "- 'weapon': Content related to weapons, including sales, manufacturing, or usage\n"
    "\n"
    "- 'fraud': Content related to fraudulent activities and scams\n"
    "\n"
    "- 'hacking': Content related to hacking, cybersecurity threats, or development of "
    "unlawful programs\n"
    "\n"
    "- 'others': Content that does not fit into any of the above categories\n"
    "\n"
    "Return only the name of the category, and nothing else.";

std::string template_of(const std::string& head) {
    // head, one demonstration block, the repetition ellipsis, the query block.
    return head + kBlockSeparator + "{demonstration_text}" + kAnswerMarker +
           "{demonstration_label}" + "\n\n==\n\n{...}" + kBlockSeparator + "{query_text}" +
           kAnswerMarker;
}

// Simultaneous replacement of quoted label strings: "'from'" -> "'to'" for
// every pair in one pass, so swaps (inverted scheme) cannot cascade.
std::string substitute_quoted(const std::string& text,
                              const std::vector<std::pair<std::string, std::string>>& pairs) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        bool matched = false;
        if (text[i] == '\'') {
            for (const auto& [from, to] : pairs) {
                std::size_t n = from.size();
                if (i + n + 2 <= text.size() && text[i + n + 1] == '\'' &&
                    text.compare(i + 1, n, from) == 0) {
                    out += '\'';
                    out += to;
                    out += '\'';
                    i += n + 2;
                    matched = true;
                    break;
                }
            }
        }
        if (!matched) out += text[i++];
    }
    return out;
}

const std::vector<std::string>& binary_label_order() {
    static const std::vector<std::string> order = {"benign", "illicit"};
    return order;
}

}  // namespace

const std::string& binary_template() {
    static const std::string tpl = template_of(kBinaryHead);
    return tpl;
}

const std::string& multiclass_template() {
    static const std::string tpl = template_of(kMulticlassHead);
    return tpl;
}

const std::vector<std::string>& template_category_order() {
    static const std::vector<std::string> order = {
        "benign",      "porn",          "surrogacy",   "gambling", "drug",
        "data-theft",  "money-laundry", "counterfeit", "advertisement",
        "weapon",      "fraud",         "hacking",     "others",
    };
    return order;
}

std::string_view label_scheme_name(LabelScheme s) {
    switch (s) {
        case LabelScheme::original: return "original";
        case LabelScheme::inverted: return "inverted";
        case LabelScheme::abstract_symbols: return "abstract";
        case LabelScheme::none: return "none";
    }
    throw Error("unreachable scheme");
}

std::optional<LabelScheme> parse_label_scheme(std::string_view s) {
    if (s == "original") return LabelScheme::original;
    if (s == "inverted") return LabelScheme::inverted;
    if (s == "abstract") return LabelScheme::abstract_symbols;
    if (s == "none") return LabelScheme::none;
    return std::nullopt;
}

std::string OrderingPolicy::to_string() const {
    switch (kind) {
        case OrderingKind::as_retrieved: return "as_retrieved";
        case OrderingKind::shuffled: return "shuffled";
        case OrderingKind::grouped_label_first: return "grouped_label_first:" + label;
        case OrderingKind::grouped_label_last: return "grouped_label_last:" + label;
    }
    throw Error("unreachable ordering");
}

OrderingPolicy OrderingPolicy::parse(std::string_view s) {
    OrderingPolicy p;
    if (s == "as_retrieved") return p;
    if (s == "shuffled") {
        p.kind = OrderingKind::shuffled;
        return p;
    }
    auto colon = s.find(':');
    std::string_view head = s.substr(0, colon);
    if (head == "grouped_label_first" || head == "grouped_label_last") {
        if (colon == std::string_view::npos || colon + 1 >= s.size()) {
            throw Error("grouped ordering needs a label, e.g. 'grouped_label_last:illicit'");
        }
        p.kind = head == "grouped_label_first" ? OrderingKind::grouped_label_first
                                               : OrderingKind::grouped_label_last;
        p.label = std::string(s.substr(colon + 1));
        return p;
    }
    throw Error("unknown ordering policy '" + std::string(s) + "'");
}

void PromptConfig::validate() const {
    if (task == Task::multiclass &&
        (label_scheme == LabelScheme::inverted || label_scheme == LabelScheme::none)) {
        throw Error(std::string("label scheme '") + std::string(label_scheme_name(label_scheme)) +
                    "' is only supported for the binary task");
    }
    if (task == Task::multiclass && label_scheme == LabelScheme::abstract_symbols &&
        abstract_style == AbstractStyle::letters) {
        throw Error("letter-style abstract labels are only defined for the binary task");
    }
    if ((ordering.kind == OrderingKind::grouped_label_first ||
         ordering.kind == OrderingKind::grouped_label_last) &&
        k < 2) {
        throw Error("grouped orderings require k >= 2");
    }
}

std::optional<std::string> apply_label_scheme(Task task, const std::string& label,
                                              LabelScheme scheme, AbstractStyle style) {
    if (task == Task::binary) {
        if (label != "benign" && label != "illicit") {
            throw Error("invalid binary label '" + label + "'");
        }
        bool is_benign = label == "benign";
        switch (scheme) {
            case LabelScheme::original: return label;
            case LabelScheme::inverted: return is_benign ? "illicit" : "benign";
            case LabelScheme::abstract_symbols:
                if (style == AbstractStyle::digits) return is_benign ? "0" : "1";
                return is_benign ? "A" : "B";
            case LabelScheme::none: return std::nullopt;
        }
        throw Error("unreachable scheme");
    }
    const auto& order = template_category_order();
    auto it = std::find(order.begin(), order.end(), label);
    if (it == order.end()) throw Error("invalid multiclass label '" + label + "'");
    switch (scheme) {
        case LabelScheme::original: return label;
        case LabelScheme::abstract_symbols:
            if (style == AbstractStyle::letters) {
                throw Error("letter-style abstract labels are only defined for the binary task");
            }
            return std::to_string(it - order.begin());
        case LabelScheme::inverted:
        case LabelScheme::none:
            throw Error(std::string("label scheme '") +
                        std::string(label_scheme_name(scheme)) +
                        "' is only supported for the binary task");
    }
    throw Error("unreachable scheme");
}

std::vector<std::string> scheme_allowed_labels(Task task, LabelScheme scheme,
                                               AbstractStyle style) {
    const auto& order = task == Task::binary ? binary_label_order() : template_category_order();
    std::vector<std::string> out;
    out.reserve(order.size());
    for (const auto& label : order) {
        if (scheme == LabelScheme::none) {
            out.push_back(label);  // the model still answers with the original strings
        } else {
            out.push_back(*apply_label_scheme(task, label, scheme, style));
        }
    }
    return out;
}

std::string unverbalize_label(Task task, const std::string& emitted, LabelScheme scheme,
                              AbstractStyle style) {
    const auto& order = task == Task::binary ? binary_label_order() : template_category_order();
    for (const auto& label : order) {
        auto verbalized = scheme == LabelScheme::none
                              ? std::optional<std::string>(label)
                              : apply_label_scheme(task, label, scheme, style);
        if (verbalized && *verbalized == emitted) return label;
    }
    throw Error("emitted label '" + emitted + "' is not in the allowed set");
}

std::vector<DemoRef> apply_ordering(std::vector<DemoRef> demos, const OrderingPolicy& policy,
                                    std::uint64_t seed) {
    switch (policy.kind) {
        case OrderingKind::as_retrieved: return demos;
        case OrderingKind::shuffled: {
            Rng rng(seed);
            rng.shuffle(demos);
            return demos;
        }
        case OrderingKind::grouped_label_first:
        case OrderingKind::grouped_label_last: {
            std::vector<DemoRef> grouped, rest;
            for (auto& d : demos) {
                (d.task_label == policy.label ? grouped : rest).push_back(std::move(d));
            }
            if (grouped.empty()) {
                throw Error("grouping label '" + policy.label + "' is absent from the demos");
            }
            std::vector<DemoRef> out;
            out.reserve(grouped.size() + rest.size());
            if (policy.kind == OrderingKind::grouped_label_first) {
                out.insert(out.end(), grouped.begin(), grouped.end());
                out.insert(out.end(), rest.begin(), rest.end());
            } else {
                out.insert(out.end(), rest.begin(), rest.end());
                out.insert(out.end(), grouped.begin(), grouped.end());
            }
            return out;
        }
    }
    throw Error("unreachable ordering");
}

std::vector<DemoRef> insert_needle(std::vector<DemoRef> haystack, DemoRef needle,
                                   std::uint64_t seed, std::size_t* position) {
    Rng rng(seed);
    std::size_t pos = static_cast<std::size_t>(rng.below(haystack.size() + 1));
    haystack.insert(haystack.begin() + static_cast<std::ptrdiff_t>(pos), std::move(needle));
    if (position != nullptr) *position = pos;
    return haystack;
}

namespace {

std::string instruction_block(const PromptConfig& config) {
    const std::string& head = config.task == Task::binary ? kBinaryHead : kMulticlassHead;
    if (config.label_scheme == LabelScheme::original || config.label_scheme == LabelScheme::none) {
        return head;  // no-label keeps the instructions verbatim
    }
    const auto& order =
        config.task == Task::binary ? binary_label_order() : template_category_order();
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& label : order) {
        pairs.emplace_back(label, *apply_label_scheme(config.task, label, config.label_scheme,
                                                      config.abstract_style));
    }
    return substitute_quoted(head, pairs);
}

}  // namespace

RenderedPrompt render_prompt(const PromptConfig& config, const std::vector<DemoRef>& demos,
                             const std::string& query) {
    config.validate();
    RenderedPrompt out;
    out.config = config;
    out.allowed_labels =
        scheme_allowed_labels(config.task, config.label_scheme, config.abstract_style);

    std::string text = instruction_block(config);
    for (std::size_t i = 0; i < demos.size(); ++i) {
        auto verbalized = apply_label_scheme(config.task, demos[i].task_label,
                                             config.label_scheme, config.abstract_style);
        std::string demo_text = demos[i].text;
        if (config.truncate_chars > 0 && demo_text.size() > config.truncate_chars) {
            demo_text = truncate_utf8(demo_text, config.truncate_chars) + kTruncationMarker;
            out.truncated_demos.push_back(i);
        }
        text += kBlockSeparator;
        text += demo_text;
        text += kAnswerMarker;
        if (verbalized) text += *verbalized;
        out.manifest.emplace_back(demos[i].id, verbalized.value_or(""));
    }
    text += kBlockSeparator;
    text += query;
    text += kAnswerMarker;
    out.text = std::move(text);
    return out;
}

std::string RenderedPrompt::hash() const {
    return sha256_hex(text);
}

PromptScan scan_prompt_blocks(const std::string& prompt_text) {
    PromptScan scan;
    const std::string sep = kBlockSeparator;   // "\n\n==\n\nQuery: "
    const std::string inner = "\n\n==\n\nQuery: ";
    const std::string answer = kAnswerMarker;  // "\n\nAnswer: "

    std::size_t pos = prompt_text.find(sep);
    if (pos == std::string::npos) throw Error("prompt has no query block");
    std::vector<std::string> segments;
    pos += sep.size();
    for (;;) {
        std::size_t next = prompt_text.find(inner, pos);
        if (next == std::string::npos) {
            segments.push_back(prompt_text.substr(pos));
            break;
        }
        segments.push_back(prompt_text.substr(pos, next - pos));
        pos = next + inner.size();
    }
    for (std::size_t i = 0; i < segments.size(); ++i) {
        // Demonstration texts are likelier to contain the marker than labels,
        // so split on the last occurrence.
        std::size_t a = segments[i].rfind(answer);
        if (a == std::string::npos) throw Error("prompt block lacks an answer marker");
        std::string text = segments[i].substr(0, a);
        std::string label = segments[i].substr(a + answer.size());
        if (i + 1 == segments.size()) {
            if (!label.empty()) throw Error("final query block carries an answer");
            scan.query = std::move(text);
        } else {
            scan.demos.emplace_back(std::move(text), std::move(label));
        }
    }
    return scan;
}

}  // namespace iclmod
