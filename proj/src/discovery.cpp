#include "iclmod/discovery.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "iclmod/common.hpp"
#include "iclmod/tokenize.hpp"

namespace iclmod {

using nlohmann::json;

std::string_view annotation_mode_name(AnnotationMode m) {
    return m == AnnotationMode::anchored ? "anchored" : "open_ended";
}

std::optional<AnnotationMode> parse_annotation_mode(std::string_view s) {
    if (s == "anchored") return AnnotationMode::anchored;
    if (s == "open_ended") return AnnotationMode::open_ended;
    return std::nullopt;
}

std::string normalize_free_label(const std::string& raw) {
    std::string lowered = to_lower(raw);
    std::vector<std::string> parts;
    std::string run;
    for (unsigned char c : lowered) {
        bool separator = c < 0x80 && !std::isalnum(c);
        if (separator) {
            if (!run.empty()) {
                parts.push_back(run);
                run.clear();
            }
        } else {
            run.push_back(static_cast<char>(c));
        }
    }
    if (!run.empty()) parts.push_back(run);
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) out += '-';
        out += parts[i];
    }
    return out;
}

namespace {

const std::string kAnnotationHeadCommon =
    "You will act as a content analyst reviewing online text for illicit promotion.";

const std::string kAnchoredInstructions =
    "Given a text, respond with a concise category name (a few words, hyphen-joined) "
    "describing the core illicit activity it promotes, or 'benign' if it promotes nothing "
    "illicit.\n"
    "\n"
    "Known categories, for reference: porn, surrogacy, gambling, drug, weapon, data-theft, "
    "money-laundry, advertisement, counterfeit, hacking, fraud, others.\n"
    "\n"
    "If none of the known categories fits, propose a new concise category name instead.";

const std::string kOpenEndedInstructions =
    "Given a text, respond with a concise category name (a few words, hyphen-joined) that "
    "best captures the core activity being promoted, or 'benign' if it promotes nothing "
    "illicit.";

const std::string kAnnotationTail = "Return only the category name, and nothing else.";

}  // namespace

std::string render_annotation_prompt(const std::string& text, AnnotationMode mode,
                                     const std::vector<FewShotExample>& examples) {
    std::string prompt = kAnnotationHeadCommon + "\n\n" +
                         (mode == AnnotationMode::anchored ? kAnchoredInstructions
                                                           : kOpenEndedInstructions) +
                         "\n\n" + kAnnotationTail;
    for (const auto& example : examples) {
        prompt += "\n\n==\n\nQuery: " + example.text + "\n\nAnswer: " + example.label;
    }
    prompt += "\n\n==\n\nQuery: " + text + "\n\nAnswer: ";
    return prompt;
}

FreeFormLabel annotate_free_form(const Sample& sample, AnnotationMode mode,
                                 const Completer& complete,
                                 const std::vector<FewShotExample>& examples) {
    FreeFormLabel out;
    out.text_id = sample.id;
    out.mode = mode;
    std::string raw = complete(render_annotation_prompt(sample.text, mode, examples));

    // A usable annotation is a single short line; anything else (empty
    // output, multi-line rambling) is a parse failure and the text is
    // skipped in stage 2.
    std::string trimmed = trim(raw);
    std::size_t newline = trimmed.find('\n');
    std::string first_line = trim(newline == std::string::npos ? trimmed
                                                               : trimmed.substr(0, newline));
    bool multi_line = false;
    if (newline != std::string::npos && !trim(trimmed.substr(newline + 1)).empty()) {
        multi_line = true;
    }
    out.raw = first_line;
    if (!first_line.empty() && !multi_line && first_line.size() <= 64) {
        out.normalized = normalize_free_label(first_line);
        out.parse_ok = !out.normalized.empty();
    }
    return out;
}

std::vector<LabelCount> normalize_labels(const std::vector<FreeFormLabel>& labels) {
    if (labels.empty()) throw Error("normalize_labels: empty input");
    std::map<std::string, std::size_t> counts;
    for (const auto& label : labels) {
        if (!label.parse_ok) continue;
        ++counts[label.normalized];
    }
    std::vector<LabelCount> out;
    out.reserve(counts.size());
    for (const auto& [label, count] : counts) out.push_back({label, count});
    std::sort(out.begin(), out.end(), [](const LabelCount& a, const LabelCount& b) {
        if (a.count != b.count) return a.count > b.count;
        return a.label < b.label;
    });
    return out;
}

namespace {

const std::string kConsolidateHead =
    "You will act as a taxonomy analyst consolidating free-form category labels produced by "
    "a content review system.\n"
    "\n"
    "Below is a list of category labels with their occurrence counts. Group the labels by "
    "the underlying illegal activity they describe. Every label must be placed in exactly "
    "one group.\n"
    "\n"
    "For each group, provide a concise cluster name and a one-sentence summary of the "
    "activity.\n"
    "\n"
    "Respond with JSON only, in this exact shape:\n"
    "{\"clusters\": [{\"name\": \"...\", \"summary\": \"...\", \"members\": [\"label-a\", "
    "\"label-b\"]}]}\n"
    "\n"
    "Labels:";

const std::string kMergeHead =
    "You will act as a taxonomy analyst merging cluster lists produced from separate "
    "batches of category labels.\n"
    "\n"
    "Below are clusters with their names and summaries. Group together clusters that "
    "describe the same underlying illegal activity. Every cluster name must be placed in "
    "exactly one group.\n"
    "\n"
    "For each group, provide a concise cluster name and a one-sentence summary.\n"
    "\n"
    "Respond with JSON only, in this exact shape:\n"
    "{\"clusters\": [{\"name\": \"...\", \"summary\": \"...\", \"members\": "
    "[\"cluster-name-a\", \"cluster-name-b\"]}]}\n"
    "\n"
    "Clusters:";

struct PartitionViolations {
    std::vector<std::string> missing;
    std::vector<std::string> duplicated;
    std::vector<std::string> unknown;
    std::string parse_error;

    bool ok() const {
        return missing.empty() && duplicated.empty() && unknown.empty() && parse_error.empty();
    }
    std::string describe() const {
        if (!parse_error.empty()) return "the response was not valid JSON: " + parse_error;
        std::string out;
        auto join = [](const std::vector<std::string>& v) {
            std::string s;
            for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + v[i];
            return s;
        };
        if (!missing.empty()) out += "- labels missing from every group: " + join(missing) + "\n";
        if (!duplicated.empty()) out += "- labels placed in multiple groups: " + join(duplicated) + "\n";
        if (!unknown.empty()) out += "- labels that are not in the list: " + join(unknown) + "\n";
        return out;
    }
};

std::vector<TaxonomyCluster> parse_cluster_json(const std::string& completion,
                                                std::string& parse_error) {
    auto first = completion.find('{');
    auto last = completion.rfind('}');
    if (first == std::string::npos || last == std::string::npos || last < first) {
        parse_error = "no JSON object found";
        return {};
    }
    std::vector<TaxonomyCluster> clusters;
    try {
        json parsed = json::parse(completion.substr(first, last - first + 1));
        for (const auto& c : parsed.at("clusters")) {
            TaxonomyCluster cluster;
            cluster.name = c.at("name").get<std::string>();
            cluster.summary = c.value("summary", "");
            for (const auto& m : c.at("members")) cluster.members.push_back(m.get<std::string>());
            clusters.push_back(std::move(cluster));
        }
    } catch (const json::exception& e) {
        parse_error = e.what();
        return {};
    }
    return clusters;
}

PartitionViolations check_partition(const std::set<std::string>& expected,
                                    const std::vector<TaxonomyCluster>& clusters) {
    PartitionViolations v;
    std::map<std::string, int> seen;
    for (const auto& cluster : clusters) {
        for (const auto& member : cluster.members) {
            if (expected.count(member) == 0) {
                v.unknown.push_back(member);
            } else {
                ++seen[member];
            }
        }
    }
    for (const auto& label : expected) {
        auto it = seen.find(label);
        if (it == seen.end()) v.missing.push_back(label);
        else if (it->second > 1) v.duplicated.push_back(label);
    }
    std::sort(v.unknown.begin(), v.unknown.end());
    v.unknown.erase(std::unique(v.unknown.begin(), v.unknown.end()), v.unknown.end());
    return v;
}

// One prompt -> validate -> repair loop. `expected` is the label set the
// clusters must partition.
std::vector<TaxonomyCluster> consolidate_with_repair(const std::string& base_prompt,
                                                     const std::set<std::string>& expected,
                                                     const Completer& complete,
                                                     int repair_budget) {
    std::string prompt = base_prompt;
    PartitionViolations violations;
    for (int round = 0; round <= repair_budget; ++round) {
        std::string completion = complete(prompt);
        std::string parse_error;
        auto clusters = parse_cluster_json(completion, parse_error);
        violations = PartitionViolations{};
        violations.parse_error = parse_error;
        if (parse_error.empty()) violations = check_partition(expected, clusters);
        if (violations.ok()) return clusters;
        prompt = base_prompt + "\n\nYour previous grouping was invalid:\n" +
                 violations.describe() +
                 "Return corrected JSON that places every listed label in exactly one group.";
    }
    std::string residue;
    for (const auto& label : violations.missing) residue += (residue.empty() ? "" : ", ") + label;
    throw Error("consolidation failed after repair budget was exhausted; unplaced labels: " +
                (residue.empty() ? std::string("(none; other violations persisted)") : residue));
}

}  // namespace

std::string render_consolidation_prompt(const std::vector<LabelCount>& labels) {
    std::string prompt = kConsolidateHead;
    for (const auto& lc : labels) {
        prompt += "\n- " + lc.label + " (count: " + std::to_string(lc.count) + ")";
    }
    return prompt;
}

std::vector<TaxonomyCluster> consolidate_clusters(const std::vector<LabelCount>& labels,
                                                  const Completer& complete,
                                                  const ConsolidateOptions& opts) {
    if (labels.empty()) throw Error("consolidate_clusters: empty label set");
    if (opts.batch_size == 0) throw Error("batch size must be positive");

    std::vector<TaxonomyCluster> collected;
    for (std::size_t start = 0; start < labels.size(); start += opts.batch_size) {
        std::size_t end = std::min(labels.size(), start + opts.batch_size);
        std::vector<LabelCount> batch(labels.begin() + static_cast<std::ptrdiff_t>(start),
                                      labels.begin() + static_cast<std::ptrdiff_t>(end));
        std::set<std::string> expected;
        for (const auto& lc : batch) expected.insert(lc.label);
        auto clusters = consolidate_with_repair(render_consolidation_prompt(batch), expected,
                                                complete, opts.repair_budget);
        collected.insert(collected.end(), clusters.begin(), clusters.end());
    }
    if (labels.size() <= opts.batch_size) return collected;

    // Same-named clusters from different batches describe the same concept;
    // fold them before the merge call so cluster names are unique keys.
    std::vector<TaxonomyCluster> unique;
    for (auto& cluster : collected) {
        auto it = std::find_if(unique.begin(), unique.end(), [&](const TaxonomyCluster& u) {
            return u.name == cluster.name;
        });
        if (it == unique.end()) {
            unique.push_back(std::move(cluster));
        } else {
            it->members.insert(it->members.end(), cluster.members.begin(), cluster.members.end());
        }
    }

    std::string merge_prompt = kMergeHead;
    std::set<std::string> cluster_names;
    for (const auto& cluster : unique) {
        merge_prompt += "\n- " + cluster.name + ": " + cluster.summary +
                        " (labels: " + std::to_string(cluster.members.size()) + ")";
        cluster_names.insert(cluster.name);
    }
    auto groups =
        consolidate_with_repair(merge_prompt, cluster_names, complete, opts.repair_budget);

    std::vector<TaxonomyCluster> final_clusters;
    for (const auto& group : groups) {
        TaxonomyCluster merged;
        merged.name = group.name;
        merged.summary = group.summary;
        for (const auto& constituent_name : group.members) {
            auto it = std::find_if(unique.begin(), unique.end(), [&](const TaxonomyCluster& u) {
                return u.name == constituent_name;
            });
            merged.members.insert(merged.members.end(), it->members.begin(), it->members.end());
        }
        final_clusters.push_back(std::move(merged));
    }

    // The merge preserves the per-batch partitions by construction, but the
    // property is load-bearing, so verify rather than assume.
    std::set<std::string> all_labels;
    for (const auto& lc : labels) all_labels.insert(lc.label);
    auto violations = check_partition(all_labels, final_clusters);
    if (!violations.ok()) {
        throw Error("merged clustering does not partition the label set: " +
                    violations.describe());
    }
    return final_clusters;
}

NoveltyReport diff_taxonomy(const std::vector<TaxonomyCluster>& clusters,
                            const std::map<std::string, Category>& overrides,
                            const std::vector<FreeFormLabel>* annotations,
                            const std::map<std::string, std::string>* texts_by_id) {
    std::map<std::string, Category> normalized_overrides;
    for (const auto& [name, cat] : overrides) {
        normalized_overrides[normalize_free_label(name)] = cat;
    }
    NoveltyReport report;
    for (const auto& cluster : clusters) {
        NoveltyEntry entry;
        entry.cluster = cluster;
        std::string norm = normalize_free_label(cluster.name);
        if (auto cat = parse_category(norm)) {
            entry.mapped = *cat;
        } else if (auto it = normalized_overrides.find(norm); it != normalized_overrides.end()) {
            entry.mapped = it->second;
        } else {
            entry.novel = true;
            if (annotations != nullptr && texts_by_id != nullptr) {
                std::set<std::string> member_set(cluster.members.begin(), cluster.members.end());
                for (const auto& annotation : *annotations) {
                    if (entry.example_texts.size() >= 3) break;
                    if (!annotation.parse_ok || member_set.count(annotation.normalized) == 0) {
                        continue;
                    }
                    auto text_it = texts_by_id->find(annotation.text_id);
                    if (text_it != texts_by_id->end()) {
                        entry.example_texts.push_back(
                            truncate_utf8(text_it->second, 120));
                    }
                }
            }
        }
        report.entries.push_back(std::move(entry));
    }
    return report;
}

json NoveltyReport::to_json() const {
    json j;
    j["schema_version"] = 1;
    json entries_json = json::array();
    for (const auto& entry : entries) {
        json e;
        e["name"] = entry.cluster.name;
        e["summary"] = entry.cluster.summary;
        e["members"] = entry.cluster.members;
        e["member_count"] = entry.cluster.members.size();
        e["novel"] = entry.novel;
        if (entry.mapped) e["mapped_to"] = std::string(category_name(*entry.mapped));
        if (!entry.example_texts.empty()) e["example_texts"] = entry.example_texts;
        entries_json.push_back(e);
    }
    j["clusters"] = entries_json;
    return j;
}

std::string NoveltyReport::to_markdown() const {
    std::size_t novel_count = 0;
    for (const auto& entry : entries) novel_count += entry.novel ? 1 : 0;
    std::ostringstream out;
    out << "# Taxonomy discovery report\n\n";
    out << entries.size() << " clusters, " << novel_count << " novel.\n\n";
    out << "## Known categories\n\n";
    out << "| Cluster | Mapped to | Labels |\n|---|---|---|\n";
    for (const auto& entry : entries) {
        if (entry.novel) continue;
        out << "| " << entry.cluster.name << " | " << category_name(*entry.mapped) << " | "
            << entry.cluster.members.size() << " |\n";
    }
    out << "\n## Novel clusters\n";
    for (const auto& entry : entries) {
        if (!entry.novel) continue;
        out << "\n### " << entry.cluster.name << " (" << entry.cluster.members.size()
            << " labels)\n\n" << entry.cluster.summary << "\n\nMembers:";
        for (const auto& member : entry.cluster.members) out << " `" << member << "`";
        out << "\n";
        if (!entry.example_texts.empty()) {
            out << "\nExamples:\n";
            for (const auto& text : entry.example_texts) out << "- " << text << "\n";
        }
    }
    return out.str();
}

std::map<std::string, Category> load_override_file(const std::filesystem::path& path) {
    json parsed = json::parse(read_file(path));
    if (!parsed.is_object()) throw Error("override file must be a JSON object");
    std::map<std::string, Category> overrides;
    for (const auto& [name, value] : parsed.items()) {
        auto cat = parse_category(value.get<std::string>());
        if (!cat) {
            throw Error("override '" + name + "' maps to unknown category '" +
                        value.get<std::string>() + "'");
        }
        overrides[name] = *cat;
    }
    return overrides;
}

}  // namespace iclmod
