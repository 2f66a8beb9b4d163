#include "iclmod/corpus.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "iclmod/common.hpp"
#include "iclmod/tokenize.hpp"
#include "json.hpp"

namespace iclmod {

using nlohmann::json;

std::string_view binary_label_name(BinaryLabel l) {
    return l == BinaryLabel::benign ? "benign" : "illicit";
}

std::optional<BinaryLabel> parse_binary_label(std::string_view s) {
    if (s == "benign") return BinaryLabel::benign;
    if (s == "illicit") return BinaryLabel::illicit;
    return std::nullopt;
}

void Sample::set_category(Category c) {
    category = c;
    binary_label = (c == Category::benign) ? BinaryLabel::benign : BinaryLabel::illicit;
}

namespace {

// Best-effort script majority; reporting only.
std::string detect_language(std::string_view text) {
    std::size_t han = 0, kana = 0, hangul = 0, thai = 0, latin = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        char32_t cp = decode_utf8(text, i);
        if ((cp >= 0x4E00 && cp <= 0x9FFF) || (cp >= 0x3400 && cp <= 0x4DBF)) ++han;
        else if (cp >= 0x3040 && cp <= 0x30FF) ++kana;
        else if (cp >= 0xAC00 && cp <= 0xD7AF) ++hangul;
        else if (cp >= 0x0E00 && cp <= 0x0E7F) ++thai;
        else if ((cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z')) ++latin;
    }
    std::size_t best = std::max({han, kana, hangul, thai, latin});
    if (best == 0) return "";
    if (best == kana) return "ja";
    if (best == hangul) return "ko";
    if (best == thai) return "th";
    if (best == han) return "zh";
    return "en";
}

void resolve_label(Sample& s, const std::string& raw, bool route_unmapped) {
    if (raw == "illicit") {
        s.binary_label = BinaryLabel::illicit;
        return;
    }
    if (auto c = parse_category(raw)) {
        s.set_category(*c);
        return;
    }
    s.set_category(unify_category(raw, s.source, route_unmapped));
}

}  // namespace

IngestResult ingest_samples(const std::filesystem::path& path, const IngestOptions& opts) {
    IngestResult result;
    for_each_line(path, [&](std::size_t line_no, std::string_view line) {
        if (trim(line).empty()) return;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            result.issues.push_back({line_no, std::string("malformed JSON: ") + e.what()});
            return;
        }
        if (!rec.is_object() || !rec.contains("text") || !rec["text"].is_string()) {
            result.issues.push_back({line_no, "record has no string 'text' field"});
            return;
        }
        Sample s;
        s.text = rec["text"].get<std::string>();
        if (trim(s.text).empty()) {
            result.issues.push_back({line_no, "empty text after whitespace trimming"});
            return;
        }
        s.source = opts.default_source;
        if (rec.contains("source")) {
            if (!rec["source"].is_string()) {
                result.issues.push_back({line_no, "'source' is not a string"});
                return;
            }
            auto src = parse_source(rec["source"].get<std::string>());
            if (!src) {
                result.issues.push_back(
                    {line_no, "unknown source '" + rec["source"].get<std::string>() + "'"});
                return;
            }
            s.source = *src;
        }
        s.id = rec.contains("id") && rec["id"].is_string() ? rec["id"].get<std::string>()
                                                           : content_id(s.text);
        if (opts.label_mode == LabelMode::labeled) {
            // `category` (unified name) takes precedence over `label`
            // (binary name, unified name, or source-specific raw label).
            try {
                if (rec.contains("category") && rec["category"].is_string()) {
                    auto c = parse_category(rec["category"].get<std::string>());
                    if (!c) throw Error("unknown category '" + rec["category"].get<std::string>() + "'");
                    s.set_category(*c);
                } else if (rec.contains("label") && rec["label"].is_string()) {
                    resolve_label(s, rec["label"].get<std::string>(), opts.route_unmapped_to_others);
                } else {
                    result.issues.push_back({line_no, "labeled mode requires a 'label' field"});
                    return;
                }
            } catch (const Error& e) {
                result.issues.push_back({line_no, e.what()});
                return;
            }
        }
        if (rec.contains("language") && rec["language"].is_string()) {
            s.language = rec["language"].get<std::string>();
        } else if (opts.detect_language) {
            s.language = detect_language(s.text);
        }
        result.samples.push_back(std::move(s));
    });
    return result;
}

SplitRatio parse_split_ratio(std::string_view s) {
    auto pos = s.find(':');
    if (pos == std::string_view::npos) throw Error("split ratio must look like '4:1'");
    int a = 0, b = 0;
    try {
        a = std::stoi(std::string(s.substr(0, pos)));
        b = std::stoi(std::string(s.substr(pos + 1)));
    } catch (const std::exception&) {
        throw Error("split ratio must look like '4:1'");
    }
    if (a < 1 || b < 1) throw Error("split ratio parts must be >= 1");
    return SplitRatio{a, b};
}

namespace {

std::vector<Sample> dedup_by_id(const std::vector<Sample>& in, std::size_t& dropped) {
    std::vector<Sample> out;
    out.reserve(in.size());
    std::map<std::string, bool> seen;
    for (const auto& s : in) {
        if (seen.emplace(s.id, true).second) out.push_back(s);
        else ++dropped;
    }
    return out;
}

void sort_by_id(std::vector<Sample>& v) {
    std::sort(v.begin(), v.end(), [](const Sample& a, const Sample& b) { return a.id < b.id; });
}

// Largest-remainder allocation of the train side across cells. `order` is
// the tie-break sequence for distributing the leftover units. Keeps every
// cell within one sample of its exact share.
std::vector<std::size_t> allocate_train(const std::vector<std::size_t>& cell_sizes,
                                        SplitRatio ratio, const std::vector<std::size_t>& order) {
    const double frac = static_cast<double>(ratio.train) / (ratio.train + ratio.test);
    std::size_t total = 0;
    for (auto n : cell_sizes) total += n;
    std::size_t target = static_cast<std::size_t>(static_cast<double>(total) * frac + 1e-9);
    std::vector<std::size_t> train(cell_sizes.size());
    std::vector<double> rem(cell_sizes.size());
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < cell_sizes.size(); ++i) {
        double exact = static_cast<double>(cell_sizes[i]) * frac;
        train[i] = static_cast<std::size_t>(exact + 1e-9);
        rem[i] = exact - static_cast<double>(train[i]);
        assigned += train[i];
    }
    std::vector<std::size_t> dist = order;
    std::stable_sort(dist.begin(), dist.end(),
                     [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
    for (std::size_t k = 0; assigned < target && k < dist.size(); ++k) {
        std::size_t c = dist[k];
        if (train[c] < cell_sizes[c]) {
            ++train[c];
            ++assigned;
        }
    }
    return train;
}

std::vector<Sample> pick_random(const std::vector<Sample>& pool, std::size_t k, Rng& rng) {
    auto idx = rng.sample_indices(pool.size(), k);
    std::vector<Sample> out;
    out.reserve(k);
    for (auto i : idx) out.push_back(pool[i]);
    return out;
}

}  // namespace

DatasetSplit build_binary_dataset(const std::vector<Sample>& samples, std::size_t total,
                                  SplitRatio ratio, std::uint64_t seed) {
    if (total == 0 || total % 4 != 0) {
        throw Error("binary dataset total must be a positive multiple of 4 (got " +
                    std::to_string(total) + ")");
    }
    DatasetSplit out;
    out.spec.task = "binary";
    out.spec.total = total;
    out.spec.ratio = ratio;
    out.spec.seed = seed;
    auto pool = dedup_by_id(samples, out.spec.duplicates_dropped);

    const std::size_t per_cell = total / 4;
    // Cell order: (benign, twitter), (benign, search), (illicit, twitter),
    // (illicit, search).
    std::array<std::vector<Sample>, 4> cells;
    for (const auto& s : pool) {
        if (!s.binary_label) continue;
        std::size_t label_ix = (*s.binary_label == BinaryLabel::benign) ? 0 : 1;
        std::size_t src_ix = (s.source == Source::twitter) ? 0 : 1;
        cells[label_ix * 2 + src_ix].push_back(s);
    }
    static const char* kCellNames[4] = {"(benign, twitter)", "(benign, search_engine)",
                                        "(illicit, twitter)", "(illicit, search_engine)"};
    for (std::size_t c = 0; c < 4; ++c) {
        if (cells[c].size() < per_cell) {
            throw Error(std::string("insufficient samples in cell ") + kCellNames[c] + ": need " +
                        std::to_string(per_cell) + ", have " + std::to_string(cells[c].size()));
        }
        sort_by_id(cells[c]);  // determinism independent of input order
    }

    std::array<std::vector<Sample>, 4> selected;
    for (std::size_t c = 0; c < 4; ++c) {
        Rng rng(derive_seed(seed, 10, c));
        selected[c] = pick_random(cells[c], per_cell, rng);
    }
    // Diagonal tie-break order so leftover units balance label and source.
    std::vector<std::size_t> sizes(4, per_cell);
    std::vector<std::size_t> order = {0, 3, 2, 1};
    auto train_n = allocate_train(sizes, ratio, order);
    for (std::size_t c = 0; c < 4; ++c) {
        for (std::size_t i = 0; i < selected[c].size(); ++i) {
            (i < train_n[c] ? out.train : out.test).push_back(selected[c][i]);
        }
    }
    return out;
}

DatasetSplit build_multiclass_dataset(const std::vector<Sample>& samples, std::size_t per_class,
                                      std::uint64_t seed, SplitRatio ratio) {
    if (per_class == 0) throw Error("per_class must be positive");
    DatasetSplit out;
    out.spec.task = "multiclass";
    out.spec.per_class = per_class;
    out.spec.ratio = ratio;
    out.spec.seed = seed;
    auto pool = dedup_by_id(samples, out.spec.duplicates_dropped);

    for (std::size_t ci = 0; ci < all_categories().size(); ++ci) {
        Category cat = all_categories()[ci];
        std::vector<Sample> from_twitter, from_search;
        for (const auto& s : pool) {
            if (!s.category || *s.category != cat) continue;
            (s.source == Source::twitter ? from_twitter : from_search).push_back(s);
        }
        if (from_twitter.size() + from_search.size() < per_class) {
            throw Error("category '" + std::string(category_name(cat)) +
                        "' has insufficient samples: need " + std::to_string(per_class) +
                        ", have " + std::to_string(from_twitter.size() + from_search.size()));
        }
        sort_by_id(from_twitter);
        sort_by_id(from_search);

        // 1:1 source ratio targeted; single-source fallback when one side is
        // absent, best-effort top-up when one side is short.
        std::size_t take_t = 0, take_s = 0;
        if (from_twitter.empty()) {
            take_s = per_class;
        } else if (from_search.empty()) {
            take_t = per_class;
        } else {
            take_t = std::min(per_class - per_class / 2, from_twitter.size());
            take_s = std::min(per_class / 2, from_search.size());
            std::size_t short_by = per_class - take_t - take_s;
            std::size_t add_t = std::min(short_by, from_twitter.size() - take_t);
            take_t += add_t;
            short_by -= add_t;
            take_s += std::min(short_by, from_search.size() - take_s);
        }

        Rng rng_t(derive_seed(seed, 20, ci * 2));
        Rng rng_s(derive_seed(seed, 20, ci * 2 + 1));
        auto sel_t = pick_random(from_twitter, take_t, rng_t);
        auto sel_s = pick_random(from_search, take_s, rng_s);

        std::vector<std::size_t> sizes = {sel_t.size(), sel_s.size()};
        std::vector<std::size_t> order = {0, 1};
        auto train_n = allocate_train(sizes, ratio, order);
        for (std::size_t i = 0; i < sel_t.size(); ++i)
            (i < train_n[0] ? out.train : out.test).push_back(sel_t[i]);
        for (std::size_t i = 0; i < sel_s.size(); ++i)
            (i < train_n[1] ? out.train : out.test).push_back(sel_s[i]);
    }
    return out;
}

std::string sample_to_jsonl(const Sample& s) {
    json rec;
    rec["id"] = s.id;
    rec["text"] = s.text;
    rec["source"] = std::string(source_name(s.source));
    if (s.binary_label) rec["label"] = std::string(binary_label_name(*s.binary_label));
    if (s.category) rec["category"] = std::string(category_name(*s.category));
    if (!s.language.empty()) rec["language"] = s.language;
    return rec.dump();
}

std::string DatasetSplit::content_hash() const {
    std::ostringstream ss;
    for (const auto& s : train) ss << sample_to_jsonl(s) << "\n";
    ss << "#test\n";
    for (const auto& s : test) ss << sample_to_jsonl(s) << "\n";
    return sha256_hex(ss.str());
}

namespace {

std::string jsonl_of(const std::vector<Sample>& samples) {
    std::ostringstream ss;
    for (const auto& s : samples) ss << sample_to_jsonl(s) << "\n";
    return ss.str();
}

json spec_to_json(const DatasetSpec& spec) {
    json j;
    j["task"] = spec.task;
    j["ratio"] = std::to_string(spec.ratio.train) + ":" + std::to_string(spec.ratio.test);
    j["seed"] = spec.seed;
    j["duplicates_dropped"] = spec.duplicates_dropped;
    if (spec.task == "binary") j["total"] = spec.total;
    else j["per_class"] = spec.per_class;
    return j;
}

}  // namespace

void save_dataset(const DatasetSplit& split, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_file_atomic(dir / "train.jsonl", jsonl_of(split.train));
    write_file_atomic(dir / "test.jsonl", jsonl_of(split.test));
    json manifest;
    manifest["schema_version"] = 1;
    manifest["spec"] = spec_to_json(split.spec);
    manifest["counts"] = {{"train", split.train.size()}, {"test", split.test.size()}};
    manifest["dataset_hash"] = split.content_hash();
    write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

DatasetSplit load_dataset(const std::filesystem::path& dir) {
    json manifest = json::parse(read_file(dir / "manifest.json"));
    DatasetSplit split;
    const auto& spec = manifest.at("spec");
    split.spec.task = spec.at("task").get<std::string>();
    split.spec.ratio = parse_split_ratio(spec.at("ratio").get<std::string>());
    split.spec.seed = spec.at("seed").get<std::uint64_t>();
    split.spec.duplicates_dropped = spec.value("duplicates_dropped", std::size_t{0});
    split.spec.total = spec.value("total", std::size_t{0});
    split.spec.per_class = spec.value("per_class", std::size_t{0});

    IngestOptions opts;
    opts.label_mode = LabelMode::labeled;
    opts.detect_language = false;
    auto load_side = [&](const char* file, std::vector<Sample>& side) {
        auto res = ingest_samples(dir / file, opts);
        if (!res.issues.empty()) {
            throw Error("corrupt dataset file " + (dir / file).string() + ": line " +
                        std::to_string(res.issues.front().line) + ": " +
                        res.issues.front().message);
        }
        side = std::move(res.samples);
    };
    load_side("train.jsonl", split.train);
    load_side("test.jsonl", split.test);

    auto expected = manifest.at("dataset_hash").get<std::string>();
    if (split.content_hash() != expected) {
        throw Error("dataset content hash mismatch in " + dir.string());
    }
    return split;
}

}  // namespace iclmod
