#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "iclmod/taxonomy.hpp"

namespace iclmod {

enum class BinaryLabel { benign, illicit };

std::string_view binary_label_name(BinaryLabel l);
std::optional<BinaryLabel> parse_binary_label(std::string_view s);

struct Sample {
    std::string id;
    std::string text;
    Source source = Source::twitter;
    std::optional<BinaryLabel> binary_label;
    std::optional<Category> category;
    std::string language;  // informational only, never gates sampling

    // Enforces the label coupling: a non-benign category implies illicit,
    // category benign implies benign.
    void set_category(Category c);
};

struct IngestIssue {
    std::size_t line = 0;
    std::string message;
};

struct IngestResult {
    std::vector<Sample> samples;
    std::vector<IngestIssue> issues;
};

enum class LabelMode { labeled, unlabeled };

struct IngestOptions {
    Source default_source = Source::twitter;
    LabelMode label_mode = LabelMode::labeled;
    bool route_unmapped_to_others = false;
    // Best-effort language detection for records without a language field.
    // Off when reloading datasets we wrote ourselves, so round trips are
    // lossless.
    bool detect_language = true;
};

// Reads a JSONL file with fields {id?, text, label?, source?, language?}.
// Invalid records are reported in `issues` with their line number and
// skipped; a missing file throws. Absent ids become content hashes.
IngestResult ingest_samples(const std::filesystem::path& path, const IngestOptions& opts);

struct SplitRatio {
    int train = 4;
    int test = 1;
};

SplitRatio parse_split_ratio(std::string_view s);  // "4:1"

struct DatasetSpec {
    std::string task;  // "binary" | "multiclass"
    std::size_t total = 0;
    std::size_t per_class = 0;
    SplitRatio ratio;
    std::uint64_t seed = 0;
    std::size_t duplicates_dropped = 0;
};

struct DatasetSplit {
    std::vector<Sample> train;
    std::vector<Sample> test;
    DatasetSpec spec;

    // SHA-256 over the canonical serialized content (train then test).
    std::string content_hash() const;
};

// Balanced binary dataset: total/4 samples per (label, source) cell, split
// at `ratio` per cell. Deterministic for a fixed seed. Errors name the
// deficient cell.
DatasetSplit build_binary_dataset(const std::vector<Sample>& samples, std::size_t total,
                                  SplitRatio ratio, std::uint64_t seed);

// Balanced multiclass dataset: per_class samples for each of the 13
// categories, 1:1 source ratio where feasible with single-source fallback,
// split at `ratio` per (category, source) cell.
DatasetSplit build_multiclass_dataset(const std::vector<Sample>& samples, std::size_t per_class,
                                      std::uint64_t seed, SplitRatio ratio = SplitRatio{});

// train.jsonl + test.jsonl + manifest.json (build spec + counts + hash).
void save_dataset(const DatasetSplit& split, const std::filesystem::path& dir);
DatasetSplit load_dataset(const std::filesystem::path& dir);

std::string sample_to_jsonl(const Sample& s);

}  // namespace iclmod
