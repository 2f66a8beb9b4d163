#pragma once

#include <filesystem>
#include <unistd.h>
#include <string>
#include <vector>

#include "iclmod/corpus.hpp"

namespace testutil {

inline std::filesystem::path source_dir() {
    return std::filesystem::path(ICLMOD_SOURCE_DIR);
}

inline std::filesystem::path fresh_temp_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() /
               ("iclmod_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline iclmod::Sample make_sample(const std::string& id, const std::string& text,
                                  iclmod::Source source, iclmod::Category category) {
    iclmod::Sample s;
    s.id = id;
    s.text = text;
    s.source = source;
    s.set_category(category);
    return s;
}

// n samples per (category, source) cell, distinct deterministic texts.
inline std::vector<iclmod::Sample> make_corpus(std::size_t per_cell) {
    std::vector<iclmod::Sample> out;
    for (iclmod::Category cat : iclmod::all_categories()) {
        for (iclmod::Source src : {iclmod::Source::twitter, iclmod::Source::search_engine}) {
            for (std::size_t i = 0; i < per_cell; ++i) {
                std::string name(iclmod::category_name(cat));
                std::string id = name + "-" + std::string(iclmod::source_name(src)) + "-" +
                                 std::to_string(i);
                std::string text = name + " offer number " + std::to_string(i) + " via " +
                                   std::string(iclmod::source_name(src));
                out.push_back(make_sample(id, text, src, cat));
            }
        }
    }
    return out;
}

// per_cell samples for each (binary label, source) cell; the illicit side
// cycles through the 12 categories.
inline std::vector<iclmod::Sample> make_binary_corpus(std::size_t per_cell) {
    std::vector<iclmod::Sample> out;
    const auto& cats = iclmod::illicit_categories();
    for (iclmod::Source src : {iclmod::Source::twitter, iclmod::Source::search_engine}) {
        for (std::size_t i = 0; i < per_cell; ++i) {
            std::string tag(iclmod::source_name(src));
            out.push_back(make_sample("bn-" + tag + "-" + std::to_string(i),
                                      "harmless neighborhood note " + std::to_string(i) + " " + tag,
                                      src, iclmod::Category::benign));
            out.push_back(make_sample("il-" + tag + "-" + std::to_string(i),
                                      "shady marketplace pitch " + std::to_string(i) + " " + tag,
                                      src, cats[i % cats.size()]));
        }
    }
    return out;
}

// A small balanced binary split: `per_label` train and `test_per_label` test
// samples per binary label, categories alternating for illicit.
inline iclmod::DatasetSplit make_binary_split(std::size_t per_label,
                                              std::size_t test_per_label) {
    iclmod::DatasetSplit split;
    split.spec.task = "binary";
    auto illicit_cat = [](std::size_t i) {
        const auto& cats = iclmod::illicit_categories();
        return cats[i % cats.size()];
    };
    for (std::size_t i = 0; i < per_label; ++i) {
        split.train.push_back(make_sample("tr-b-" + std::to_string(i),
                                          "community picnic announcement " + std::to_string(i),
                                          iclmod::Source::twitter, iclmod::Category::benign));
        split.train.push_back(make_sample("tr-i-" + std::to_string(i),
                                          "underground market listing " + std::to_string(i),
                                          iclmod::Source::search_engine, illicit_cat(i)));
    }
    for (std::size_t i = 0; i < test_per_label; ++i) {
        split.test.push_back(make_sample("te-b-" + std::to_string(i),
                                         "library opening hours notice " + std::to_string(i),
                                         iclmod::Source::twitter, iclmod::Category::benign));
        split.test.push_back(make_sample("te-i-" + std::to_string(i),
                                         "contraband shipping deal " + std::to_string(i),
                                         iclmod::Source::search_engine, illicit_cat(i)));
    }
    return split;
}

}  // namespace testutil
