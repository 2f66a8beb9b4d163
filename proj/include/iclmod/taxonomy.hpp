#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace iclmod {

enum class Source { twitter, search_engine };

std::string_view source_name(Source s);
std::optional<Source> parse_source(std::string_view s);

// The unified taxonomy: 12 illicit categories plus benign. The set is closed.
enum class Category {
    porn,
    surrogacy,
    gambling,
    drug,
    weapon,
    data_theft,
    money_laundry,
    advertisement,
    counterfeit,
    hacking,
    fraud,
    others,
    benign,
};

inline constexpr int kNumCategories = 13;
inline constexpr int kNumIllicitCategories = 12;

std::string_view category_name(Category c);
std::optional<Category> parse_category(std::string_view name);

// All 13 categories in declaration order (benign last).
const std::array<Category, kNumCategories>& all_categories();

// The 12 illicit categories.
const std::array<Category, kNumIllicitCategories>& illicit_categories();

// Maps a source-specific raw label to its unified category. Total over the
// raw labels of the unification table; anything else throws Error, or maps
// to `others` when route_unmapped_to_others is set.
Category unify_category(std::string_view raw_label, Source source,
                        bool route_unmapped_to_others = false);

// The full unification table as (raw label, source, unified) rows, in table
// order. Exposed so tests and docs can enumerate it.
struct UnificationRow {
    std::string_view raw;
    Source source;
    Category unified;
};
const std::vector<UnificationRow>& unification_table();

}  // namespace iclmod
