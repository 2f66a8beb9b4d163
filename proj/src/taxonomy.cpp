#include "iclmod/taxonomy.hpp"

#include "iclmod/common.hpp"

namespace iclmod {

std::string_view source_name(Source s) {
    switch (s) {
        case Source::twitter: return "twitter";
        case Source::search_engine: return "search_engine";
    }
    throw Error("unreachable source");
}

std::optional<Source> parse_source(std::string_view s) {
    if (s == "twitter") return Source::twitter;
    if (s == "search_engine") return Source::search_engine;
    return std::nullopt;
}

std::string_view category_name(Category c) {
    switch (c) {
        case Category::porn: return "porn";
        case Category::surrogacy: return "surrogacy";
        case Category::gambling: return "gambling";
        case Category::drug: return "drug";
        case Category::weapon: return "weapon";
        case Category::data_theft: return "data-theft";
        case Category::money_laundry: return "money-laundry";
        case Category::advertisement: return "advertisement";
        case Category::counterfeit: return "counterfeit";
        case Category::hacking: return "hacking";
        case Category::fraud: return "fraud";
        case Category::others: return "others";
        case Category::benign: return "benign";
    }
    throw Error("unreachable category");
}

std::optional<Category> parse_category(std::string_view name) {
    for (Category c : all_categories()) {
        if (category_name(c) == name) return c;
    }
    return std::nullopt;
}

const std::array<Category, kNumCategories>& all_categories() {
    static const std::array<Category, kNumCategories> cats = {
        Category::porn,          Category::surrogacy,   Category::gambling,
        Category::drug,          Category::weapon,      Category::data_theft,
        Category::money_laundry, Category::advertisement, Category::counterfeit,
        Category::hacking,       Category::fraud,       Category::others,
        Category::benign,
    };
    return cats;
}

const std::array<Category, kNumIllicitCategories>& illicit_categories() {
    static const std::array<Category, kNumIllicitCategories> cats = {
        Category::porn,          Category::surrogacy,   Category::gambling,
        Category::drug,          Category::weapon,      Category::data_theft,
        Category::money_laundry, Category::advertisement, Category::counterfeit,
        Category::hacking,       Category::fraud,       Category::others,
    };
    return cats;
}

const std::vector<UnificationRow>& unification_table() {
    static const std::vector<UnificationRow> rows = {
        {"porn", Source::twitter, Category::porn},
        {"Illegal Sex", Source::search_engine, Category::porn},
        {"surrogacy", Source::twitter, Category::surrogacy},
        {"Illegal Surrogacy", Source::search_engine, Category::surrogacy},
        {"gambling", Source::twitter, Category::gambling},
        {"Gambling", Source::search_engine, Category::gambling},
        {"drug", Source::twitter, Category::drug},
        {"Illegal Drug Sales", Source::search_engine, Category::drug},
        {"weapon", Source::twitter, Category::weapon},
        {"Illegal Weapon Sales", Source::search_engine, Category::weapon},
        {"data_leakage", Source::twitter, Category::data_theft},
        {"Data Theft", Source::search_engine, Category::data_theft},
        {"money-laundry", Source::twitter, Category::money_laundry},
        {"Money Laundering", Source::search_engine, Category::money_laundry},
        {"crowdturfing", Source::twitter, Category::advertisement},
        {"Black Hat SEO & Adv.", Source::search_engine, Category::advertisement},
        {"fake_document", Source::twitter, Category::counterfeit},
        {"Fake Account", Source::search_engine, Category::counterfeit},
        {"Fake Certificate", Source::search_engine, Category::counterfeit},
        {"Counterfeit Goods", Source::search_engine, Category::counterfeit},
        {"Hacking Service", Source::search_engine, Category::hacking},
        {"Financial Fraud", Source::search_engine, Category::fraud},
        {"harassment", Source::twitter, Category::others},
        {"Others", Source::search_engine, Category::others},
    };
    return rows;
}

Category unify_category(std::string_view raw_label, Source source,
                        bool route_unmapped_to_others) {
    for (const auto& row : unification_table()) {
        if (row.source == source && row.raw == raw_label) return row.unified;
    }
    if (route_unmapped_to_others) return Category::others;
    throw Error("unmapped raw label '" + std::string(raw_label) + "' for source " +
                std::string(source_name(source)));
}

}  // namespace iclmod
