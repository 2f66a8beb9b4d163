#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "iclmod/common.hpp"
#include "iclmod/retrieval.hpp"
#include "iclmod/tokenize.hpp"
#include "test_util.hpp"

using namespace iclmod;

namespace {

DemonstrationPool pool_of_texts(const std::vector<std::string>& texts) {
    std::vector<Sample> entries;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        entries.push_back(testutil::make_sample("doc-" + std::to_string(i), texts[i],
                                                Source::twitter,
                                                i % 2 ? Category::drug : Category::benign));
    }
    return DemonstrationPool::build(std::move(entries), Task::binary);
}

// Brute-force Okapi BM25, written straight from the formula and independent
// of the inverted index: per document, walk the distinct query terms.
std::vector<double> bm25_oracle(const std::string& query, const std::vector<std::string>& docs,
                                double k1 = 1.2, double b = 0.75) {
    std::vector<std::vector<std::string>> doc_tokens;
    double total_len = 0;
    for (const auto& d : docs) {
        doc_tokens.push_back(tokenize(d));
        total_len += static_cast<double>(doc_tokens.back().size());
    }
    double avg_len = docs.empty() ? 0.0 : total_len / static_cast<double>(docs.size());
    auto q = tokenize(query);
    std::set<std::string> terms(q.begin(), q.end());
    std::vector<double> scores(docs.size(), 0.0);
    for (const auto& term : terms) {
        std::size_t df = 0;
        for (const auto& toks : doc_tokens) {
            if (std::count(toks.begin(), toks.end(), term) > 0) ++df;
        }
        if (df == 0) continue;
        double n = static_cast<double>(docs.size());
        double idf = std::log(1.0 + (n - static_cast<double>(df) + 0.5) /
                                        (static_cast<double>(df) + 0.5));
        for (std::size_t d = 0; d < docs.size(); ++d) {
            double tf = static_cast<double>(
                std::count(doc_tokens[d].begin(), doc_tokens[d].end(), term));
            if (tf == 0) continue;
            double denom =
                tf + k1 * (1.0 - b + b * static_cast<double>(doc_tokens[d].size()) / avg_len);
            scores[d] += idf * tf * (k1 + 1.0) / denom;
        }
    }
    return scores;
}

std::vector<std::size_t> rank_desc_tie_asc(const std::vector<double>& scores, std::size_t k) {
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    order.resize(std::min(k, order.size()));
    return order;
}

// Deterministic word-salad generator for the randomized oracle corpora.
std::string random_doc(Rng& rng) {
    static const std::vector<std::string> vocab = {
        "buy", "cheap", "watch", "pill", "bet", "casino", "account", "hack",
        "fake", "paper", "ship", "fast", "contact", "telegram", "币", "代",
        "开", "发", "票", "信", "号", "商",
    };
    std::size_t len = 1 + rng.below(12);
    std::string out;
    for (std::size_t i = 0; i < len; ++i) {
        if (i) out += " ";
        out += vocab[rng.below(vocab.size())];
    }
    return out;
}

}  // namespace

TEST_CASE("select_random: exhaustive draw returns everything in seeded shuffled order") {
    auto pool = pool_of_texts({"a one", "b two", "c three", "d four", "e five", "f six",
                               "g seven", "h eight", "i nine", "j ten"});
    auto sel = select_random(pool, Task::binary, 10, 99);
    CHECK(sel.indices.size() == 10);
    std::set<std::size_t> unique(sel.indices.begin(), sel.indices.end());
    CHECK(unique.size() == 10);
    auto again = select_random(pool, Task::binary, 10, 99);
    CHECK(sel.indices == again.indices);
    auto other = select_random(pool, Task::binary, 10, 100);
    CHECK(sel.indices != other.indices);
}

TEST_CASE("select_random: k beyond the pool errors") {
    auto pool = pool_of_texts({"only", "two"});
    CHECK_THROWS_AS(select_random(pool, Task::binary, 3, 1), Error);
}

TEST_CASE("select_random: an unsatisfiable quota names the label") {
    std::vector<Sample> entries;
    for (int i = 0; i < 40; ++i) {
        entries.push_back(testutil::make_sample(
            "s" + std::to_string(i), "text " + std::to_string(i), Source::twitter,
            i < 25 ? Category::benign : Category::drug));
    }
    auto pool = DemonstrationPool::build(entries, Task::binary);
    std::map<std::string, std::size_t> quota = {{"benign", 20}, {"illicit", 20}};
    CHECK_THROWS_WITH_AS(select_random(pool, Task::binary, 40, 1, &quota),
                         doctest::Contains("illicit"), Error);  // only 15 illicit available
}

TEST_CASE("select_random: balanced quota draw") {
    std::vector<Sample> entries;
    for (int i = 0; i < 80; ++i) {
        entries.push_back(testutil::make_sample(
            "s" + std::to_string(i), "text " + std::to_string(i), Source::twitter,
            i % 2 ? Category::benign : Category::gambling));
    }
    auto pool = DemonstrationPool::build(entries, Task::binary);
    std::map<std::string, std::size_t> quota = {{"benign", 32}, {"illicit", 32}};
    auto sel = select_random(pool, Task::binary, 64, 5, &quota);
    CHECK(sel.indices.size() == 64);
    std::size_t benign = 0;
    for (auto ix : sel.indices) {
        benign += pool.entries[ix].binary_label == BinaryLabel::benign;
    }
    CHECK(benign == 32);
    std::map<std::string, std::size_t> bad = {{"benign", 30}, {"illicit", 32}};
    CHECK_THROWS_AS(select_random(pool, Task::binary, 64, 5, &bad), Error);
}

TEST_CASE("bm25: hand-checkable three-document corpus matches the oracle") {
    std::vector<std::string> docs = {"cheap watch offer", "watch the game tonight",
                                     "fresh farm produce"};
    auto pool = pool_of_texts(docs);
    auto sel = score_bm25("watch", pool, 3);
    auto expected = bm25_oracle("watch", docs);
    REQUIRE(sel.indices.size() == 3);
    for (std::size_t r = 0; r < sel.indices.size(); ++r) {
        CHECK(sel.scores[r] == doctest::Approx(expected[sel.indices[r]]).epsilon(1e-12));
    }
    // doc 0 is shorter than doc 1, so it ranks first on the shared term.
    CHECK(sel.indices[0] == 0);
    CHECK(sel.indices[1] == 1);
    CHECK(sel.scores[2] == 0.0);
}

TEST_CASE("bm25: no shared token yields zero scores in index order, flagged") {
    auto pool = pool_of_texts({"alpha beta", "gamma delta", "epsilon zeta"});
    auto sel = score_bm25("omega", pool, 2);
    CHECK(sel.zero_score_fallback);
    CHECK(sel.indices == std::vector<std::size_t>{0, 1});
    CHECK(sel.scores == std::vector<double>{0.0, 0.0});
    auto empty = score_bm25("!!!", pool, 2);
    CHECK(empty.zero_score_fallback);
}

TEST_CASE("bm25: a query identical to one document ranks that document first") {
    std::vector<std::string> docs = {"buy cheap pills online now", "weather is nice today",
                                     "cheap flights and hotels"};
    auto pool = pool_of_texts(docs);
    auto sel = score_bm25(docs[0], pool, 3);
    CHECK(sel.indices[0] == 0);
    auto expected = bm25_oracle(docs[0], docs);
    CHECK(sel.scores[0] == doctest::Approx(expected[0]).epsilon(1e-12));
}

TEST_CASE("bm25: 100 randomized corpora match the brute-force oracle to 1e-9") {
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
        Rng rng(derive_seed(2024, 1, trial));
        std::size_t n_docs = 2 + rng.below(15);
        std::vector<std::string> docs;
        for (std::size_t d = 0; d < n_docs; ++d) docs.push_back(random_doc(rng));
        std::string query = random_doc(rng);
        std::size_t k = 1 + rng.below(n_docs);

        auto pool = pool_of_texts(docs);
        auto sel = score_bm25(query, pool, k);
        auto oracle_scores = bm25_oracle(query, docs);
        auto oracle_rank = rank_desc_tie_asc(oracle_scores, k);
        REQUIRE(sel.indices == oracle_rank);
        for (std::size_t r = 0; r < sel.indices.size(); ++r) {
            CHECK(std::abs(sel.scores[r] - oracle_scores[sel.indices[r]]) < 1e-9);
        }
    }
}

TEST_CASE("bm25 idf stays non-negative even for ubiquitous terms") {
    CHECK(bm25_idf(10, 10) > 0.0);
    CHECK(bm25_idf(2, 2) > 0.0);
    CHECK(bm25_idf(1000, 1) > bm25_idf(1000, 999));
}

TEST_CASE("semantic: self-similarity ranks the matching entry first with score 1") {
    auto pool = pool_of_texts({"a", "b", "c"});
    pool.attach_embeddings({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
    auto sel = select_semantic({0, 1, 0}, pool, 2);
    CHECK(sel.indices[0] == 1);
    CHECK(sel.scores[0] == doctest::Approx(1.0));
}

TEST_CASE("semantic: orthogonal query gives zero scores in index order") {
    auto pool = pool_of_texts({"a", "b"});
    pool.attach_embeddings({{1, 0, 0}, {0, 1, 0}});
    auto sel = select_semantic({0, 0, 1}, pool, 2);
    CHECK(sel.indices == std::vector<std::size_t>{0, 1});
    CHECK(sel.scores[0] == 0.0);
    CHECK(sel.scores[1] == 0.0);
}

TEST_CASE("semantic: 100 randomized pools match the exhaustive scan incl. tie order") {
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
        Rng rng(derive_seed(2024, 2, trial));
        std::size_t n = 2 + rng.below(19);
        std::size_t dim = 2 + rng.below(6);
        std::size_t k = 1 + rng.below(n);
        std::vector<std::string> texts;
        std::vector<std::vector<double>> vectors;
        for (std::size_t i = 0; i < n; ++i) {
            texts.push_back("t" + std::to_string(i));
            std::vector<double> v(dim);
            double norm2 = 0;
            for (auto& x : v) {
                // occasional duplicated vectors to exercise tie-breaks
                x = static_cast<double>(rng.below(5)) - 2.0;
                norm2 += x * x;
            }
            if (norm2 == 0) {
                v[0] = 1;
                norm2 = 1;
            }
            for (auto& x : v) x /= std::sqrt(norm2);
            vectors.push_back(v);
        }
        std::vector<double> query = vectors[rng.below(n)];

        auto pool = pool_of_texts(texts);
        pool.attach_embeddings(vectors);
        auto sel = select_semantic(query, pool, k);

        std::vector<double> scores(n, 0.0);
        for (std::size_t d = 0; d < n; ++d) {
            for (std::size_t j = 0; j < dim; ++j) scores[d] += query[j] * vectors[d][j];
        }
        CHECK(sel.indices == rank_desc_tie_asc(scores, k));
    }
}

TEST_CASE("semantic: guards on missing index and dimension mismatch") {
    auto pool = pool_of_texts({"a", "b"});
    CHECK_THROWS_AS(select_semantic({1, 0}, pool, 1), Error);
    pool.attach_embeddings({{1, 0}, {0, 1}});
    CHECK_THROWS_AS(select_semantic({1, 0, 0}, pool, 1), Error);
    DemonstrationPool other = pool_of_texts({"a", "b"});
    CHECK_THROWS_AS(other.attach_embeddings({{0.5, 0.5}, {0, 1}}), Error);  // not unit norm
    CHECK_THROWS_AS(other.attach_embeddings({{1, 0}}), Error);              // wrong count
}

TEST_CASE("selection results are pool members, distinct by id") {
    auto corpus = testutil::make_binary_corpus(20);
    auto pool = DemonstrationPool::build(corpus, Task::binary);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto sel = select_random(pool, Task::binary, 17, seed);
        std::set<std::string> ids;
        for (auto ix : sel.indices) {
            REQUIRE(ix < pool.size());
            ids.insert(pool.entries[ix].id);
        }
        CHECK(ids.size() == 17);
    }
    auto lx = score_bm25("shady marketplace pitch 3", pool, 9);
    std::set<std::size_t> unique(lx.indices.begin(), lx.indices.end());
    CHECK(unique.size() == 9);
}

TEST_CASE("lexical and semantic selection are reproducible without seeds") {
    auto corpus = testutil::make_binary_corpus(15);
    auto pool = DemonstrationPool::build(corpus, Task::binary);
    auto a = score_bm25("harmless note 3", pool, 5);
    auto b = score_bm25("harmless note 3", pool, 5);
    CHECK(a.indices == b.indices);
    CHECK(a.scores == b.scores);
}

TEST_CASE("pool build validates labels for the task") {
    std::vector<Sample> entries = {testutil::make_sample("x", "text", Source::twitter,
                                                         Category::benign)};
    Sample unlabeled;
    unlabeled.id = "y";
    unlabeled.text = "no label";
    entries.push_back(unlabeled);
    CHECK_THROWS_AS(DemonstrationPool::build(entries, Task::binary), Error);
}
