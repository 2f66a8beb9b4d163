#include <map>
#include <set>

#include "doctest.h"
#include "iclmod/common.hpp"
#include "test_util.hpp"

using namespace iclmod;

TEST_CASE("sha256 matches the published test vector") {
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(content_id("abc") == sha256_hex("abc").substr(0, 32));
}

TEST_CASE("rng is deterministic and below() stays in range") {
    Rng a(42), b(42), c(43);
    std::vector<std::uint64_t> va, vb, vc;
    for (int i = 0; i < 50; ++i) {
        va.push_back(a.below(1000));
        vb.push_back(b.below(1000));
        vc.push_back(c.below(1000));
    }
    CHECK(va == vb);
    CHECK(va != vc);
    for (auto v : va) CHECK(v < 1000);
}

TEST_CASE("sample_indices draws distinct indices and covers the exhaustive case") {
    Rng rng(7);
    auto picks = rng.sample_indices(10, 10);
    std::set<std::size_t> seen(picks.begin(), picks.end());
    CHECK(seen.size() == 10);
    bool identity = true;
    for (std::size_t i = 0; i < picks.size(); ++i) identity = identity && picks[i] == i;
    CHECK_FALSE(identity);  // exhaustive sample comes back shuffled
    CHECK_THROWS_AS(rng.sample_indices(3, 4), Error);
}

TEST_CASE("shuffle visits all permutations of three items roughly uniformly") {
    std::map<std::vector<int>, int> counts;
    for (std::uint64_t seed = 0; seed < 3000; ++seed) {
        std::vector<int> v = {0, 1, 2};
        Rng rng(seed);
        rng.shuffle(v);
        ++counts[v];
    }
    CHECK(counts.size() == 6);
    for (const auto& [perm, count] : counts) {
        CHECK(count > 3000 / 6 - 150);
        CHECK(count < 3000 / 6 + 150);
    }
}

TEST_CASE("derive_seed separates streams and indices") {
    CHECK(derive_seed(1, 1, 0) != derive_seed(1, 2, 0));
    CHECK(derive_seed(1, 1, 0) != derive_seed(1, 1, 1));
    CHECK(derive_seed(1, 1, 5) == derive_seed(1, 1, 5));
}

TEST_CASE("string helpers") {
    CHECK(trim("  a b \n") == "a b");
    CHECK(to_lower("AbC") == "abc");
    CHECK(starts_with("report_x.json", "report_"));
    CHECK_FALSE(starts_with("rep", "report_"));
}

TEST_CASE("file IO round trip and line iteration") {
    auto dir = testutil::fresh_temp_dir("common");
    auto path = dir / "x.txt";
    write_file_atomic(path, "line one\nline two\nlast");
    CHECK(read_file(path) == "line one\nline two\nlast");
    std::vector<std::pair<std::size_t, std::string>> lines;
    for_each_line(path, [&](std::size_t no, std::string_view line) {
        lines.emplace_back(no, std::string(line));
    });
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == std::pair<std::size_t, std::string>{1, "line one"});
    CHECK(lines[2].second == "last");
    CHECK_THROWS_AS(read_file(dir / "missing.txt"), Error);
}

TEST_CASE("parallel_for writes by index and propagates exceptions") {
    std::vector<int> out(100, 0);
    parallel_for(100, 4, [&](std::size_t i) { out[i] = static_cast<int>(i * 2); });
    for (int i = 0; i < 100; ++i) CHECK(out[static_cast<std::size_t>(i)] == i * 2);
    CHECK_THROWS_AS(parallel_for(10, 4,
                                 [&](std::size_t i) {
                                     if (i == 5) throw Error("boom");
                                 }),
                    Error);
}
