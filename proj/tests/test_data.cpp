#include <cmath>
#include <filesystem>
#include <numbers>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"

#include "blockcons/data.hpp"
#include "blockcons/error.hpp"
#include "json.hpp"

using namespace blockcons;
using namespace blockcons::data;

namespace {

LabeledDataset parse(const std::string& text, const LoadOptions& opts = {}) {
    std::istringstream in(text);
    return parse_sparse_text(in, opts);
}

}  // namespace

TEST_CASE("one line, two nonzeros") {
    auto ds = parse("+1 3:0.5 7:1.0\n");
    REQUIRE(ds.size() == 1);
    CHECK(ds.examples[0].label == 1);
    CHECK(ds.examples[0].x.nnz() == 2);
    CHECK(ds.examples[0].x.index == std::vector<std::uint32_t>{2, 6});
    CHECK(ds.d == 7);
}

TEST_CASE("empty input") {
    auto ds = parse("");
    CHECK(ds.size() == 0);
    CHECK(ds.d == 0);
}

TEST_CASE("hand-written fixture reads back exactly") {
    auto ds = load_sparse_text(std::filesystem::path(FIXTURE_DIR) / "small.svm");
    REQUIRE(ds.size() == 10);
    CHECK(ds.d == 8);
    const std::vector<int> labels = {1, -1, 1, -1, 1, -1, 1, -1, 1, -1};
    for (std::size_t i = 0; i < 10; ++i) CHECK(ds.examples[i].label == labels[i]);

    using Row = std::vector<std::pair<std::uint32_t, double>>;
    const std::vector<Row> want = {
        {{0, 0.5}, {2, -1.25}, {6, 2.0}},
        {{1, 1.0}, {3, 0.125}},
        {{0, 3.5}},
        {{4, -0.75}, {5, 0.25}, {7, 1e-3}},
        {{2, 4.0}},
        {{1, -2.0}, {6, 0.5}},
        {{0, 1.0}, {1, 1.0}, {2, 1.0}, {3, 1.0}},
        {{7, -8.0}},
        {{5, 0.0625}, {6, -0.5}},
        {},
    };
    for (std::size_t i = 0; i < 10; ++i) {
        CAPTURE(i);
        const auto& x = ds.examples[i].x;
        REQUIRE(x.nnz() == want[i].size());
        for (std::size_t k = 0; k < x.nnz(); ++k) {
            CHECK(x.index[k] == want[i][k].first);
            CHECK(x.value[k] == want[i][k].second);
        }
    }
}

TEST_CASE("label handling") {
    auto zo = parse("0 1:1\n1 1:2\n");
    CHECK(zo.examples[0].label == -1);
    CHECK(zo.examples[1].label == 1);
    CHECK_THROWS_AS(parse("3 1:1\n8 1:2\n"), InvalidArgument);
    LoadOptions ovr;
    ovr.target_class = 8;
    auto mc = parse("3 1:1\n8 1:2\n0 1:3\n", ovr);
    CHECK(mc.examples[0].label == -1);
    CHECK(mc.examples[1].label == 1);
    CHECK(mc.examples[2].label == -1);
}

TEST_CASE("index base detection") {
    auto zero = parse("+1 0:1 2:1\n");
    CHECK(zero.examples[0].x.index == std::vector<std::uint32_t>{0, 2});
    CHECK(zero.d == 3);
    LoadOptions one;
    one.index_base = IndexBase::One;
    CHECK_THROWS_AS(parse("+1 0:1\n", one), ParseError);
    LoadOptions dim;
    dim.dimension = 4;
    CHECK(parse("+1 4:1\n", dim).d == 4);
    CHECK_THROWS_AS(parse("+1 5:1\n", dim), ParseError);
}

TEST_CASE("malformed lines report their line number") {
    auto line_of = [](const std::string& text) -> std::size_t {
        try {
            parse(text);
        } catch (const ParseError& e) {
            return e.line();
        }
        return 0;
    };
    CHECK(line_of("+1 1:1\n+1 2:x\n") == 2);
    CHECK(line_of("+1 1:1\n\n# c\n-1 3\n") == 4);
    CHECK(line_of("abc 1:1\n") == 1);
    CHECK(line_of("+1 3:1 2:1\n") == 1);  // indices must increase
    CHECK(line_of("+1 1:nan\n") == 1);
    CHECK(line_of("+1 1:inf\n") == 1);
    CHECK(line_of("+1 -1:1\n") == 1);
}

TEST_CASE("write then load reproduces values exactly") {
    auto ds = make_blobs(50, 7, 0.3, 12);
    ds.examples[3].x.value[2] = 1.0 / 3.0;
    std::stringstream ss;
    write_sparse_text(ds, ss);
    LoadOptions opts;
    opts.index_base = IndexBase::One;
    auto back = parse_sparse_text(ss, opts);
    REQUIRE(back.size() == ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(back.examples[i].label == ds.examples[i].label);
        CHECK(back.examples[i].x.index == ds.examples[i].x.index);
        CHECK(back.examples[i].x.value == ds.examples[i].x.value);
    }
}

TEST_CASE("save writes a metadata sidecar") {
    const auto dir = std::filesystem::temp_directory_path() / "blockcons_data_test";
    std::filesystem::create_directories(dir);
    auto ds = make_blobs(10, 3, 0.5, 1);
    save_sparse_text(ds, dir / "blobs.svm");
    std::ifstream side(dir / "blobs.svm.json");
    auto meta = nlohmann::json::parse(side);
    CHECK(meta["examples"] == 10);
    CHECK(meta["d"] == 3);
    CHECK(meta["positives"] == 5);
    CHECK(load_sparse_text(dir / "blobs.svm").size() == 10);
    std::filesystem::remove_all(dir);
}

TEST_CASE("partition sizes") {
    auto p = partition_equal(100, 100, 1);
    for (const auto& s : p.shards) CHECK(s.size() == 1);
    CHECK_FALSE(p.has_empty_shard);

    auto q = partition_equal(101, 100, 1);
    int twos = 0;
    for (const auto& s : q.shards) twos += s.size() == 2;
    CHECK(twos == 1);

    CHECK(partition_equal(5, 10, 1).has_empty_shard);
    CHECK_THROWS_AS(partition_equal(5, 0, 1), InvalidArgument);
}

TEST_CASE("partition is a disjoint cover for many inputs") {
    for (std::size_t n : {0, 1, 17, 256, 1000})
        for (int nodes : {1, 3, 50})
            for (std::uint64_t seed : {1, 2}) {
                auto p = partition_equal(n, nodes, seed);
                std::vector<int> seen(n, 0);
                std::size_t smallest = n, largest = 0;
                for (const auto& s : p.shards) {
                    smallest = std::min(smallest, s.size());
                    largest = std::max(largest, s.size());
                    for (auto i : s) seen[i]++;
                }
                for (int c : seen) CHECK(c == 1);
                CHECK(largest - smallest <= 1);
                CHECK(partition_equal(n, nodes, seed).shards == p.shards);
            }
}

TEST_CASE("shards keep both classes") {
    auto ds = make_blobs(10000, 5, 0.5, 3);
    auto p = partition_equal(ds, 100, 77);
    for (const auto& s : p.shards) {
        int pos = 0;
        for (auto i : s) pos += ds.examples[i].label > 0;
        const double frac = static_cast<double>(pos) / s.size();
        CHECK(frac >= 0.3);
        CHECK(frac <= 0.7);
    }
}

TEST_CASE("blobs are separable through the origin") {
    auto ds = make_blobs(40, 2, 0.5, 5);
    // Exhaustive scan over directions in the plane.
    bool found = false;
    const int steps = 100000;
    for (int k = 0; k < steps && !found; ++k) {
        const double th = 2 * std::numbers::pi * k / steps;
        const double w[2] = {std::cos(th), std::sin(th)};
        bool ok = true;
        for (const auto& ex : ds.examples)
            if (ex.label * ex.x.dot(w) <= 0) {
                ok = false;
                break;
            }
        found = ok;
    }
    CHECK(found);
}

TEST_CASE("blobs are deterministic and respect the margin") {
    auto a = make_blobs(200, 10, 0.4, 9), b = make_blobs(200, 10, 0.4, 9);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.examples[i].x.value == b.examples[i].x.value);
    CHECK(make_blobs(200, 10, 0.4, 10).examples[0].x.value != a.examples[0].x.value);
    CHECK_THROWS_AS(make_blobs(10, 2, 0.0, 1), InvalidArgument);
}

TEST_CASE("split and accuracy") {
    auto ds = make_blobs(100, 3, 0.5, 2);
    auto [train, test] = train_test_split(ds, 0.2, 4);
    CHECK(train.size() == 80);
    CHECK(test.size() == 20);
    std::vector<double> zero(3, 0.0);
    int pos = 0;
    for (const auto& ex : test.examples) pos += ex.label > 0;
    CHECK(accuracy(test, zero) == doctest::Approx(pos / 20.0));
}
