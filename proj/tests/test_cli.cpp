#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "blockcons/cli.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = blockcons::run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("blockcons_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    return json::parse(in);
}

}  // namespace

TEST_CASE("usage errors exit 2") {
    CHECK(cli({}).code == 2);
    CHECK(cli({"frobnicate"}).code == 2);
    CHECK(cli({"sample", "--no-such-flag", "1"}).code == 2);

    auto dir = scratch("usage");
    // missing p_out
    CHECK(cli({"sample", "--sizes", "[10,10]", "--p-in", "0.5", "--out", dir.string()}).code == 2);
    {
        std::ofstream cfg(dir / "bad.cfg");
        cfg << R"({"sizes": [10, 10], "p_in": 0.5, "p_out": 0.1, "colour": "blue"})";
    }
    auto r = cli({"sample", "--config", (dir / "bad.cfg").string(), "--out", dir.string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("colour") != std::string::npos);
    CHECK(cli({"sweep", "--sizes", "[10]", "--p-in", "0.5", "--p-out-list", "[0.1]", "--mode", "fast", "--out",
               dir.string()})
              .code == 2);
}

TEST_CASE("help and version exit 0") {
    CHECK(cli({"--help"}).code == 0);
    auto v = cli({"--version"});
    CHECK(v.code == 0);
    CHECK(v.out.find("0.1.0") != std::string::npos);
}

TEST_CASE("runtime failures exit 1") {
    auto dir = scratch("runtime");
    // p_out above p_in is rejected by the model
    CHECK(cli({"sample", "--sizes", "[10,10]", "--p-in", "0.1", "--p-out", "1.5", "--out", dir.string()}).code == 1);
    CHECK(cli({"fit", "--rows", (dir / "missing.csv").string(), "--out", dir.string()}).code == 1);
}

TEST_CASE("sample then spectrum from the edge list") {
    auto dir = scratch("sample");
    auto r = cli({"sample", "--sizes", "[30,20]", "--p-in", "0.5", "--p-out", "0.1", "--seed", "4", "--out",
                  dir.string()});
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "network.edges"));
    CHECK(read_json(dir / "network.json").contains("edges"));
    auto s = cli({"spectrum", "--edges", (dir / "network.edges").string(), "--out", dir.string()});
    REQUIRE(s.code == 0);
    auto sp = read_json(dir / "spectrum.json");
    CHECK(sp["n"] == 50);
    CHECK(sp["lambda2"].get<double>() > 0.0);
}

TEST_CASE("predict with the four-community config") {
    auto dir = scratch("predict");
    auto r = cli({"predict", "--config", std::string(CONFIG_DIR) + "/fig2.cfg", "--compare-empirical", "false",
                  "--grid-points", "50", "--out", dir.string()});
    REQUIRE(r.code == 0);
    auto j = read_json(dir / "prediction.json");
    CHECK(j.contains("isolated"));
    CHECK(j["isolated"].size() == 4);
    CHECK(fs::exists(dir / "prediction.csv"));
    CHECK_FALSE(fs::exists(dir / "spectrum.csv"));
}

TEST_CASE("consensus and gadget commands") {
    auto dir = scratch("single");
    auto c = cli({"consensus", "--sizes", "[40,30]", "--p-in", "0.3", "--p-out", "0.05", "--trace", "true", "--out",
                  dir.string()});
    REQUIRE(c.code == 0);
    auto j = read_json(dir / "consensus.json");
    CHECK(j["censored"] == false);
    CHECK(fs::exists(dir / "consensus_trace.csv"));

    auto g = cli({"gadget", "--sizes", "[10,10]", "--p-in", "0.9", "--p-out", "0.2", "--blob-examples", "800",
                  "--blob-dim", "4", "--out", dir.string()});
    REQUIRE(g.code == 0);
    auto gj = read_json(dir / "gadget.json");
    CHECK(gj["final_accuracy"].get<double>() > 0.9);
    CHECK(fs::exists(dir / "gadget_trace.csv"));
}

TEST_CASE("sweep then fit") {
    auto dir = scratch("sweep");
    auto s = cli({"sweep", "--sizes", "[70,30]", "--p-in", "0.2", "--p-out-min", "0.005", "--p-out-max", "0.1",
                  "--p-out-count", "5", "--seeds-per-point", "2", "--out", dir.string()});
    REQUIRE(s.code == 0);
    auto summary = json::parse(s.out);
    CHECK(summary["rows"] == 5);
    CHECK(summary["spearman_delta_tau"].get<double>() > 0.8);
    CHECK(read_json(dir / "rows.json").contains("config"));

    auto f = cli({"fit", "--rows", (dir / "rows.csv").string(), "--fix-pole", "0.2", "--out", dir.string()});
    REQUIRE(f.code == 0);
    auto fit = read_json(dir / "fit.json");
    CHECK(fit["form"] == "a/(c-delta)");
    CHECK(fit["c"] == 0.2);
    CHECK(fit["points"] == 5);
    // pole inside the data range
    CHECK(cli({"fit", "--rows", (dir / "rows.csv").string(), "--fix-pole", "0.1", "--out", dir.string()}).code == 1);
}

TEST_CASE("bifurcation command") {
    auto dir = scratch("bif");
    auto r = cli({"bifurcation", "--sizes", "[700,300]", "--p-in", "0.1", "--p-out-list", "[0.1]", "--out",
                  dir.string()});
    REQUIRE(r.code == 0);
    auto j = read_json(dir / "bifurcation.json");
    CHECK(j["in_range"] == false);
    CHECK(j["delta1_star"].is_null());
}
