#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include "doctest.h"

#include "blockcons/bench.hpp"
#include "blockcons/error.hpp"
#include "blockcons/random.hpp"

using namespace blockcons;
using namespace blockcons::bench;

TEST_CASE("log_space") {
    auto v = log_space(1e-3, 1e-1, 3);
    REQUIRE(v.size() == 3);
    CHECK(v[0] == doctest::Approx(1e-3));
    CHECK(v[1] == doctest::Approx(1e-2));
    CHECK(v[2] == doctest::Approx(1e-1));
    CHECK(log_space(0.5, 0.9, 1) == std::vector<double>{0.5});
    CHECK_THROWS_AS(log_space(0.0, 1.0, 3), InvalidArgument);
}

TEST_CASE("reciprocal fit recovers exact data") {
    std::vector<double> x, y;
    for (int i = 0; i < 12; ++i) {
        x.push_back(0.005 * i);
        y.push_back(5.0 / (0.1 - x.back()));
    }
    auto fixed = fit_reciprocal(x, y, 0.1);
    CHECK(fixed.a == doctest::Approx(5.0).epsilon(1e-6));
    CHECK(fixed.c == 0.1);
    CHECK(fixed.r2 > 1 - 1e-9);
    CHECK(fixed.points == 12);

    auto free = fit_reciprocal(x, y);
    CHECK(std::abs(free.a - 5.0) < 1e-6 * 5.0 * 10);
    CHECK(free.c == doctest::Approx(0.1).epsilon(1e-6));
    CHECK(free.r2 > 1 - 1e-9);
}

TEST_CASE("reciprocal fit with 1% noise") {
    Rng rng(4);
    std::vector<double> x, y;
    for (int i = 0; i < 20; ++i) {
        x.push_back(0.004 * i);
        const double noise = 1.0 + 0.01 * (2.0 * uniform01(rng) - 1.0);
        y.push_back(5.0 / (0.1 - x.back()) * noise);
    }
    auto fit = fit_reciprocal(x, y);
    CHECK(fit.c == doctest::Approx(0.1).epsilon(0.05));
    CHECK(fit.r2 > 0.99);
}

TEST_CASE("reciprocal fit rejects bad input") {
    std::vector<double> two = {0.0, 0.01}, y2 = {1.0, 2.0};
    CHECK_THROWS_AS(fit_reciprocal(two, y2), InvalidArgument);
    std::vector<double> x = {0.0, 0.01, 0.02}, y = {1, 2, 3};
    CHECK_THROWS_AS(fit_reciprocal(x, y, 0.015), InvalidArgument);
    CHECK_THROWS_AS(fit_reciprocal(x, y, 0.02), InvalidArgument);
}

TEST_CASE("row fits skip censored and failed rows") {
    std::vector<SweepRow> rows;
    for (int i = 0; i < 6; ++i) {
        SweepRow r;
        r.delta = 0.01 * i;
        r.tau_median = 2.0 / (0.1 - r.delta);
        r.lambda2_pred = 0.1 - r.delta;
        rows.push_back(r);
    }
    rows[2].censored = 1;
    rows[2].tau_median = 1e9;
    rows[4].error = "boom";
    auto fit = fit_reciprocal(rows, 0.1);
    CHECK(fit.points == 4);
    CHECK(fit.a == doctest::Approx(2.0));
    auto inv = fit_inverse_lambda2(rows);
    CHECK(inv.points == 4);
    CHECK(inv.a == doctest::Approx(2.0));
    CHECK(inv.c == 0.0);
    const auto js = fit_json(fit, 0.1);
    CHECK(js.find("\"pole_fixed\": true") != std::string::npos);
}

TEST_CASE("rows CSV round trip") {
    SweepRow r;
    r.delta = 0.0875;
    r.p_out = 0.0125;
    r.tau_median = 123.5;
    r.tau_iqr = 4.25;
    r.lambda2_emp = 0.0123456789012345;
    r.lambda2_pred = 0.0119;
    r.lambdaL = 0.81;
    r.censored = 2;
    std::vector<SweepRow> rows = {r, r};
    rows[1].delta = 0.05;
    std::stringstream ss;
    write_rows_csv(rows, ss);
    std::string header;
    std::getline(std::stringstream(ss.str()), header);
    CHECK(header == "delta,p_out,tau_median,tau_iqr,lambda2_emp,lambda2_pred,lambdaL,censored");
    auto back = read_rows_csv(ss);
    REQUIRE(back.size() == 2);
    CHECK(back[0].lambda2_emp == r.lambda2_emp);
    CHECK(back[0].censored == 2);
    CHECK(back[1].delta == 0.05);

    std::stringstream bad("delta,p_out,tau_median,tau_iqr,lambda2_emp,lambda2_pred,lambdaL,censored\n1,2,3\n");
    CHECK_THROWS_AS(read_rows_csv(bad), ParseError);
}

namespace {

SweepConfig small_scalar() {
    SweepConfig cfg;
    cfg.sizes = {70, 30};
    cfg.p_in = 0.2;
    cfg.p_out_list = {0.01, 0.05, 0.1, 0.2};
    cfg.seeds_per_point = 3;
    cfg.seed = 11;
    return cfg;
}

}  // namespace

TEST_CASE("scalar sweep produces sane rows") {
    auto cfg = small_scalar();
    cfg.threads = 1;
    auto rows = sweep(cfg);
    REQUIRE(rows.size() == 4);
    for (const auto& r : rows) {
        CHECK(r.error.empty());
        CHECK(r.runs == 3);
        CHECK(r.censored == 0);
        CHECK(r.delta == doctest::Approx(cfg.p_in - r.p_out));
        CHECK(r.lambda2_emp > 0.0);
        CHECK(r.tau_median > 0.0);
        CHECK(r.seeds.size() == 3);
    }
    // more mixing between blocks, faster consensus
    CHECK(rows.front().tau_median > rows.back().tau_median);
}

TEST_CASE("sweep output is reproducible and in order regardless of threads") {
    auto cfg = small_scalar();
    cfg.threads = 1;
    std::stringstream a, b;
    write_rows_csv(sweep(cfg), a);
    cfg.threads = 4;
    std::vector<double> seen;
    auto rows = sweep(cfg, [&](const SweepRow& r) { seen.push_back(r.p_out); });
    write_rows_csv(rows, b);
    CHECK(a.str() == b.str());
    CHECK(seen == cfg.p_out_list);
}

TEST_CASE("sweep validation") {
    auto cfg = small_scalar();
    cfg.p_out_list = {0.3};
    CHECK_THROWS_AS(sweep(cfg), InvalidArgument);
    cfg = small_scalar();
    cfg.sizes.clear();
    CHECK_THROWS_AS(sweep(cfg), InvalidArgument);
}

TEST_CASE("gadget sweep smoke") {
    SweepConfig cfg;
    cfg.mode = SweepMode::Gadget;
    cfg.sizes = {10, 20};
    cfg.p_in = 0.9;
    cfg.p_out_list = {0.1, 0.5};
    cfg.seeds_per_point = 2;
    cfg.dataset.blob_examples = 1500;
    cfg.dataset.blob_dim = 5;
    auto rows = sweep(cfg);
    REQUIRE(rows.size() == 2);
    for (const auto& r : rows) {
        CHECK(r.error.empty());
        CHECK(r.runs == 2);
        CHECK(r.accuracy_median >= 0.9);
    }
    const auto side = sweep_sidecar_json(cfg, rows);
    CHECK(side.find("\"generated_at\"") != std::string::npos);
    CHECK(side.find("\"seeds\"") != std::string::npos);
}

TEST_CASE("bifurcation detection") {
    const std::vector<int> sizes = {700, 300};
    auto none = detect_bifurcation(sizes, 0.1, {0.0});
    CHECK_FALSE(none.in_range);
    CHECK(std::isnan(none.delta1_star));
    CHECK(none.status == "all_merged");

    std::vector<double> grid;
    for (int i = 0; i < 20; ++i) grid.push_back(0.099 * i / 19.0);
    auto b = detect_bifurcation(sizes, 0.1, grid);
    REQUIRE(b.in_range);
    CHECK(b.status == "ok");
    CHECK(b.delta1_star > 0.0);
    CHECK(b.delta1_star < 0.099);
    // flat below, moving above
    std::vector<double> below, above;
    for (std::size_t i = 0; i < b.deltas.size(); ++i) {
        (b.deltas[i] < b.delta1_star ? below : above).push_back(b.lambda2_pred[i]);
    }
    REQUIRE(below.size() >= 2);
    REQUIRE(above.size() >= 2);
    const auto [blo, bhi] = std::minmax_element(below.begin(), below.end());
    const auto [alo, ahi] = std::minmax_element(above.begin(), above.end());
    CHECK(*bhi - *blo < 0.02 * *bhi);
    CHECK(*ahi - *alo > 0.2 * *ahi);
    for (std::size_t i = 0; i < b.deltas.size(); ++i)
        if (b.merged[i]) CHECK(b.lambda2_pred[i] == b.lambdaL[i]);

    std::vector<double> dense_grid;
    for (int i = 0; i < 20; ++i) dense_grid.push_back(0.899 * i / 19.0);
    auto dense = detect_bifurcation(sizes, 0.9, dense_grid);
    REQUIRE(dense.in_range);
    CHECK(dense.delta1_star > b.delta1_star);

    CHECK_THROWS_AS(detect_bifurcation(sizes, 0.1, {0.1}), InvalidArgument);
    CHECK(bifurcation_json(none).find("\"delta1_star\": null") != std::string::npos);
}

TEST_CASE("dense sweep: empirical lambda2 follows the prediction away from the transition") {
    SweepConfig cfg;
    cfg.sizes = {700, 300};
    cfg.p_in = 0.9;
    cfg.p_out_list = log_space(0.01, 0.9, 6);
    cfg.seeds_per_point = 1;
    cfg.seed = 2;
    auto rows = sweep(cfg);

    std::vector<double> deltas;
    for (const auto& r : rows) deltas.push_back(r.delta);
    auto b = detect_bifurcation(cfg.sizes, cfg.p_in, deltas);
    // two grid steps either side of the transition are excluded
    const double guard = b.in_range ? b.delta1_star : -1.0;
    int checked = 0;
    double rel_sum = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        REQUIRE(r.error.empty());
        bool near = false;
        if (b.in_range) {
            auto pos = std::lower_bound(b.deltas.begin(), b.deltas.end(), guard) - b.deltas.begin();
            auto me = std::lower_bound(b.deltas.begin(), b.deltas.end(), r.delta) - b.deltas.begin();
            near = std::abs(static_cast<long>(me - pos)) < 2;
        }
        if (near || r.lambda2_pred <= 0.0) continue;
        rel_sum += std::abs(r.lambda2_emp - r.lambda2_pred) / r.lambda2_pred;
        ++checked;
    }
    REQUIRE(checked >= 3);
    CHECK(rel_sum / checked <= 0.1);
}
