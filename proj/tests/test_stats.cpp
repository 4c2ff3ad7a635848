#include <cmath>
#include <vector>

#include "doctest.h"

#include "blockcons/stats.hpp"

using namespace blockcons::stats;

TEST_CASE("median, quantiles and IQR") {
    std::vector<double> odd = {5, 1, 3};
    CHECK(median(odd) == 3.0);
    std::vector<double> even = {4, 1, 3, 2};
    CHECK(median(even) == 2.5);
    // type 7 on 1..5: q25 = 2, q75 = 4
    std::vector<double> v = {1, 2, 3, 4, 5};
    CHECK(quantile(v, 0.25) == 2.0);
    CHECK(quantile(v, 0.75) == 4.0);
    CHECK(iqr(v) == 2.0);
    CHECK(quantile(even, 0.1) == doctest::Approx(1.3));
    CHECK(quantile(v, 0.0) == 1.0);
    CHECK(quantile(v, 1.0) == 5.0);
    CHECK_THROWS(quantile(v, 1.5));
    CHECK(std::isnan(median(std::vector<double>{})));
    CHECK(mean(v) == 3.0);
}

TEST_CASE("ranks average over ties") {
    std::vector<double> v = {10, 20, 20, 5};
    auto r = ranks(v);
    CHECK(r == std::vector<double>{2, 3.5, 3.5, 1});
}

TEST_CASE("correlations") {
    std::vector<double> x = {1, 2, 3, 4, 5};
    std::vector<double> y = {2, 4, 6, 8, 10};
    std::vector<double> cube = {1, 8, 27, 64, 125};
    std::vector<double> rev = {5, 4, 3, 2, 1};
    CHECK(pearson(x, y) == doctest::Approx(1.0));
    CHECK(pearson(x, cube) < 1.0);
    CHECK(spearman(x, cube) == doctest::Approx(1.0));
    CHECK(spearman(x, rev) == doctest::Approx(-1.0));
    // textbook case with a tie: rho from Pearson on average ranks
    std::vector<double> a = {1, 2, 3, 4};
    std::vector<double> b = {1, 3, 3, 2};
    // ranks(b) = {1, 3.5, 3.5, 2}
    CHECK(spearman(a, b) == doctest::Approx(pearson(a, std::vector<double>{1, 3.5, 3.5, 2})));
    CHECK(spearman(a, b) == doctest::Approx(0.316227766).epsilon(1e-6));
}
