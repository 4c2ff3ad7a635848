#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "graphs.hpp"

#include "blockcons/error.hpp"
#include "blockcons/sbm.hpp"
#include "blockcons/spectra.hpp"

using namespace blockcons;
using namespace blockcons::spectra;

TEST_CASE("complete graph spectrum") {
    auto sp = normalized_laplacian_spectrum(testgraphs::complete(4));
    REQUIRE(sp.eigenvalues.size() == 4);
    CHECK(sp.eigenvalues[0] == doctest::Approx(0.0).epsilon(1e-12));
    for (int j = 1; j < 4; ++j) CHECK(sp.eigenvalues[j] == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
    CHECK(sp.lambda2 == doctest::Approx(4.0 / 3.0));
    // mu = 1 - 4/3 = -1/3, negative end.
    CHECK(sp.mu2_abs == doctest::Approx(1.0 / 3.0));
    CHECK_FALSE(sp.mu2_positive);
}

TEST_CASE("two-node path") {
    auto sp = normalized_laplacian_spectrum(testgraphs::path(2));
    CHECK(std::abs(sp.eigenvalues[0]) < 1e-12);
    CHECK(sp.eigenvalues[1] == doctest::Approx(2.0));
}

TEST_CASE("disconnected cliques have a double zero") {
    auto sp = normalized_laplacian_spectrum(testgraphs::two_cliques(4, false));
    CHECK(std::abs(sp.lambda2) < 1e-8);
    auto bridged = normalized_laplacian_spectrum(testgraphs::two_cliques(4, true));
    CHECK(bridged.lambda2 > 1e-8);
}

TEST_CASE("isolated node is rejected") {
    std::vector<sbm::Edge> e = {{0, 1}};
    auto net = sbm::Network::from_edges(3, e);
    CHECK_THROWS_AS(normalized_laplacian_spectrum(net), DisconnectedError);
}

TEST_CASE("trace identity and range on sampled networks") {
    for (std::uint64_t seed : {1, 2, 3}) {
        auto net = sbm::sample(sbm::make_two_level_model({60, 40}, {0.3, 0.05}, seed));
        REQUIRE(sbm::is_connected(net));
        auto sp = normalized_laplacian_spectrum(net);
        double sum = 0.0;
        for (double l : sp.eigenvalues) sum += l;
        CHECK(sum == doctest::Approx(100.0).epsilon(1e-10));
        CHECK(std::abs(sp.eigenvalues.front()) < 1e-8);
        CHECK(sp.eigenvalues.back() <= 2.0 + 1e-10);
        CHECK(std::is_sorted(sp.eigenvalues.begin(), sp.eigenvalues.end()));
    }
}

TEST_CASE("1 - lambda are the eigenvalues of D^-1 A") {
    auto net = sbm::sample(sbm::make_two_level_model({20, 25}, {0.4, 0.1}, 4));
    REQUIRE(sbm::is_connected(net));
    auto sp = normalized_laplacian_spectrum(net);
    Eigen::MatrixXd a = net.dense_adjacency();
    Eigen::MatrixXd p = a;
    for (int i = 0; i < p.rows(); ++i) p.row(i) /= a.row(i).sum();
    Eigen::EigenSolver<Eigen::MatrixXd> es(p, false);
    std::vector<double> mu;
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
        CHECK(std::abs(es.eigenvalues()(i).imag()) < 1e-8);
        mu.push_back(es.eigenvalues()(i).real());
    }
    std::sort(mu.begin(), mu.end(), std::greater<>());
    for (std::size_t j = 0; j < mu.size(); ++j) CHECK(1.0 - sp.eigenvalues[j] == doctest::Approx(mu[j]).epsilon(1e-8));
}

TEST_CASE("lambda2 vanishes exactly for disconnected samples") {
    auto split = sbm::sample(sbm::make_two_level_model({15, 15}, {0.6, 0.0}, 2));
    REQUIRE_FALSE(sbm::is_connected(split));
    CHECK(std::abs(normalized_laplacian_spectrum(split).lambda2) < 1e-8);
}

TEST_CASE("Lanczos lambda2 agrees with the dense solve") {
    CHECK(lambda2_only(testgraphs::complete(4), 1e-8) == doctest::Approx(4.0 / 3.0).epsilon(1e-8));

    auto barbell = testgraphs::two_cliques(5, true);
    const double dense = normalized_laplacian_spectrum(barbell).lambda2;
    CHECK(dense < 0.1);
    CHECK(std::abs(lambda2_only(barbell, 1e-9) - dense) <= 1e-9);

    for (std::uint64_t seed : {1, 2}) {
        auto net = sbm::sample(sbm::make_two_level_model({300, 200}, {0.08, 0.01}, seed));
        REQUIRE(sbm::is_connected(net));
        auto sp = normalized_laplacian_spectrum(net);
        CHECK(std::abs(lambda2_only(net, 1e-8) - sp.lambda2) <= 1e-8);
        CHECK(std::abs(lambda_max_only(net, 1e-8) - sp.lambda_max) <= 1e-8);
    }
}

TEST_CASE("histogram counts and CSV dump") {
    std::vector<double> v = {0.0, 0.1, 0.5, 0.99, 1.0, 2.0};
    auto h = histogram(v, 2, 0.0, 1.0);
    REQUIRE(h.counts.size() == 2);
    CHECK(h.edges.size() == 3);
    CHECK(h.counts[0] == 2);
    CHECK(h.counts[1] == 3);  // 1.0 lands in the last bin, 2.0 is dropped

    auto sp = normalized_laplacian_spectrum(testgraphs::path(2));
    std::stringstream ss;
    write_spectrum_csv(sp, ss);
    std::string header, first;
    std::getline(ss, header);
    std::getline(ss, first);
    CHECK(header == "eigenvalue");
    CHECK(std::abs(std::stod(first)) < 1e-12);
}
