#include "blockcons/sbm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

#include "blockcons/error.hpp"
#include "blockcons/random.hpp"

namespace blockcons::sbm {

void TwoLevelProbs::validate() const {
    if (!(p_in >= 0.0 && p_in <= 1.0))
        throw InvalidArgument("p_in must lie in [0, 1], got " + std::to_string(p_in));
    if (!(p_out >= 0.0 && p_out <= p_in))
        throw InvalidArgument("p_out must lie in [0, p_in], got " + std::to_string(p_out));
}

SbmModel::SbmModel(std::vector<int> community_sizes, Eigen::MatrixXd edge_probs, std::uint64_t seed)
    : sizes_(std::move(community_sizes)), probs_(std::move(edge_probs)), seed_(seed) {
    if (sizes_.empty()) throw InvalidArgument("SBM needs at least one community");
    for (int s : sizes_) {
        if (s < 1) throw InvalidArgument("community sizes must be >= 1");
        n_ += s;
    }
    const auto k = static_cast<Eigen::Index>(sizes_.size());
    if (probs_.rows() != k || probs_.cols() != k)
        throw InvalidArgument("edge probability matrix must be K x K");
    for (Eigen::Index r = 0; r < k; ++r) {
        for (Eigen::Index s = 0; s < k; ++s) {
            const double p = probs_(r, s);
            if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("edge probabilities must lie in [0, 1]");
            if (p != probs_(s, r)) throw InvalidArgument("edge probability matrix must be symmetric");
        }
    }
}

SbmModel make_two_level_model(std::vector<int> sizes, TwoLevelProbs probs, std::uint64_t seed) {
    probs.validate();
    if (sizes.empty()) throw InvalidArgument("SBM needs at least one community");
    const auto k = static_cast<Eigen::Index>(sizes.size());
    Eigen::MatrixXd pi = Eigen::MatrixXd::Constant(k, k, probs.p_out);
    pi.diagonal().setConstant(probs.p_in);
    return SbmModel(std::move(sizes), std::move(pi), seed);
}

namespace {

std::vector<int> membership_of(const std::vector<int>& sizes) {
    std::vector<int> m;
    for (int r = 0; r < static_cast<int>(sizes.size()); ++r) m.insert(m.end(), sizes[r], r);
    return m;
}

}  // namespace

Network Network::from_edges(int n, std::span<const Edge> edges, std::vector<int> community_sizes,
                            std::uint64_t seed) {
    if (n < 0) throw InvalidArgument("node count must be non-negative");
    if (community_sizes.empty() && n > 0) community_sizes = {n};
    int total = 0;
    for (int s : community_sizes) {
        if (s < 1) throw InvalidArgument("community sizes must be >= 1");
        total += s;
    }
    if (total != n) throw InvalidArgument("community sizes must sum to the node count");

    Network net;
    net.adjacency_.resize(n);
    net.sizes_ = std::move(community_sizes);
    net.membership_ = membership_of(net.sizes_);
    net.seed_ = seed;
    for (const auto& [a, b] : edges) {
        if (a >= static_cast<NodeId>(n) || b >= static_cast<NodeId>(n))
            throw InvalidArgument("edge endpoint out of range");
        if (a == b) throw InvalidArgument("self edges are not allowed");
        net.adjacency_[a].push_back(b);
        net.adjacency_[b].push_back(a);
    }
    for (auto& nb : net.adjacency_) {
        std::sort(nb.begin(), nb.end());
        if (std::adjacent_find(nb.begin(), nb.end()) != nb.end())
            throw InvalidArgument("duplicate edge");
    }
    net.num_edges_ = edges.size();
    return net;
}

std::vector<int> Network::degrees() const {
    std::vector<int> d(adjacency_.size());
    for (std::size_t i = 0; i < adjacency_.size(); ++i) d[i] = static_cast<int>(adjacency_[i].size());
    return d;
}

std::vector<Edge> Network::edges() const {
    std::vector<Edge> out;
    out.reserve(num_edges_);
    for (NodeId i = 0; i < adjacency_.size(); ++i)
        for (NodeId j : adjacency_[i])
            if (i < j) out.emplace_back(i, j);
    return out;
}

Eigen::MatrixXd Network::dense_adjacency() const {
    const int n = num_nodes();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (NodeId j : adjacency_[i]) a(i, j) = 1.0;
    return a;
}

Network sample(const SbmModel& model) {
    const int n = model.num_nodes();
    const auto& pi = model.edge_probs();

    Network net;
    net.adjacency_.resize(n);
    net.sizes_ = model.community_sizes();
    net.membership_ = membership_of(net.sizes_);
    net.seed_ = model.seed();

    Rng rng(model.seed());
    std::size_t m = 0;
    // Pairs visited in (i, j>i) order so neighbor lists come out sorted.
    for (int i = 0; i < n; ++i) {
        const int ci = net.membership_[i];
        for (int j = i + 1; j < n; ++j) {
            const double p = pi(ci, net.membership_[j]);
            if (uniform01(rng) < p) {
                net.adjacency_[i].push_back(static_cast<NodeId>(j));
                net.adjacency_[j].push_back(static_cast<NodeId>(i));
                ++m;
            }
        }
    }
    net.num_edges_ = m;
    return net;
}

BlockMatrices block_matrices(const SbmModel& model) {
    const auto k = static_cast<Eigen::Index>(model.num_blocks());
    const auto& pi = model.edge_probs();
    Eigen::VectorXd sizes(k);
    for (Eigen::Index r = 0; r < k; ++r) sizes[r] = model.community_sizes()[r];

    BlockMatrices out;
    out.expected_degree = pi * sizes;
    for (Eigen::Index r = 0; r < k; ++r)
        if (!(out.expected_degree[r] > 0.0))
            throw InvalidArgument("block " + std::to_string(r) + " has zero expected degree");

    out.expectation.resize(k, k);
    out.variance.resize(k, k);
    for (Eigen::Index r = 0; r < k; ++r) {
        for (Eigen::Index s = 0; s < k; ++s) {
            const double dr = out.expected_degree[r];
            const double ds = out.expected_degree[s];
            const double p = pi(r, s);
            out.expectation(r, s) = p / std::sqrt(dr * ds);
            out.variance(r, s) = p * (1.0 - p) / (dr * ds);
        }
    }
    return out;
}

bool is_connected(const Network& net) {
    const int n = net.num_nodes();
    if (n <= 1) return true;
    std::vector<char> seen(n, 0);
    std::queue<int> frontier;
    frontier.push(0);
    seen[0] = 1;
    int reached = 1;
    while (!frontier.empty()) {
        const int u = frontier.front();
        frontier.pop();
        for (NodeId v : net.neighbors(u)) {
            if (!seen[v]) {
                seen[v] = 1;
                ++reached;
                frontier.push(static_cast<int>(v));
            }
        }
    }
    return reached == n;
}

}  // namespace blockcons::sbm
