#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace blockcons::sbm {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

/// Within/between community edge probabilities.
struct TwoLevelProbs {
    double p_in = 0.0;
    double p_out = 0.0;

    /// Throws InvalidArgument unless 0 <= p_out <= p_in <= 1.
    void validate() const;
    /// Community prevalence p_in - p_out.
    double delta() const { return p_in - p_out; }
};

/// Generative stochastic block model: block sizes, the K x K edge
/// probability matrix and the seed used by sample().
class SbmModel {
public:
    SbmModel(std::vector<int> community_sizes, Eigen::MatrixXd edge_probs, std::uint64_t seed);

    const std::vector<int>& community_sizes() const { return sizes_; }
    const Eigen::MatrixXd& edge_probs() const { return probs_; }
    std::uint64_t seed() const { return seed_; }

    int num_blocks() const { return static_cast<int>(sizes_.size()); }
    int num_nodes() const { return n_; }

    SbmModel with_seed(std::uint64_t seed) const { return SbmModel(sizes_, probs_, seed); }

private:
    std::vector<int> sizes_;
    Eigen::MatrixXd probs_;
    std::uint64_t seed_;
    int n_ = 0;
};

SbmModel make_two_level_model(std::vector<int> sizes, TwoLevelProbs probs, std::uint64_t seed);

/// Undirected simple graph with nodes grouped contiguously by community.
/// Immutable once built.
class Network {
public:
    /// Builds from an explicit edge list. `community_sizes` must sum to n;
    /// an empty list means a single block. Rejects self edges, duplicates
    /// and out-of-range endpoints.
    static Network from_edges(int n, std::span<const Edge> edges,
                              std::vector<int> community_sizes = {},
                              std::uint64_t seed = 0);

    int num_nodes() const { return static_cast<int>(adjacency_.size()); }
    int num_blocks() const { return static_cast<int>(sizes_.size()); }
    std::size_t num_edges() const { return num_edges_; }

    const std::vector<int>& community_sizes() const { return sizes_; }
    const std::vector<int>& membership() const { return membership_; }
    /// Sorted ascending neighbor list of node i.
    const std::vector<NodeId>& neighbors(int i) const { return adjacency_[i]; }
    int degree(int i) const { return static_cast<int>(adjacency_[i].size()); }
    std::vector<int> degrees() const;
    /// Seed of the model draw that produced this network (0 when hand built).
    std::uint64_t seed() const { return seed_; }

    /// Edges as (i, j) with i < j, lexicographic order.
    std::vector<Edge> edges() const;

    Eigen::MatrixXd dense_adjacency() const;

private:
    Network() = default;

    std::vector<std::vector<NodeId>> adjacency_;
    std::vector<int> sizes_;
    std::vector<int> membership_;
    std::size_t num_edges_ = 0;
    std::uint64_t seed_ = 0;

    friend Network sample(const SbmModel& model);
};

/// Draws each unordered pair once with probability Pi[c_i][c_j].
/// Deterministic in (model, model.seed()).
Network sample(const SbmModel& model);

/// Blockwise kernels of the normalized Laplacian.
struct BlockMatrices {
    Eigen::MatrixXd expectation;     // E_rs = Pi_rs / sqrt(Dhat_r Dhat_s)
    Eigen::MatrixXd variance;        // V_rs = Pi_rs (1 - Pi_rs) / (Dhat_r Dhat_s)
    Eigen::VectorXd expected_degree; // Dhat_r = sum_s n_s Pi_rs
};

BlockMatrices block_matrices(const SbmModel& model);

bool is_connected(const Network& net);

// Plain-text edge list: header "n K sizes...", then "i j" per line, 0-indexed.
void write_edge_list(const Network& net, std::ostream& out);
Network read_edge_list(std::istream& in);

// JSON form carrying membership and seed.
std::string to_json(const Network& net);
Network network_from_json(const std::string& text);

}  // namespace blockcons::sbm
