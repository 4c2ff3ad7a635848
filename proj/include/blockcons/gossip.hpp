#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "blockcons/data.hpp"
#include "blockcons/random.hpp"
#include "blockcons/sbm.hpp"

namespace blockcons::gossip {

/// Per-node learner plus its Push Sum (sum, weight) pair.
struct NodeState {
    std::vector<double> w;            // working model
    std::vector<double> s;            // push-sum sum
    double psw = 1.0;                 // push-sum weight
    std::vector<std::size_t> shard;   // indices into the training set
    Rng rng;
    long steps = 0;                   // local Pegasos steps taken

    std::vector<double> estimate() const;
};

NodeState make_node(std::size_t d, std::vector<std::size_t> shard, std::uint64_t seed);

/// How a node spreads its (s, psw) each round. Both are column-stochastic,
/// so the totals are conserved.
enum class Mixing {
    UniformSplit,   // equal shares to itself and each neighbor
    NeighborSplit,  // equal shares to neighbors only
};

/// One Pegasos step on a uniformly drawn local example at step index t >= 1:
/// w <- w - (1 / (nu t)) (nu w - 1[y <w,x> < 1] y x).
void pegasos_step(NodeState& node, const data::LabeledDataset& train, double nu, long t);

/// One synchronous Push Sum exchange over the network. Receivers sum their
/// incoming shares in ascending sender order.
void push_sum_round(std::vector<NodeState>& nodes, const sbm::Network& net, Mixing mixing = Mixing::UniformSplit);

/// max over pairs of ||a_i - a_j||_2, over all pairs.
double max_pairwise_gap(std::span<const std::vector<double>> models);

/// (1/N) sum hinge(w; x, y) + (nu/2) ||w||^2 over the whole training set.
double svm_objective(const data::LabeledDataset& ds, std::span<const double> w, double nu);

struct GadgetConfig {
    double nu = 0.1;
    double epsilon = 1e-10;
    long max_rounds = 100000;
    Mixing mixing = Mixing::UniformSplit;
    int steps_per_round = 1;
    /// Rounds in which nodes take local steps; afterwards they only gossip.
    long learning_rounds = 50;
    /// Replace w by s/psw after every exchange. When false the local
    /// learners run undisturbed and their updates are injected into s; the
    /// stopping rule then looks at the estimates s/psw.
    bool adopt_each_round = true;
    /// Objective/accuracy are recorded every this many rounds (and at the end).
    long trace_every = 1;
    std::uint64_t seed = 1;

    void validate() const;
};

struct TracePoint {
    long round = 0;
    double max_pairwise_gap = 0.0;
    double objective = 0.0;
    double accuracy = 0.0;
};

struct GadgetRun {
    long rounds_to_consensus = 0;
    bool censored = false;
    std::vector<double> gap_trace;   // every round
    std::vector<TracePoint> trace;   // every trace_every rounds
    std::vector<double> final_model; // average of node models at the end
    std::vector<std::vector<double>> final_models;  // per node
    double final_objective = 0.0;
    double final_accuracy = 0.0;     // on the test set (train set if test is empty)
    double final_gap = 0.0;
};

GadgetRun run_gadget(const sbm::Network& net, const data::LabeledDataset& train, const data::LabeledDataset& test,
                     const GadgetConfig& cfg);

/// Samples the network from `model` first, redrawing with derived seeds
/// until it is connected (up to max_attempts).
GadgetRun run_gadget(const sbm::SbmModel& model, const data::LabeledDataset& train,
                     const data::LabeledDataset& test, const GadgetConfig& cfg, int max_attempts = 100);

std::string config_json(const GadgetConfig& cfg);
std::string run_summary_json(const GadgetConfig& cfg, const GadgetRun& run);
void write_trace_csv(const GadgetRun& run, std::ostream& out);

}  // namespace blockcons::gossip
