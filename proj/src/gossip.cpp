#include "blockcons/gossip.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "blockcons/error.hpp"
#include "blockcons/format.hpp"
#include "json.hpp"

namespace blockcons::gossip {

std::vector<double> NodeState::estimate() const {
    std::vector<double> e(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) e[k] = s[k] / psw;
    return e;
}

NodeState make_node(std::size_t d, std::vector<std::size_t> shard, std::uint64_t seed) {
    NodeState node;
    node.w.assign(d, 0.0);
    node.s.assign(d, 0.0);
    node.shard = std::move(shard);
    node.rng.seed(seed);
    return node;
}

void pegasos_step(NodeState& node, const data::LabeledDataset& train, double nu, long t) {
    if (node.shard.empty()) throw InvalidArgument("node has no local examples");
    if (t < 1) throw InvalidArgument("Pegasos step index starts at 1");
    if (!(nu > 0.0)) throw InvalidArgument("nu must be positive");
    const auto& ex = train.examples[node.shard[uniform_index(node.rng, node.shard.size())]];
    const double eta = 1.0 / (nu * static_cast<double>(t));
    const double margin = ex.label * ex.x.dot(node.w);
    const double shrink = 1.0 - eta * nu;
    for (double& v : node.w) v *= shrink;
    if (margin < 1.0) ex.x.axpy(eta * ex.label, node.w);
}

void push_sum_round(std::vector<NodeState>& nodes, const sbm::Network& net, Mixing mixing) {
    const int n = net.num_nodes();
    if (static_cast<int>(nodes.size()) != n) throw InvalidArgument("one node state per network node expected");
    if (n == 0) return;
    const std::size_t d = nodes[0].s.size();

    std::vector<double> share(n);
    for (int i = 0; i < n; ++i) {
        const int fanout = net.degree(i) + (mixing == Mixing::UniformSplit ? 1 : 0);
        if (fanout == 0) throw DisconnectedError("isolated node cannot take part in Push Sum");
        share[i] = 1.0 / fanout;
    }

    std::vector<std::vector<double>> new_s(n, std::vector<double>(d, 0.0));
    std::vector<double> new_w(n, 0.0);
    for (int j = 0; j < n; ++j) {
        auto& acc = new_s[j];
        auto receive = [&](int i) {
            const double f = share[i];
            const auto& src = nodes[i].s;
            for (std::size_t k = 0; k < d; ++k) acc[k] += f * src[k];
            new_w[j] += f * nodes[i].psw;
        };
        // Senders in ascending index order; j itself slots into that order.
        bool self_done = mixing != Mixing::UniformSplit;
        for (sbm::NodeId i : net.neighbors(j)) {
            if (!self_done && static_cast<int>(i) > j) {
                receive(j);
                self_done = true;
            }
            receive(static_cast<int>(i));
        }
        if (!self_done) receive(j);
    }
    for (int j = 0; j < n; ++j) {
        nodes[j].s.swap(new_s[j]);
        nodes[j].psw = new_w[j];
    }
}

double max_pairwise_gap(std::span<const std::vector<double>> models) {
    double worst = 0.0;
    for (std::size_t i = 0; i < models.size(); ++i) {
        for (std::size_t j = i + 1; j < models.size(); ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < models[i].size(); ++k) {
                const double diff = models[i][k] - models[j][k];
                acc += diff * diff;
            }
            worst = std::max(worst, acc);
        }
    }
    return std::sqrt(worst);
}

double svm_objective(const data::LabeledDataset& ds, std::span<const double> w, double nu) {
    double loss = 0.0;
    for (const auto& ex : ds.examples) loss += std::max(0.0, 1.0 - ex.label * ex.x.dot(w));
    if (ds.size() > 0) loss /= static_cast<double>(ds.size());
    double sq = 0.0;
    for (double v : w) sq += v * v;
    return loss + 0.5 * nu * sq;
}

void GadgetConfig::validate() const {
    if (!(nu > 0.0)) throw InvalidArgument("nu must be positive");
    if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
    if (max_rounds < 1) throw InvalidArgument("max_rounds must be >= 1");
    if (steps_per_round < 0) throw InvalidArgument("steps_per_round must be >= 0");
    if (learning_rounds < 0) throw InvalidArgument("learning_rounds must be >= 0");
    if (trace_every < 1) throw InvalidArgument("trace_every must be >= 1");
}

namespace {

std::vector<double> average(std::span<const std::vector<double>> models, std::size_t d) {
    std::vector<double> avg(d, 0.0);
    for (const auto& m : models)
        for (std::size_t k = 0; k < d; ++k) avg[k] += m[k];
    for (double& v : avg) v /= static_cast<double>(models.size());
    return avg;
}

}  // namespace

GadgetRun run_gadget(const sbm::Network& net, const data::LabeledDataset& train, const data::LabeledDataset& test,
                     const GadgetConfig& cfg) {
    cfg.validate();
    if (!sbm::is_connected(net)) throw DisconnectedError("GADGET needs a connected network");
    const int n = net.num_nodes();
    const std::size_t d = train.d;
    const auto partition = data::partition_equal(train, n, child_seed(cfg.seed, 0xDA7A));
    if (partition.has_empty_shard)
        throw InvalidArgument("fewer training examples than nodes: some shards would be empty");

    std::vector<NodeState> nodes;
    nodes.reserve(n);
    for (int i = 0; i < n; ++i) nodes.push_back(make_node(d, partition.shards[i], child_seed(cfg.seed, 1, i)));

    const auto& eval_set = test.size() > 0 ? test : train;
    GadgetRun out;
    std::vector<std::vector<double>> models(n);
    std::vector<double> before(d);

    auto record = [&](long round, double gap) {
        const auto avg = average(models, d);
        out.trace.push_back({round, gap, svm_objective(train, avg, cfg.nu), data::accuracy(eval_set, avg)});
    };

    long round = 0;
    bool converged = false;
    while (round < cfg.max_rounds) {
        ++round;
        const bool learning = round <= cfg.learning_rounds;
        for (auto& node : nodes) {
            if (cfg.adopt_each_round) {
                if (learning)
                    for (int k = 0; k < cfg.steps_per_round; ++k) pegasos_step(node, train, cfg.nu, ++node.steps);
                for (std::size_t k = 0; k < d; ++k) node.s[k] = node.w[k] * node.psw;
            } else if (learning) {
                before = node.w;
                for (int k = 0; k < cfg.steps_per_round; ++k) pegasos_step(node, train, cfg.nu, ++node.steps);
                for (std::size_t k = 0; k < d; ++k) node.s[k] += node.w[k] - before[k];
            }
        }
        push_sum_round(nodes, net, cfg.mixing);
        for (int i = 0; i < n; ++i) {
            models[i] = nodes[i].estimate();
            if (cfg.adopt_each_round) nodes[i].w = models[i];
        }
        const double gap = max_pairwise_gap(models);
        out.gap_trace.push_back(gap);
        converged = gap < cfg.epsilon;
        if (converged || round % cfg.trace_every == 0 || round == cfg.max_rounds) record(round, gap);
        if (converged) break;
    }
    out.rounds_to_consensus = round;
    out.censored = !converged;
    out.final_model = average(models, d);
    out.final_models = models;
    out.final_gap = out.gap_trace.empty() ? 0.0 : out.gap_trace.back();
    out.final_objective = out.trace.back().objective;
    out.final_accuracy = out.trace.back().accuracy;
    return out;
}

GadgetRun run_gadget(const sbm::SbmModel& model, const data::LabeledDataset& train, const data::LabeledDataset& test,
                     const GadgetConfig& cfg, int max_attempts) {
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        const auto seed = attempt == 0 ? model.seed() : child_seed(model.seed(), 0xC0, attempt);
        const auto net = sbm::sample(model.with_seed(seed));
        if (sbm::is_connected(net)) return run_gadget(net, train, test, cfg);
    }
    throw DisconnectedError("no connected network after " + std::to_string(max_attempts) + " draws");
}

std::string config_json(const GadgetConfig& cfg) {
    nlohmann::json j = {{"nu", cfg.nu},
                        {"epsilon", cfg.epsilon},
                        {"max_rounds", cfg.max_rounds},
                        {"mixing", cfg.mixing == Mixing::UniformSplit ? "uniform_split" : "neighbor_split"},
                        {"steps_per_round", cfg.steps_per_round},
                        {"learning_rounds", cfg.learning_rounds},
                        {"adopt_each_round", cfg.adopt_each_round},
                        {"trace_every", cfg.trace_every},
                        {"seed", cfg.seed}};
    return j.dump();
}

std::string run_summary_json(const GadgetConfig& cfg, const GadgetRun& run) {
    nlohmann::json j = {{"config", nlohmann::json::parse(config_json(cfg))},
                        {"rounds_to_consensus", run.rounds_to_consensus},
                        {"censored", run.censored},
                        {"final_accuracy", run.final_accuracy},
                        {"final_objective", run.final_objective},
                        {"final_gap", run.final_gap}};
    return j.dump(2);
}

void write_trace_csv(const GadgetRun& run, std::ostream& out) {
    out << "round,max_pairwise_gap,objective,accuracy\n";
    for (const auto& p : run.trace)
        out << p.round << ',' << format_double(p.max_pairwise_gap) << ',' << format_double(p.objective) << ','
            << format_double(p.accuracy) << '\n';
}

}  // namespace blockcons::gossip
