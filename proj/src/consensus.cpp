#include "blockcons/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "blockcons/error.hpp"
#include "blockcons/format.hpp"
#include "blockcons/random.hpp"
#include "json.hpp"

namespace blockcons::consensus {

StationaryDist stationary(const sbm::Network& net) {
    if (!sbm::is_connected(net)) throw DisconnectedError("stationary distribution needs a connected graph");
    const int n = net.num_nodes();
    StationaryDist out;
    out.pi.resize(n);
    if (n == 1) {
        out.pi[0] = 1.0;
        return out;
    }
    const double volume = 2.0 * static_cast<double>(net.num_edges());
    for (int i = 0; i < n; ++i) out.pi[i] = net.degree(i) / volume;
    return out;
}

namespace {

double sup_distance(const std::vector<double>& x, double c) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v - c));
    return m;
}

}  // namespace

ConsensusRun run(const sbm::Network& net, std::span<const double> x0, double epsilon, const RunOptions& opts) {
    const int n = net.num_nodes();
    if (static_cast<int>(x0.size()) != n) throw InvalidArgument("x0 size does not match the network");
    if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
    const auto pi = stationary(net).pi;

    ConsensusRun out;
    out.x0.assign(x0.begin(), x0.end());
    out.epsilon = epsilon;
    for (int i = 0; i < n; ++i) out.x_bar += x0[i] * pi[i];

    std::vector<double> x = out.x0, next(n);
    const double e0 = sup_distance(x, out.x_bar);
    if (e0 == 0.0) {
        out.error_trace = {0.0};
        return out;
    }
    out.error_trace.push_back(1.0);

    // Candidate tau: first round of the current run of rounds with error <= eps.
    long candidate = -1;
    long t = 0;
    while (t < opts.max_rounds) {
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (sbm::NodeId j : net.neighbors(i)) acc += x[j];
            next[i] = acc / net.degree(i);
        }
        x.swap(next);
        ++t;
        const double err = sup_distance(x, out.x_bar) / e0;
        out.error_trace.push_back(err);
        if (err <= epsilon) {
            if (candidate < 0) candidate = t;
            if (t - candidate >= opts.lookahead) break;
        } else {
            candidate = -1;
        }
    }
    out.rounds_simulated = t;
    if (candidate >= 0 && t - candidate >= opts.lookahead) {
        out.tau_eps = candidate;
    } else {
        out.censored = true;
        out.tau_eps = opts.max_rounds;
    }
    return out;
}

std::vector<double> uniform_initial_state(int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> x(n);
    for (double& v : x) v = uniform01(rng);
    return x;
}

TauBound tau_bound(double mu2_abs, double epsilon) {
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw InvalidArgument("epsilon must lie in (0, 1]");
    if (!(mu2_abs > 0.0)) throw InvalidArgument("|mu2| must be positive");
    if (mu2_abs >= 1.0) throw InvalidArgument("|mu2| >= 1: consensus bound diverges");
    const double log_eps = std::abs(std::log(epsilon));
    return {log_eps / std::abs(std::log(mu2_abs)), log_eps / (1.0 - mu2_abs)};
}

std::string summary_json(const RunSummary& s) {
    nlohmann::json j = {{"n", s.n},
                        {"K", s.K},
                        {"p_in", s.p_in},
                        {"p_out", s.p_out},
                        {"delta", s.p_in - s.p_out},
                        {"epsilon", s.epsilon},
                        {"tau_eps", s.tau_eps},
                        {"censored", s.censored},
                        {"lambda2_empirical", s.lambda2_empirical},
                        {"mu2_abs", s.mu2_abs}};
    return j.dump(2);
}

void write_error_trace_csv(const ConsensusRun& run, std::ostream& out) {
    out << "round,error\n";
    for (std::size_t t = 0; t < run.error_trace.size(); ++t)
        out << t << ',' << format_double(run.error_trace[t]) << '\n';
}

}  // namespace blockcons::consensus
