#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "blockcons/sbm.hpp"

namespace blockcons::consensus {

/// Left Perron vector of P = D^{-1} A, normalized in 1-norm: pi_i = d_i / 2|E|.
struct StationaryDist {
    std::vector<double> pi;
};

StationaryDist stationary(const sbm::Network& net);

/// Result of x(t+1) = P x(t) run until the relative sup-norm error to the
/// analytic fixed point stays below epsilon.
struct ConsensusRun {
    std::vector<double> x0;
    double x_bar = 0.0;  // <x0, pi>; the fixed point is x_bar * 1
    double epsilon = 0.0;
    long tau_eps = 0;
    bool censored = false;
    long rounds_simulated = 0;
    /// error_trace[t] = ||x(t) - x*||_inf / ||x(0) - x*||_inf
    std::vector<double> error_trace;
};

struct RunOptions {
    long max_rounds = 100000;
    /// Extra rounds the criterion has to keep holding before tau is declared.
    long lookahead = 50;
};

/// Synchronous neighbor averaging. Throws DisconnectedError on a
/// disconnected graph. When max_rounds runs out the result is censored and
/// tau_eps is max_rounds.
ConsensusRun run(const sbm::Network& net, std::span<const double> x0, double epsilon,
                 const RunOptions& opts = {});

/// x0 i.i.d. uniform on [0, 1), one value per node.
std::vector<double> uniform_initial_state(int n, std::uint64_t seed);

struct TauBound {
    double exact = 0.0;        // |ln eps| / |ln |mu2||
    double first_order = 0.0;  // |ln eps| / (1 - |mu2|)
};

/// Round-count bounds from the second-largest transition eigenvalue modulus.
/// Requires 0 < |mu2| < 1 and 0 < eps <= 1.
TauBound tau_bound(double mu2_abs, double epsilon);

struct RunSummary {
    int n = 0;
    int K = 0;
    double p_in = 0.0;
    double p_out = 0.0;
    double epsilon = 0.0;
    long tau_eps = 0;
    bool censored = false;
    double lambda2_empirical = 0.0;
    double mu2_abs = 0.0;
};

std::string summary_json(const RunSummary& s);
void write_error_trace_csv(const ConsensusRun& run, std::ostream& out);

}  // namespace blockcons::consensus
