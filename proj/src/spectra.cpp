#include "blockcons/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "blockcons/error.hpp"
#include "blockcons/format.hpp"
#include "blockcons/random.hpp"
#include "json.hpp"

namespace blockcons::spectra {

namespace {

std::vector<double> inv_sqrt_degrees(const sbm::Network& net) {
    const int n = net.num_nodes();
    std::vector<double> s(n);
    for (int i = 0; i < n; ++i) {
        if (net.degree(i) == 0)
            throw DisconnectedError("node " + std::to_string(i) + " is isolated");
        s[i] = 1.0 / std::sqrt(static_cast<double>(net.degree(i)));
    }
    return s;
}

// y = D^{-1/2} A D^{-1/2} x
void normalized_adjacency_apply(const sbm::Network& net, const std::vector<double>& inv_sqrt_d,
                                const Eigen::VectorXd& x, Eigen::VectorXd& y) {
    const int n = net.num_nodes();
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (sbm::NodeId j : net.neighbors(i)) acc += inv_sqrt_d[j] * x[j];
        y[i] = inv_sqrt_d[i] * acc;
    }
}

// Extreme eigenvalue of M = D^{-1/2} A D^{-1/2} restricted to the complement
// of its Perron vector. Explicitly restarted Lanczos with full
// reorthogonalization; restarts from the current Ritz vector.
double deflated_extreme(const sbm::Network& net, bool largest, double tol, const LanczosOptions& opts) {
    const int n = net.num_nodes();
    if (n < 2) throw InvalidArgument("need at least two nodes");
    const auto inv_sqrt_d = inv_sqrt_degrees(net);

    Eigen::VectorXd perron(n);
    for (int i = 0; i < n; ++i) perron[i] = 1.0 / inv_sqrt_d[i];
    perron.normalize();
    auto deflate = [&](Eigen::VectorXd& v) { v -= perron.dot(v) * perron; };

    Rng rng(opts.seed);
    Eigen::VectorXd start(n);
    for (int i = 0; i < n; ++i) start[i] = uniform01(rng) - 0.5;
    deflate(start);
    start.normalize();

    const int m = std::max(1, std::min(opts.krylov_dim, n - 1));
    Eigen::MatrixXd basis(n, m + 1);
    Eigen::VectorXd w(n);
    double last_residual = INFINITY;
    long total_steps = 0;

    for (int restart = 0; restart <= opts.max_restarts; ++restart) {
        std::vector<double> alpha, beta;
        basis.col(0) = start;
        for (int j = 0; j < m; ++j) {
            normalized_adjacency_apply(net, inv_sqrt_d, basis.col(j), w);
            ++total_steps;
            deflate(w);
            alpha.push_back(basis.col(j).dot(w));
            for (int pass = 0; pass < 2; ++pass) {
                const auto q = basis.leftCols(j + 1);
                w -= q * (q.transpose() * w);
            }
            deflate(w);
            const double b = w.norm();
            beta.push_back(b);

            const int k = j + 1;
            const bool check = (k % 5 == 0) || k == m || b < 1e-12;
            if (!check) {
                basis.col(j + 1) = w / b;
                continue;
            }
            Eigen::MatrixXd t = Eigen::MatrixXd::Zero(k, k);
            for (int i = 0; i < k; ++i) {
                t(i, i) = alpha[i];
                if (i + 1 < k) t(i, i + 1) = t(i + 1, i) = beta[i];
            }
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
            const int idx = largest ? k - 1 : 0;
            const double theta = es.eigenvalues()[idx];
            const Eigen::VectorXd s = es.eigenvectors().col(idx);
            last_residual = std::abs(b * s[k - 1]);
            if (last_residual <= tol || b < 1e-12) return theta;
            if (k == m) {
                start = basis.leftCols(k) * s;
                deflate(start);
                start.normalize();
                break;
            }
            basis.col(j + 1) = w / b;
        }
    }
    throw ConvergenceError("Lanczos did not converge", total_steps, last_residual);
}

}  // namespace

Eigen::MatrixXd normalized_laplacian(const sbm::Network& net) {
    const int n = net.num_nodes();
    const auto inv_sqrt_d = inv_sqrt_degrees(net);
    Eigen::MatrixXd l = Eigen::MatrixXd::Identity(n, n);
    for (int i = 0; i < n; ++i)
        for (sbm::NodeId j : net.neighbors(i)) l(i, j) = -inv_sqrt_d[i] * inv_sqrt_d[j];
    return l;
}

SpectrumEmpirical normalized_laplacian_spectrum(const sbm::Network& net) {
    if (net.num_nodes() < 2) throw InvalidArgument("need at least two nodes");
    const Eigen::MatrixXd l = normalized_laplacian(net);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(l, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw ConvergenceError("dense symmetric eigensolver failed", 30L * net.num_nodes(), NAN);

    SpectrumEmpirical out;
    out.eigenvalues.assign(es.eigenvalues().data(), es.eigenvalues().data() + l.rows());
    out.lambda2 = out.eigenvalues[1];
    out.lambda_max = out.eigenvalues.back();
    const double positive_end = std::abs(1.0 - out.lambda2);
    const double negative_end = std::abs(1.0 - out.lambda_max);
    out.mu2_abs = std::max(positive_end, negative_end);
    out.mu2_positive = (1.0 - out.lambda2) >= negative_end;
    return out;
}

double lambda2_only(const sbm::Network& net, double tol, const LanczosOptions& opts) {
    return 1.0 - deflated_extreme(net, /*largest=*/true, tol, opts);
}

double lambda_max_only(const sbm::Network& net, double tol, const LanczosOptions& opts) {
    return 1.0 - deflated_extreme(net, /*largest=*/false, tol, opts);
}

Histogram histogram(std::span<const double> values, int bins, double lo, double hi) {
    if (bins < 1 || !(hi > lo)) throw InvalidArgument("histogram needs bins >= 1 and hi > lo");
    Histogram h;
    h.edges.resize(bins + 1);
    for (int b = 0; b <= bins; ++b) h.edges[b] = lo + (hi - lo) * b / bins;
    h.counts.assign(bins, 0);
    for (double v : values) {
        if (v < lo || v > hi) continue;
        int b = static_cast<int>((v - lo) / (hi - lo) * bins);
        h.counts[std::min(b, bins - 1)]++;
    }
    return h;
}

void write_spectrum_csv(const SpectrumEmpirical& spec, std::ostream& out) {
    out << "eigenvalue\n";
    for (double v : spec.eigenvalues) out << format_double(v) << '\n';
}

std::string histogram_json(const Histogram& h) {
    nlohmann::json j;
    j["edges"] = h.edges;
    j["counts"] = h.counts;
    return j.dump();
}

}  // namespace blockcons::spectra
