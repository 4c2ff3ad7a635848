#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "blockcons/sbm.hpp"

namespace blockcons::spectra {

/// Eigenvalues of the normalized Laplacian L = I - D^{-1/2} A D^{-1/2}.
///
/// The transition matrix P = D^{-1} A shares this spectrum through
/// mu_j = 1 - lambda_j, so mu2_abs is read off both ends of the spectrum.
struct SpectrumEmpirical {
    std::vector<double> eigenvalues;  // ascending
    double lambda2 = 0.0;
    double lambda_max = 0.0;
    /// Second-largest modulus among {1 - lambda_j}.
    double mu2_abs = 0.0;
    /// True when that modulus is attained by the positive end (1 - lambda2),
    /// i.e. slow consensus modes are not oscillatory.
    bool mu2_positive = true;
};

Eigen::MatrixXd normalized_laplacian(const sbm::Network& net);

/// Full dense decomposition. Rejects isolated nodes.
SpectrumEmpirical normalized_laplacian_spectrum(const sbm::Network& net);

struct LanczosOptions {
    int krylov_dim = 300;
    int max_restarts = 200;
    std::uint64_t seed = 0x5eed;
};

/// lambda2 via Lanczos on D^{-1/2} A D^{-1/2} with the known top
/// eigenvector sqrt(d) projected out. Returns once the Ritz residual
/// drops below tol, which bounds the eigenvalue error by tol.
double lambda2_only(const sbm::Network& net, double tol, const LanczosOptions& opts = {});

/// Largest normalized-Laplacian eigenvalue, same machinery.
double lambda_max_only(const sbm::Network& net, double tol, const LanczosOptions& opts = {});

struct Histogram {
    std::vector<double> edges;  // bins + 1 entries
    std::vector<long> counts;

    double bin_width() const { return edges.size() > 1 ? edges[1] - edges[0] : 0.0; }
};

/// Equal-width bins on [lo, hi]; values outside are dropped.
Histogram histogram(std::span<const double> values, int bins, double lo, double hi);

void write_spectrum_csv(const SpectrumEmpirical& spec, std::ostream& out);
std::string histogram_json(const Histogram& h);

}  // namespace blockcons::spectra
