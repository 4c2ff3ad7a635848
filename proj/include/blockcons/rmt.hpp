#pragma once

#include <complex>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "blockcons/sbm.hpp"

namespace blockcons::rmt {

using Complex = std::complex<double>;

/// Block data the resolvent equations need, precomputed once per model.
///
/// For the normalized Laplacian every diagonal entry is one, so the block
/// resolvent entries t_r(z) solve
///
///     t_r = 1 / (z - 1 - sum_s n_s V_rs t_s).
///
/// The off-diagonal expectation of L is -E (E as in sbm::BlockMatrices),
/// which is where the sign in the isolated-eigenvalue condition
/// det(I + T(z) E N) = 0 comes from.
struct ResolventSystem {
    Eigen::VectorXd sizes;               // n_r
    Eigen::MatrixXd weighted_variance;   // n_s V_rs (row r, col s)
    Eigen::MatrixXd weighted_expectation;// E_rs n_s
    double total = 0.0;                  // n

    static ResolventSystem from_model(const sbm::SbmModel& model);

    int num_blocks() const { return static_cast<int>(sizes.size()); }
    bool zero_variance() const { return weighted_variance.isZero(0.0); }
};

struct FixedPointOptions {
    int max_iters = 10000;
    double tol = 1e-10;
    double damping = 0.5;
    /// Try a Newton step each iteration and keep it when it lowers the residual.
    bool newton = true;
};

struct StieltjesState {
    Complex z;
    Eigen::VectorXcd t;
    double residual = 0.0;  // max-norm of t - F(t)
    int iterations = 0;
    bool damped = false;
};

/// Solves the block resolvent system at z starting from t0.
/// Throws ConvergenceError when max_iters is exhausted and
/// SingularPointError when a denominator falls below 1e-14.
StieltjesState fixed_point(const ResolventSystem& sys, Complex z, const Eigen::VectorXcd& t0,
                           const FixedPointOptions& opts = {});
StieltjesState fixed_point(const sbm::SbmModel& model, Complex z, const Eigen::VectorXcd& t0,
                           const FixedPointOptions& opts = {});

/// Right-hand side F(z, t) of the fixed-point system.
Eigen::VectorXcd resolvent_map(const ResolventSystem& sys, Complex z, const Eigen::VectorXcd& t);

/// J_rs = dF_r/dt_s = n_s V_rs F_r^2 evaluated at t.
Eigen::MatrixXcd resolvent_jacobian(const ResolventSystem& sys, Complex z, const Eigen::VectorXcd& t);

double spectral_radius(const Eigen::MatrixXcd& m);

struct DensityResult {
    std::vector<double> grid;
    std::vector<double> density;
    std::vector<int> failed_points;  // grid indices where the solve failed
    double min_raw_density = 0.0;    // before clamping at zero
    double max_residual = 0.0;
    long iterations = 0;
};

/// rho(lambda) = -(1 / (n pi)) sum_r n_r Im t_r(lambda + i eta), warm-started
/// along the grid. Failures are flagged per point; their density is NaN.
DensityResult bulk_density(const ResolventSystem& sys, std::span<const double> grid, double eta,
                           const FixedPointOptions& opts = {});
DensityResult bulk_density(const sbm::SbmModel& model, std::span<const double> grid, double eta,
                           const FixedPointOptions& opts = {});

struct SupportOptions {
    double window_lo = -0.5;
    double window_hi = 2.5;
    double tol = 1e-9;
};

struct Support {
    double lambda_left = 1.0;
    double lambda_right = 1.0;
    bool degenerate = false;  // zero variance: no bulk, collapses onto z = 1
};

/// Bulk edges: the real z where the stable real solution t(z) loses
/// stability, i.e. spectral-radius(J(z)) reaches one. Located by bisection
/// from the outside of the support inward.
Support support_boundaries(const ResolventSystem& sys, const SupportOptions& opts = {});
Support support_boundaries(const sbm::SbmModel& model, const SupportOptions& opts = {});

struct IsolatedOptions {
    double scan_step = 1e-3;
    double tol = 1e-8;
    double window_lo = -0.5;
    double window_hi = 2.5;
    /// |branch| below this at a scan point with no sign change counts as a
    /// touching double root.
    double double_root_tol = 1e-10;
};

/// Real roots of det(I + T(z) E N) outside the bulk, ascending, repeated
/// by multiplicity.
std::vector<double> isolated_eigenvalues(const ResolventSystem& sys, const Support& support,
                                         const IsolatedOptions& opts = {});
std::vector<double> isolated_eigenvalues(const sbm::SbmModel& model, const Support& support,
                                         const IsolatedOptions& opts = {});

/// Density grid. lo/hi left as NaN are filled from the support with a 10%
/// margin on each side. points == 0 skips the density entirely.
struct GridSpec {
    double lo = std::numeric_limits<double>::quiet_NaN();
    double hi = std::numeric_limits<double>::quiet_NaN();
    int points = 400;
    double eta = 1e-3;
};

struct PredictOptions {
    GridSpec grid;
    FixedPointOptions fixed_point;
    SupportOptions support;
    IsolatedOptions isolated;
};

struct SpectralPrediction {
    std::vector<double> grid;
    std::vector<double> density;
    Support support;
    std::vector<double> isolated;
    double predicted_lambda2 = 0.0;
    /// The nontrivial isolated root is absent: predicted_lambda2 == lambda_left.
    bool lambda2_merged = true;

    struct Diagnostics {
        std::vector<int> failed_points;
        double max_residual = 0.0;
        long iterations = 0;
        double min_raw_density = 0.0;
        double eta = 0.0;
    } diagnostics;
};

SpectralPrediction predict(const sbm::SbmModel& model, const PredictOptions& opts = {});

std::string prediction_json(const SpectralPrediction& p);
std::string prediction_csv(const SpectralPrediction& p);

}  // namespace blockcons::rmt
