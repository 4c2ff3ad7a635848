#include "blockcons/rmt.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "blockcons/error.hpp"
#include "blockcons/format.hpp"
#include "json.hpp"

namespace blockcons::rmt {

namespace {

constexpr double kSingularDenominator = 1e-14;

double max_norm(const Eigen::VectorXcd& v) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) m = std::max(m, std::abs(v[i]));
    return m;
}

bool all_finite(const Eigen::VectorXcd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (!std::isfinite(v[i].real()) || !std::isfinite(v[i].imag())) return false;
    return true;
}

bool in_lower_half_plane(const Eigen::VectorXcd& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i)
        if (t[i].imag() > 0.0) return false;
    return true;
}

Eigen::VectorXcd free_resolvent(int k, Complex z) {
    return Eigen::VectorXcd::Constant(k, 1.0 / (z - 1.0));
}

}  // namespace

ResolventSystem ResolventSystem::from_model(const sbm::SbmModel& model) {
    const auto blocks = sbm::block_matrices(model);
    const auto k = static_cast<Eigen::Index>(model.num_blocks());
    ResolventSystem sys;
    sys.sizes.resize(k);
    for (Eigen::Index r = 0; r < k; ++r) sys.sizes[r] = model.community_sizes()[r];
    sys.total = sys.sizes.sum();
    sys.weighted_variance = blocks.variance * sys.sizes.asDiagonal();
    sys.weighted_expectation = blocks.expectation * sys.sizes.asDiagonal();
    return sys;
}

Eigen::VectorXcd resolvent_map(const ResolventSystem& sys, Complex z, const Eigen::VectorXcd& t) {
    const Eigen::VectorXcd coupling = sys.weighted_variance.cast<Complex>() * t;
    Eigen::VectorXcd out(t.size());
    for (Eigen::Index r = 0; r < t.size(); ++r) {
        const Complex denom = z - 1.0 - coupling[r];
        if (std::abs(denom) < kSingularDenominator)
            throw SingularPointError("resolvent denominator vanished at block " + std::to_string(r));
        out[r] = 1.0 / denom;
    }
    return out;
}

Eigen::MatrixXcd resolvent_jacobian(const ResolventSystem& sys, Complex z, const Eigen::VectorXcd& t) {
    const Eigen::VectorXcd f = resolvent_map(sys, z, t);
    return f.array().square().matrix().asDiagonal() * sys.weighted_variance.cast<Complex>();
}

double spectral_radius(const Eigen::MatrixXcd& m) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(m, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

StieltjesState fixed_point(const ResolventSystem& sys, Complex z, const Eigen::VectorXcd& t0,
                           const FixedPointOptions& opts) {
    const auto k = static_cast<Eigen::Index>(sys.num_blocks());
    if (t0.size() != k) throw InvalidArgument("initial t has the wrong number of blocks");
    const Eigen::MatrixXcd w = sys.weighted_variance.cast<Complex>();
    const Eigen::MatrixXcd identity = Eigen::MatrixXcd::Identity(k, k);
    const bool upper = z.imag() > 0.0;

    StieltjesState st;
    st.z = z;
    Eigen::VectorXcd t = t0;
    double prev = INFINITY;
    double res = INFINITY;
    for (int it = 0; it < opts.max_iters; ++it) {
        const Eigen::VectorXcd f = resolvent_map(sys, z, t);
        res = max_norm(t - f);
        st.iterations = it + 1;
        if (res <= opts.tol) {
            st.t = t;
            st.residual = res;
            return st;
        }
        if (opts.newton) {
            const Eigen::MatrixXcd jac = f.array().square().matrix().asDiagonal() * w;
            const Eigen::VectorXcd candidate = t - (identity - jac).partialPivLu().solve(t - f);
            if (all_finite(candidate) && (!upper || in_lower_half_plane(candidate))) {
                try {
                    const double cres = max_norm(candidate - resolvent_map(sys, z, candidate));
                    if (cres < res) {
                        t = candidate;
                        prev = res;
                        continue;
                    }
                } catch (const SingularPointError&) {
                }
            }
        }
        if (res > prev) st.damped = true;
        t = st.damped ? Eigen::VectorXcd((1.0 - opts.damping) * t + opts.damping * f) : f;
        prev = res;
    }
    throw ConvergenceError("resolvent fixed point did not converge", opts.max_iters, res);
}

StieltjesState fixed_point(const sbm::SbmModel& model, Complex z, const Eigen::VectorXcd& t0,
                           const FixedPointOptions& opts) {
    return fixed_point(ResolventSystem::from_model(model), z, t0, opts);
}

namespace {

// Solve at z = lambda + i*eta by walking eta down from 1.
Eigen::VectorXcd solve_by_continuation(const ResolventSystem& sys, double lambda, double eta,
                                       const FixedPointOptions& opts, long& iterations) {
    double h = std::max(1.0, eta);
    Eigen::VectorXcd t = free_resolvent(sys.num_blocks(), Complex(lambda, h));
    while (true) {
        const auto st = fixed_point(sys, Complex(lambda, h), t, opts);
        iterations += st.iterations;
        t = st.t;
        if (h <= eta) return t;
        h = std::max(eta, h / 10.0);
    }
}

}  // namespace

DensityResult bulk_density(const ResolventSystem& sys, std::span<const double> grid, double eta,
                           const FixedPointOptions& opts) {
    if (!(eta > 0.0)) throw InvalidArgument("eta must be positive");
    DensityResult out;
    out.grid.assign(grid.begin(), grid.end());
    out.density.resize(grid.size());
    bool warm = false;
    Eigen::VectorXcd t;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Complex z(grid[i], eta);
        bool ok = false;
        if (warm) {
            try {
                const auto st = fixed_point(sys, z, t, opts);
                out.iterations += st.iterations;
                out.max_residual = std::max(out.max_residual, st.residual);
                t = st.t;
                ok = true;
            } catch (const Error&) {
            }
        }
        if (!ok) {
            try {
                t = solve_by_continuation(sys, grid[i], eta, opts, out.iterations);
                ok = true;
            } catch (const Error&) {
            }
        }
        warm = ok;
        if (!ok) {
            out.failed_points.push_back(static_cast<int>(i));
            out.density[i] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        double acc = 0.0;
        for (Eigen::Index r = 0; r < t.size(); ++r) acc += sys.sizes[r] * t[r].imag();
        const double rho = -acc / (sys.total * std::numbers::pi);
        out.min_raw_density = std::min(out.min_raw_density, rho);
        out.density[i] = std::max(0.0, rho);
    }
    return out;
}

DensityResult bulk_density(const sbm::SbmModel& model, std::span<const double> grid, double eta,
                           const FixedPointOptions& opts) {
    return bulk_density(ResolventSystem::from_model(model), grid, eta, opts);
}

namespace {

bool stable_at(const ResolventSystem& sys, double z, const Eigen::VectorXcd& t) {
    for (Eigen::Index r = 0; r < t.size(); ++r)
        if (t[r].imag() != 0.0) return false;
    return spectral_radius(resolvent_jacobian(sys, z, t)) < 1.0;
}

// Real solution on the stable branch at real z, warm-started from `t`.
// Newton first; if it lands on the unstable branch or fails, fall back to
// plain iteration, which can only settle on an attracting fixed point.
bool solve_stable_real(const ResolventSystem& sys, double z, Eigen::VectorXcd& t) {
    FixedPointOptions newton;
    newton.max_iters = 100;
    newton.tol = 1e-13;
    try {
        const auto st = fixed_point(sys, Complex(z, 0.0), t, newton);
        if (stable_at(sys, z, st.t)) {
            t = st.t;
            return true;
        }
    } catch (const Error&) {
    }

    constexpr int kPlainIters = 200000;
    Eigen::VectorXcd u = t;
    try {
        for (int it = 0; it < kPlainIters; ++it) {
            const Eigen::VectorXcd f = resolvent_map(sys, Complex(z, 0.0), u);
            const double res = max_norm(u - f);
            u = f;
            if (res < 1e-9) {
                const auto st = fixed_point(sys, Complex(z, 0.0), u, newton);
                if (!stable_at(sys, z, st.t)) return false;
                t = st.t;
                return true;
            }
        }
    } catch (const Error&) {
    }
    return false;
}

std::string window_text(const SupportOptions& o) {
    std::ostringstream s;
    s << '[' << o.window_lo << ", " << o.window_hi << ']';
    return s.str();
}

}  // namespace

Support support_boundaries(const ResolventSystem& sys, const SupportOptions& opts) {
    Support out;
    if (sys.zero_variance()) {
        out.degenerate = true;
        return out;
    }
    const int k = sys.num_blocks();

    Eigen::VectorXcd t = free_resolvent(k, opts.window_lo);
    if (!solve_stable_real(sys, opts.window_lo, t))
        throw Error("left support edge not bracketed in scan window " + window_text(opts));
    double outside = opts.window_lo, inside = 1.0;
    while (inside - outside > opts.tol) {
        const double mid = 0.5 * (outside + inside);
        Eigen::VectorXcd trial = t;
        if (solve_stable_real(sys, mid, trial)) {
            outside = mid;
            t = trial;
        } else {
            inside = mid;
        }
    }
    out.lambda_left = outside;

    t = free_resolvent(k, opts.window_hi);
    if (!solve_stable_real(sys, opts.window_hi, t))
        throw Error("right support edge not bracketed in scan window " + window_text(opts));
    outside = opts.window_hi;
    inside = 1.0;
    while (outside - inside > opts.tol) {
        const double mid = 0.5 * (outside + inside);
        Eigen::VectorXcd trial = t;
        if (solve_stable_real(sys, mid, trial)) {
            outside = mid;
            t = trial;
        } else {
            inside = mid;
        }
    }
    out.lambda_right = outside;
    return out;
}

Support support_boundaries(const sbm::SbmModel& model, const SupportOptions& opts) {
    return support_boundaries(ResolventSystem::from_model(model), opts);
}

namespace {

// Sorted eigenvalues kappa_k of T(z) E N, shifted by one; a zero of
// entry k is an isolated eigenvalue. When all t_r share a sign the matrix
// is similar to a symmetric one, so the branches are real and continuous.
Eigen::VectorXd branch_values(const ResolventSystem& sys, const Eigen::VectorXcd& t) {
    const auto k = t.size();
    Eigen::VectorXd tr(k);
    for (Eigen::Index r = 0; r < k; ++r) tr[r] = t[r].real();
    const bool all_neg = (tr.array() < 0.0).all();
    const bool all_pos = (tr.array() > 0.0).all();
    Eigen::VectorXd kappa(k);
    if (all_neg || all_pos) {
        // E N = E diag(n), E = weighted_expectation * diag(1/n)
        const Eigen::VectorXd a = (tr.cwiseAbs().array() * sys.sizes.array()).sqrt().matrix();
        const Eigen::MatrixXd e = sys.weighted_expectation * sys.sizes.cwiseInverse().asDiagonal();
        const Eigen::MatrixXd sym = a.asDiagonal() * e * a.asDiagonal();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (sym + sym.transpose()), Eigen::EigenvaluesOnly);
        kappa = (all_neg ? -1.0 : 1.0) * es.eigenvalues();
    } else {
        const Eigen::MatrixXd m = tr.asDiagonal() * sys.weighted_expectation;
        Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
        kappa = es.eigenvalues().real();
    }
    std::sort(kappa.data(), kappa.data() + k);
    return kappa.array() + 1.0;
}

struct ScanPoint {
    double z;
    Eigen::VectorXcd t;
    Eigen::VectorXd f;
};

double refine_root(const ResolventSystem& sys, const ScanPoint& a, const ScanPoint& b, Eigen::Index branch,
                   double tol) {
    double lo = a.z, hi = b.z;
    double flo = a.f[branch];
    Eigen::VectorXcd t = a.t;
    while (std::abs(hi - lo) > tol) {
        const double mid = 0.5 * (lo + hi);
        Eigen::VectorXcd trial = t;
        if (!solve_stable_real(sys, mid, trial)) break;
        const double fm = branch_values(sys, trial)[branch];
        if (fm == 0.0) return mid;
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
            t = trial;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// Walks z from `from` towards `to` (exclusive of the bulk) and collects roots.
void scan_segment(const ResolventSystem& sys, double from, double to, const IsolatedOptions& opts,
                  std::vector<double>& roots) {
    const double dir = to > from ? 1.0 : -1.0;
    const double span = std::abs(to - from);
    if (span <= 0.0) return;
    const int steps = static_cast<int>(std::ceil(span / opts.scan_step));

    std::vector<ScanPoint> pts;
    Eigen::VectorXcd t = free_resolvent(sys.num_blocks(), from);
    for (int s = 0; s <= steps; ++s) {
        const double z = s == steps ? to : from + dir * s * opts.scan_step;
        if (!solve_stable_real(sys, z, t)) break;
        pts.push_back({z, t, branch_values(sys, t)});
    }
    if (pts.empty()) return;
    const auto k = pts.front().f.size();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (Eigen::Index b = 0; b < k; ++b) {
            const double fi = pts[i].f[b];
            if (fi == 0.0) {
                roots.push_back(pts[i].z);
                continue;
            }
            if (i + 1 < pts.size()) {
                const double fj = pts[i + 1].f[b];
                if (fj != 0.0 && (fi < 0.0) != (fj < 0.0)) {
                    roots.push_back(refine_root(sys, pts[i], pts[i + 1], b, opts.tol));
                    continue;
                }
            }
            // Touching root: tiny local minimum of |f| without a sign change.
            if (i > 0 && i + 1 < pts.size() && std::abs(fi) < opts.double_root_tol &&
                std::abs(fi) <= std::abs(pts[i - 1].f[b]) && std::abs(fi) <= std::abs(pts[i + 1].f[b]) &&
                (pts[i - 1].f[b] < 0.0) == (fi < 0.0) && (pts[i + 1].f[b] < 0.0) == (fi < 0.0)) {
                roots.push_back(pts[i].z);
                roots.push_back(pts[i].z);
            }
        }
    }
}

}  // namespace

std::vector<double> isolated_eigenvalues(const ResolventSystem& sys, const Support& support,
                                         const IsolatedOptions& opts) {
    // Stop just short of the edges; the stable branch ends there.
    const double edge_gap = support.degenerate ? opts.scan_step : 1e-7;
    std::vector<double> roots;
    const double left_end = support.lambda_left - edge_gap;
    if (left_end > opts.window_lo) scan_segment(sys, opts.window_lo, left_end, opts, roots);
    const double right_end = support.lambda_right + edge_gap;
    if (right_end < opts.window_hi) scan_segment(sys, opts.window_hi, right_end, opts, roots);
    std::sort(roots.begin(), roots.end());
    return roots;
}

std::vector<double> isolated_eigenvalues(const sbm::SbmModel& model, const Support& support,
                                         const IsolatedOptions& opts) {
    return isolated_eigenvalues(ResolventSystem::from_model(model), support, opts);
}

SpectralPrediction predict(const sbm::SbmModel& model, const PredictOptions& opts) {
    const auto sys = ResolventSystem::from_model(model);
    SpectralPrediction out;
    out.support = support_boundaries(sys, opts.support);
    out.isolated = isolated_eigenvalues(sys, out.support, opts.isolated);

    // The smallest root stands in for the trivial eigenvalue at zero.
    const double left = out.support.lambda_left;
    if (out.isolated.size() >= 2 && out.isolated[1] < left) {
        out.predicted_lambda2 = out.isolated[1];
        out.lambda2_merged = false;
    } else {
        out.predicted_lambda2 = left;
        out.lambda2_merged = true;
    }

    const auto& g = opts.grid;
    out.diagnostics.eta = g.eta;
    if (g.points > 0) {
        const double width = out.support.lambda_right - out.support.lambda_left;
        const double margin = width > 0.0 ? 0.1 * width : 0.05;
        const double lo = std::isnan(g.lo) ? out.support.lambda_left - margin : g.lo;
        const double hi = std::isnan(g.hi) ? out.support.lambda_right + margin : g.hi;
        std::vector<double> grid(g.points);
        for (int i = 0; i < g.points; ++i)
            grid[i] = g.points == 1 ? lo : lo + (hi - lo) * i / (g.points - 1);
        auto dens = bulk_density(sys, grid, g.eta, opts.fixed_point);
        out.grid = std::move(dens.grid);
        out.density = std::move(dens.density);
        out.diagnostics.failed_points = std::move(dens.failed_points);
        out.diagnostics.max_residual = dens.max_residual;
        out.diagnostics.iterations = dens.iterations;
        out.diagnostics.min_raw_density = dens.min_raw_density;
    }
    return out;
}

std::string prediction_json(const SpectralPrediction& p) {
    nlohmann::json j;
    j["grid"] = p.grid;
    auto& dens = j["density"] = nlohmann::json::array();
    for (double d : p.density) dens.push_back(std::isnan(d) ? nlohmann::json(nullptr) : nlohmann::json(d));
    j["lambdaL"] = p.support.lambda_left;
    j["lambdaR"] = p.support.lambda_right;
    j["degenerate_support"] = p.support.degenerate;
    j["isolated"] = p.isolated;
    j["predicted_lambda2"] = p.predicted_lambda2;
    j["lambda2_merged"] = p.lambda2_merged;
    j["diagnostics"] = {{"failed_points", p.diagnostics.failed_points},
                        {"max_residual", p.diagnostics.max_residual},
                        {"iterations", p.diagnostics.iterations},
                        {"min_raw_density", p.diagnostics.min_raw_density},
                        {"eta", p.diagnostics.eta}};
    return j.dump(2);
}

std::string prediction_csv(const SpectralPrediction& p) {
    std::ostringstream out;
    out << "lambda,density\n";
    for (std::size_t i = 0; i < p.grid.size(); ++i)
        out << format_double(p.grid[i]) << ',' << format_double(p.density[i]) << '\n';
    return out.str();
}

}  // namespace blockcons::rmt
