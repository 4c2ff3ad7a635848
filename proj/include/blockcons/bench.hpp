#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blockcons/gossip.hpp"
#include "blockcons/rmt.hpp"

namespace blockcons::bench {

enum class SweepMode { Scalar, Gadget };

/// Training data for gadget sweeps: a sparse-text file, or synthetic blobs
/// when `path` is empty.
struct DatasetRef {
    std::string path;
    std::size_t blob_examples = 10000;
    std::size_t blob_dim = 20;
    double blob_margin = 0.5;
    double test_fraction = 0.2;
};

struct SweepConfig {
    std::vector<int> sizes;
    double p_in = 0.1;
    std::vector<double> p_out_list;
    int seeds_per_point = 5;
    double epsilon = 1e-10;
    SweepMode mode = SweepMode::Scalar;
    std::uint64_t seed = 1;
    long max_rounds = 100000;
    int threads = 0;  // 0: hardware concurrency
    /// Above this many nodes lambda2 comes from Lanczos instead of a dense solve.
    int dense_limit = 2000;
    int max_resample = 100;
    DatasetRef dataset;
    gossip::GadgetConfig gadget;  // epsilon/max_rounds/seed are overridden per run
    rmt::PredictOptions predict;  // grid.points defaults to 0 here: no density
    std::string out_dir;

    SweepConfig() { predict.grid.points = 0; }
    void validate() const;
};

struct SweepRow {
    double delta = 0.0;  // p_in - p_out
    double p_out = 0.0;
    double tau_median = 0.0;
    double tau_iqr = 0.0;
    double lambda2_emp = 0.0;    // mean over the sampled networks
    double lambda2_pred = 0.0;
    double lambdaL = 0.0;
    int censored = 0;            // runs that hit max_rounds
    int runs = 0;                // runs that produced a tau
    double accuracy_median = 0.0;  // gadget mode only
    std::vector<double> taus;
    std::vector<std::uint64_t> seeds;  // network seed actually used per run
    std::string error;           // empty when every run succeeded
};

/// `count` points geometrically spaced over [lo, hi], endpoints included.
std::vector<double> log_space(double lo, double hi, int count);

/// Runs every p_out point on a bounded worker pool. `on_row` sees the rows
/// in config order as soon as each prefix is complete. Per-point failures
/// land in SweepRow::error.
std::vector<SweepRow> sweep(const SweepConfig& cfg, const std::function<void(const SweepRow&)>& on_row = {});

/// Loads or synthesizes the gadget training/test split.
std::pair<data::LabeledDataset, data::LabeledDataset> load_dataset(const SweepConfig& cfg);

void write_rows_header(std::ostream& out);
void write_row(const SweepRow& row, std::ostream& out);
void write_rows_csv(std::span<const SweepRow> rows, std::ostream& out);
/// Reads the columns written by write_rows_csv back into rows.
std::vector<SweepRow> read_rows_csv(std::istream& in);

std::string sweep_config_json(const SweepConfig& cfg);
/// Config, tool version and per-row seeds. The timestamp lives only here.
std::string sweep_sidecar_json(const SweepConfig& cfg, std::span<const SweepRow> rows);

struct ReciprocalFit {
    double a = 0.0;
    double c = 0.0;
    double rss = 0.0;
    double r2 = 0.0;
    int points = 0;
};

/// Least squares for y = a / (c - x). With a fixed pole this is a linear
/// fit through the origin in 1/(c - x); otherwise c is searched on a log
/// scale right of the data and then refined by golden section.
ReciprocalFit fit_reciprocal(std::span<const double> x, std::span<const double> y,
                             std::optional<double> fix_pole = std::nullopt);
/// Uses uncensored, error-free rows: x = delta, y = tau_median.
ReciprocalFit fit_reciprocal(std::span<const SweepRow> rows, std::optional<double> fix_pole = std::nullopt);
/// tau_median = b / lambda2_pred, i.e. the reciprocal form in -lambda2 with pole 0.
ReciprocalFit fit_inverse_lambda2(std::span<const SweepRow> rows);

std::string fit_json(const ReciprocalFit& fit, std::optional<double> fix_pole);

struct Bifurcation {
    bool in_range = false;
    double delta1_star = 0.0;  // NaN when out of range
    std::string status;        // "ok", "all_merged" or "all_separated"
    std::vector<double> deltas;
    std::vector<double> lambda2_pred;
    std::vector<double> lambdaL;
    std::vector<bool> merged;
};

/// Largest delta on the grid whose predicted lambda2 sits on the bulk edge,
/// refined by bisection against the next (separated) grid point.
Bifurcation detect_bifurcation(const std::vector<int>& sizes, double p_in, std::vector<double> deltas,
                               double tol = 1e-4, rmt::PredictOptions opts = {});

std::string bifurcation_json(const Bifurcation& b);

}  // namespace blockcons::bench
