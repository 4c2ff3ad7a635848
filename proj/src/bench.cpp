#include "blockcons/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <ctime>
#include <istream>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "blockcons/consensus.hpp"
#include "blockcons/error.hpp"
#include "blockcons/format.hpp"
#include "blockcons/random.hpp"
#include "blockcons/spectra.hpp"
#include "blockcons/stats.hpp"
#include "json.hpp"

namespace blockcons::bench {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

void SweepConfig::validate() const {
    if (sizes.empty()) throw InvalidArgument("sizes must not be empty");
    for (int s : sizes)
        if (s < 1) throw InvalidArgument("community sizes must be >= 1");
    if (!(p_in > 0.0 && p_in <= 1.0)) throw InvalidArgument("p_in must lie in (0, 1]");
    if (p_out_list.empty()) throw InvalidArgument("p_out list is empty");
    for (double p : p_out_list)
        if (!(p > 0.0 && p <= p_in)) throw InvalidArgument("p_out values must lie in (0, p_in]");
    if (seeds_per_point < 1) throw InvalidArgument("seeds_per_point must be >= 1");
    if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
    if (max_rounds < 1) throw InvalidArgument("max_rounds must be >= 1");
    if (mode == SweepMode::Gadget) gadget.validate();
}

std::vector<double> log_space(double lo, double hi, int count) {
    if (!(lo > 0.0 && hi > 0.0)) throw InvalidArgument("log_space needs positive endpoints");
    if (count < 1) throw InvalidArgument("log_space needs at least one point");
    if (count == 1) return {lo};
    std::vector<double> out(count);
    const double a = std::log(lo), b = std::log(hi);
    for (int i = 0; i < count; ++i) out[i] = std::exp(a + (b - a) * i / (count - 1));
    out.front() = lo;
    out.back() = hi;
    return out;
}

std::pair<data::LabeledDataset, data::LabeledDataset> load_dataset(const SweepConfig& cfg) {
    const auto& ref = cfg.dataset;
    data::LabeledDataset all = ref.path.empty()
                                   ? data::make_blobs(ref.blob_examples, ref.blob_dim, ref.blob_margin,
                                                      child_seed(cfg.seed, 0xB10B))
                                   : data::load_sparse_text(ref.path);
    return data::train_test_split(all, ref.test_fraction, child_seed(cfg.seed, 0x5917));
}

namespace {

struct GadgetInputs {
    data::LabeledDataset train, test;
};

sbm::Network connected_sample(const sbm::SbmModel& model, std::uint64_t seed, int max_attempts,
                              std::uint64_t& used) {
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        used = attempt == 0 ? seed : child_seed(seed, 0xC0, attempt);
        auto net = sbm::sample(model.with_seed(used));
        if (sbm::is_connected(net)) return net;
    }
    throw DisconnectedError("no connected network after " + std::to_string(max_attempts) + " draws");
}

double empirical_lambda2(const sbm::Network& net, int dense_limit) {
    if (net.num_nodes() <= dense_limit) return spectra::normalized_laplacian_spectrum(net).lambda2;
    return spectra::lambda2_only(net, 1e-9);
}

void note(std::string& err, const std::string& what) {
    if (!err.empty()) err += "; ";
    err += what;
}

SweepRow run_point(const SweepConfig& cfg, std::size_t idx, const GadgetInputs* inputs) {
    SweepRow row;
    row.p_out = cfg.p_out_list[idx];
    row.delta = cfg.p_in - row.p_out;
    row.lambda2_pred = row.lambdaL = row.lambda2_emp = kNaN;

    const auto model = sbm::make_two_level_model(cfg.sizes, {cfg.p_in, row.p_out}, 0);
    try {
        const auto pred = rmt::predict(model, cfg.predict);
        row.lambda2_pred = pred.predicted_lambda2;
        row.lambdaL = pred.support.lambda_left;
    } catch (const Error& e) {
        note(row.error, std::string("predict: ") + e.what());
    }

    std::vector<double> lambdas, accs;
    for (int s = 0; s < cfg.seeds_per_point; ++s) {
        try {
            std::uint64_t used = 0;
            const auto net = connected_sample(model, child_seed(cfg.seed, idx, s), cfg.max_resample, used);
            row.seeds.push_back(used);
            lambdas.push_back(empirical_lambda2(net, cfg.dense_limit));
            if (cfg.mode == SweepMode::Scalar) {
                const auto x0 = consensus::uniform_initial_state(net.num_nodes(), child_seed(used, 0x10));
                const auto r = consensus::run(net, x0, cfg.epsilon, {cfg.max_rounds, 50});
                row.taus.push_back(static_cast<double>(r.tau_eps));
                row.censored += r.censored;
            } else {
                auto g = cfg.gadget;
                g.epsilon = cfg.epsilon;
                g.max_rounds = cfg.max_rounds;
                g.seed = child_seed(used, 0x20);
                const auto r = gossip::run_gadget(net, inputs->train, inputs->test, g);
                row.taus.push_back(static_cast<double>(r.rounds_to_consensus));
                row.censored += r.censored;
                accs.push_back(r.final_accuracy);
            }
        } catch (const Error& e) {
            note(row.error, "seed " + std::to_string(s) + ": " + e.what());
        }
    }
    row.runs = static_cast<int>(row.taus.size());
    row.tau_median = row.taus.empty() ? kNaN : stats::median(row.taus);
    row.tau_iqr = row.taus.empty() ? kNaN : stats::iqr(row.taus);
    row.lambda2_emp = lambdas.empty() ? kNaN : stats::mean(lambdas);
    row.accuracy_median = accs.empty() ? kNaN : stats::median(accs);
    return row;
}

}  // namespace

std::vector<SweepRow> sweep(const SweepConfig& cfg, const std::function<void(const SweepRow&)>& on_row) {
    cfg.validate();
    std::optional<GadgetInputs> inputs;
    if (cfg.mode == SweepMode::Gadget) {
        auto [train, test] = load_dataset(cfg);
        inputs = GadgetInputs{std::move(train), std::move(test)};
    }

    const std::size_t jobs = cfg.p_out_list.size();
    std::size_t workers = cfg.threads > 0 ? static_cast<std::size_t>(cfg.threads)
                                          : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, jobs);

    std::vector<std::optional<SweepRow>> done(jobs);
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::size_t emitted = 0;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs) return;
            SweepRow row = run_point(cfg, i, inputs ? &*inputs : nullptr);
            std::lock_guard lock(mu);
            done[i] = std::move(row);
            // Flush the completed prefix in config order.
            while (emitted < jobs && done[emitted]) {
                if (on_row) on_row(*done[emitted]);
                ++emitted;
            }
        }
    };

    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::vector<SweepRow> rows;
    rows.reserve(jobs);
    for (auto& r : done) rows.push_back(std::move(*r));
    return rows;
}

void write_rows_header(std::ostream& out) {
    out << "delta,p_out,tau_median,tau_iqr,lambda2_emp,lambda2_pred,lambdaL,censored\n";
}

void write_row(const SweepRow& r, std::ostream& out) {
    out << format_double(r.delta) << ',' << format_double(r.p_out) << ',' << format_double(r.tau_median) << ','
        << format_double(r.tau_iqr) << ',' << format_double(r.lambda2_emp) << ',' << format_double(r.lambda2_pred)
        << ',' << format_double(r.lambdaL) << ',' << r.censored << '\n';
}

void write_rows_csv(std::span<const SweepRow> rows, std::ostream& out) {
    write_rows_header(out);
    for (const auto& r : rows) write_row(r, out);
}

std::vector<SweepRow> read_rows_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty rows file", 1);
    if (line.rfind("delta,p_out,tau_median", 0) != 0) throw ParseError("unexpected rows header", 1);
    std::vector<SweepRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 8) throw ParseError("expected 8 columns", lineno);
        auto num = [&](const std::string& s) {
            char* end = nullptr;
            const double v = std::strtod(s.c_str(), &end);
            if (end == s.c_str() || *end != '\0') throw ParseError("bad number '" + s + "'", lineno);
            return v;
        };
        SweepRow r;
        r.delta = num(cells[0]);
        r.p_out = num(cells[1]);
        r.tau_median = num(cells[2]);
        r.tau_iqr = num(cells[3]);
        r.lambda2_emp = num(cells[4]);
        r.lambda2_pred = num(cells[5]);
        r.lambdaL = num(cells[6]);
        r.censored = static_cast<int>(num(cells[7]));
        rows.push_back(std::move(r));
    }
    return rows;
}

namespace {

nlohmann::json config_object(const SweepConfig& cfg) {
    nlohmann::json j = {{"sizes", cfg.sizes},
                        {"p_in", cfg.p_in},
                        {"p_out_list", cfg.p_out_list},
                        {"seeds_per_point", cfg.seeds_per_point},
                        {"epsilon", cfg.epsilon},
                        {"mode", cfg.mode == SweepMode::Scalar ? "scalar" : "gadget"},
                        {"seed", cfg.seed},
                        {"max_rounds", cfg.max_rounds},
                        {"dense_limit", cfg.dense_limit}};
    if (cfg.mode == SweepMode::Gadget) {
        j["gadget"] = nlohmann::json::parse(gossip::config_json(cfg.gadget));
        j["dataset"] = {{"path", cfg.dataset.path},
                        {"blob_examples", cfg.dataset.blob_examples},
                        {"blob_dim", cfg.dataset.blob_dim},
                        {"blob_margin", cfg.dataset.blob_margin},
                        {"test_fraction", cfg.dataset.test_fraction}};
    }
    return j;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

std::string sweep_config_json(const SweepConfig& cfg) { return config_object(cfg).dump(); }

std::string sweep_sidecar_json(const SweepConfig& cfg, std::span<const SweepRow> rows) {
    nlohmann::json j;
    j["config"] = config_object(cfg);
    j["version"] = BLOCKCONS_VERSION;
    j["generated_at"] = utc_timestamp();
    auto& out = j["rows"] = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json jr = {{"p_out", r.p_out}, {"seeds", r.seeds}, {"taus", r.taus}, {"runs", r.runs},
                             {"censored", r.censored}};
        if (cfg.mode == SweepMode::Gadget && !std::isnan(r.accuracy_median)) jr["accuracy_median"] = r.accuracy_median;
        if (!r.error.empty()) jr["error"] = r.error;
        out.push_back(std::move(jr));
    }
    return j.dump(2);
}

namespace {

// Best a for a fixed pole and the resulting residual sum of squares.
std::pair<double, double> solve_fixed(std::span<const double> x, std::span<const double> y, double c) {
    double su = 0.0, suy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double u = 1.0 / (c - x[i]);
        su += u * u;
        suy += u * y[i];
    }
    const double a = suy / su;
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - a / (c - x[i]);
        rss += r * r;
    }
    return {a, rss};
}

ReciprocalFit finish(std::span<const double> y, double a, double c, double rss) {
    const double ybar = stats::mean(y);
    double tss = 0.0;
    for (double v : y) tss += (v - ybar) * (v - ybar);
    ReciprocalFit f;
    f.a = a;
    f.c = c;
    f.rss = rss;
    f.r2 = tss > 0.0 ? 1.0 - rss / tss : (rss == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity());
    f.points = static_cast<int>(y.size());
    return f;
}

}  // namespace

ReciprocalFit fit_reciprocal(std::span<const double> x, std::span<const double> y, std::optional<double> fix_pole) {
    if (x.size() != y.size()) throw InvalidArgument("fit: x and y lengths differ");
    if (x.size() < 3) throw InvalidArgument("fit needs at least 3 uncensored rows");
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw InvalidArgument("fit: non-finite data");
    const double xmax = *std::max_element(x.begin(), x.end());
    const double xmin = *std::min_element(x.begin(), x.end());

    if (fix_pole) {
        if (!(*fix_pole > xmax)) throw InvalidArgument("pole lies inside the data range");
        const auto [a, rss] = solve_fixed(x, y, *fix_pole);
        return finish(y, a, *fix_pole, rss);
    }

    // Coarse scan of the gap g = c - xmax on a log scale, then golden section
    // between the neighbors of the best scan point.
    const double width = xmax > xmin ? xmax - xmin : std::max(1.0, std::abs(xmax));
    const int scan = 400;
    const double glo = 1e-6 * width, ghi = 1e4 * width;
    std::vector<double> gaps = log_space(glo, ghi, scan);
    std::size_t best = 0;
    double best_rss = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < gaps.size(); ++k) {
        const double rss = solve_fixed(x, y, xmax + gaps[k]).second;
        if (rss < best_rss) {
            best_rss = rss;
            best = k;
        }
    }
    double lo = std::log(gaps[best == 0 ? 0 : best - 1]);
    double hi = std::log(gaps[std::min(best + 1, gaps.size() - 1)]);
    auto rss_at = [&](double lg) { return solve_fixed(x, y, xmax + std::exp(lg)).second; };
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double m1 = hi - phi * (hi - lo), m2 = lo + phi * (hi - lo);
    double f1 = rss_at(m1), f2 = rss_at(m2);
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
        if (f1 < f2) {
            hi = m2;
            m2 = m1;
            f2 = f1;
            m1 = hi - phi * (hi - lo);
            f1 = rss_at(m1);
        } else {
            lo = m1;
            m1 = m2;
            f1 = f2;
            m2 = lo + phi * (hi - lo);
            f2 = rss_at(m2);
        }
    }
    const double c = xmax + std::exp(0.5 * (lo + hi));
    const auto [a, rss] = solve_fixed(x, y, c);
    if (rss <= best_rss) return finish(y, a, c, rss);
    const double cb = xmax + gaps[best];
    const auto [ab, rssb] = solve_fixed(x, y, cb);
    return finish(y, ab, cb, rssb);
}

namespace {

bool usable(const SweepRow& r) {
    return r.censored == 0 && r.error.empty() && std::isfinite(r.tau_median) && std::isfinite(r.delta);
}

}  // namespace

ReciprocalFit fit_reciprocal(std::span<const SweepRow> rows, std::optional<double> fix_pole) {
    std::vector<double> x, y;
    for (const auto& r : rows)
        if (usable(r)) {
            x.push_back(r.delta);
            y.push_back(r.tau_median);
        }
    return fit_reciprocal(x, y, fix_pole);
}

ReciprocalFit fit_inverse_lambda2(std::span<const SweepRow> rows) {
    std::vector<double> x, y;
    for (const auto& r : rows)
        if (usable(r) && std::isfinite(r.lambda2_pred) && r.lambda2_pred > 0.0) {
            x.push_back(-r.lambda2_pred);
            y.push_back(r.tau_median);
        }
    return fit_reciprocal(x, y, 0.0);
}

std::string fit_json(const ReciprocalFit& fit, std::optional<double> fix_pole) {
    nlohmann::json j = {{"a", fit.a},
                        {"c", fit.c},
                        {"rss", fit.rss},
                        {"r2", fit.r2},
                        {"points", fit.points},
                        {"pole_fixed", fix_pole.has_value()}};
    return j.dump(2);
}

Bifurcation detect_bifurcation(const std::vector<int>& sizes, double p_in, std::vector<double> deltas, double tol,
                               rmt::PredictOptions opts) {
    if (deltas.empty()) throw InvalidArgument("empty delta grid");
    if (!(tol > 0.0)) throw InvalidArgument("tolerance must be positive");
    std::sort(deltas.begin(), deltas.end());
    deltas.erase(std::unique(deltas.begin(), deltas.end()), deltas.end());
    for (double d : deltas)
        if (!(d >= 0.0 && d < p_in)) throw InvalidArgument("delta grid must lie in [0, p_in)");
    opts.grid.points = 0;

    auto eval = [&](double delta) {
        const auto model = sbm::make_two_level_model(sizes, {p_in, p_in - delta}, 0);
        return rmt::predict(model, opts);
    };

    Bifurcation out;
    out.deltas = deltas;
    for (double d : deltas) {
        const auto p = eval(d);
        out.lambda2_pred.push_back(p.predicted_lambda2);
        out.lambdaL.push_back(p.support.lambda_left);
        out.merged.push_back(p.lambda2_merged);
    }

    // Last merged point that is followed by a separated one.
    std::optional<std::size_t> k;
    for (std::size_t i = 0; i + 1 < deltas.size(); ++i)
        if (out.merged[i] && !out.merged[i + 1]) k = i;
    if (!k) {
        out.in_range = false;
        out.delta1_star = kNaN;
        const bool any_merged = std::any_of(out.merged.begin(), out.merged.end(), [](bool m) { return m; });
        out.status = any_merged ? "all_merged" : "all_separated";
        return out;
    }
    double lo = deltas[*k], hi = deltas[*k + 1];
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (eval(mid).lambda2_merged) lo = mid;
        else hi = mid;
    }
    out.in_range = true;
    out.delta1_star = lo;
    out.status = "ok";
    return out;
}

std::string bifurcation_json(const Bifurcation& b) {
    nlohmann::json j = {{"in_range", b.in_range},
                        {"status", b.status},
                        {"delta1_star", b.in_range ? nlohmann::json(b.delta1_star) : nlohmann::json(nullptr)},
                        {"deltas", b.deltas},
                        {"lambda2_pred", b.lambda2_pred},
                        {"lambdaL", b.lambdaL},
                        {"merged", b.merged}};
    return j.dump(2);
}

}  // namespace blockcons::bench
