#include "blockcons/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>

#include "CLI11.hpp"
#include "blockcons/bench.hpp"
#include "blockcons/consensus.hpp"
#include "blockcons/error.hpp"
#include "blockcons/gossip.hpp"
#include "blockcons/rmt.hpp"
#include "blockcons/sbm.hpp"
#include "blockcons/spectra.hpp"
#include "blockcons/stats.hpp"
#include "json.hpp"

namespace blockcons {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Bad config or flags: reported like a CLI usage error (exit 2).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

const std::vector<std::string> kModelKeys = {"sizes", "p_in", "p_out", "probs"};
const std::vector<std::string> kGadgetKeys = {"nu",           "learning_rounds", "steps_per_round",
                                              "adopt_each_round", "mixing",      "trace_every",
                                              "dataset",      "blob_examples",   "blob_dim",
                                              "blob_margin",  "test_fraction"};
const std::vector<std::string> kGridKeys = {"p_out_list", "p_out_min", "p_out_max", "p_out_count"};

std::map<std::string, std::vector<std::string>> subcommand_keys() {
    auto cat = [](std::initializer_list<std::vector<std::string>> parts) {
        std::vector<std::string> out;
        for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
        return out;
    };
    return {
        {"sample", cat({kModelKeys})},
        {"spectrum", cat({kModelKeys, {"edges", "bins"}})},
        {"predict", cat({kModelKeys, {"grid_points", "grid_lo", "grid_hi", "eta", "compare_empirical", "bins"}})},
        {"consensus", cat({kModelKeys, {"epsilon", "max_rounds", "trace"}})},
        {"gadget", cat({kModelKeys, kGadgetKeys, {"epsilon", "max_rounds"}})},
        {"sweep", cat({{"sizes", "p_in"}, kGridKeys, kGadgetKeys,
                       {"seeds_per_point", "epsilon", "max_rounds", "mode", "threads", "dense_limit"}})},
        {"fit", {"rows", "fix_pole", "inverse_lambda2"}},
        {"bifurcation", cat({{"sizes", "p_in", "tol"}, kGridKeys})},
    };
}

std::set<std::string> all_keys() {
    std::set<std::string> keys = {"seed", "description"};
    for (const auto& [_, ks] : subcommand_keys()) keys.insert(ks.begin(), ks.end());
    return keys;
}

std::string flag_name(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return "--" + key;
}

// Flag text is read as JSON when it parses (numbers, arrays, booleans),
// otherwise as a plain string.
json flag_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception&) {
        return text;
    }
}

class Settings {
  public:
    explicit Settings(json j) : j_(std::move(j)) {}

    bool has(const std::string& k) const { return j_.contains(k) && !j_[k].is_null(); }

    template <class T>
    T get(const std::string& k) const {
        if (!has(k)) throw UsageError("missing required setting '" + k + "'");
        try {
            return j_[k].get<T>();
        } catch (const json::exception&) {
            throw UsageError("setting '" + k + "' has the wrong type");
        }
    }

    template <class T>
    T get(const std::string& k, T fallback) const {
        return has(k) ? get<T>(k) : fallback;
    }

    const json& raw() const { return j_; }

  private:
    json j_;
};

sbm::SbmModel build_model(const Settings& s, std::uint64_t seed) {
    const auto sizes = s.get<std::vector<int>>("sizes");
    if (s.has("probs")) {
        const auto rows = s.get<std::vector<std::vector<double>>>("probs");
        Eigen::MatrixXd m(rows.size(), rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != rows.size()) throw UsageError("probs must be a square matrix");
            for (std::size_t c = 0; c < rows.size(); ++c) m(r, c) = rows[r][c];
        }
        return sbm::SbmModel(sizes, m, seed);
    }
    return sbm::make_two_level_model(sizes, {s.get<double>("p_in"), s.get<double>("p_out")}, seed);
}

std::vector<double> p_out_grid(const Settings& s) {
    if (s.has("p_out_list")) return s.get<std::vector<double>>("p_out_list");
    if (s.has("p_out_min") || s.has("p_out_max") || s.has("p_out_count"))
        return bench::log_space(s.get<double>("p_out_min"), s.get<double>("p_out_max"), s.get<int>("p_out_count"));
    throw UsageError("need p_out_list or p_out_min/p_out_max/p_out_count");
}

gossip::GadgetConfig gadget_config(const Settings& s) {
    gossip::GadgetConfig g;
    g.nu = s.get("nu", g.nu);
    g.epsilon = s.get("epsilon", g.epsilon);
    g.max_rounds = s.get("max_rounds", g.max_rounds);
    g.learning_rounds = s.get("learning_rounds", g.learning_rounds);
    g.steps_per_round = s.get("steps_per_round", g.steps_per_round);
    g.adopt_each_round = s.get("adopt_each_round", g.adopt_each_round);
    g.trace_every = s.get("trace_every", g.trace_every);
    const auto mixing = s.get<std::string>("mixing", "uniform_split");
    if (mixing == "uniform_split") g.mixing = gossip::Mixing::UniformSplit;
    else if (mixing == "neighbor_split") g.mixing = gossip::Mixing::NeighborSplit;
    else throw UsageError("mixing must be uniform_split or neighbor_split");
    return g;
}

bench::DatasetRef dataset_ref(const Settings& s) {
    bench::DatasetRef d;
    d.path = s.get<std::string>("dataset", "");
    d.blob_examples = s.get("blob_examples", d.blob_examples);
    d.blob_dim = s.get("blob_dim", d.blob_dim);
    d.blob_margin = s.get("blob_margin", d.blob_margin);
    d.test_fraction = s.get("test_fraction", d.test_fraction);
    return d;
}

std::ofstream open_out(const fs::path& dir, const std::string& name) {
    std::ofstream f(dir / name);
    if (!f) throw Error("cannot write " + (dir / name).string());
    return f;
}

void write_text(const fs::path& dir, const std::string& name, const std::string& text) {
    auto f = open_out(dir, name);
    f << text << '\n';
}

sbm::Network connected_network(const sbm::SbmModel& model) {
    for (int attempt = 0; attempt < 100; ++attempt) {
        const auto seed = attempt == 0 ? model.seed() : child_seed(model.seed(), 0xC0, attempt);
        auto net = sbm::sample(model.with_seed(seed));
        if (sbm::is_connected(net)) return net;
    }
    throw DisconnectedError("no connected network after 100 draws");
}

json spectrum_summary(const spectra::SpectrumEmpirical& sp) {
    return {{"n", sp.eigenvalues.size()},
            {"lambda2", sp.lambda2},
            {"lambda_max", sp.lambda_max},
            {"mu2_abs", sp.mu2_abs},
            {"mu2_positive", sp.mu2_positive}};
}

void dump_spectrum(const spectra::SpectrumEmpirical& sp, int bins, const fs::path& dir) {
    {
        auto f = open_out(dir, "spectrum.csv");
        spectra::write_spectrum_csv(sp, f);
    }
    const double lo = sp.eigenvalues.front(), hi = sp.eigenvalues.back();
    write_text(dir, "histogram.json", spectra::histogram_json(spectra::histogram(sp.eigenvalues, bins, lo, hi + 1e-12)));
    write_text(dir, "spectrum.json", spectrum_summary(sp).dump(2));
}

int cmd_sample(const Settings& s, std::uint64_t seed, const fs::path& dir, std::ostream& out) {
    const auto net = sbm::sample(build_model(s, seed));
    {
        auto f = open_out(dir, "network.edges");
        sbm::write_edge_list(net, f);
    }
    write_text(dir, "network.json", sbm::to_json(net));
    out << json{{"nodes", net.num_nodes()}, {"edges", net.num_edges()}, {"connected", sbm::is_connected(net)}}.dump()
        << '\n';
    return 0;
}

int cmd_spectrum(const Settings& s, std::uint64_t seed, const fs::path& dir, std::ostream& out) {
    auto load = [&] {
        if (!s.has("edges")) return sbm::sample(build_model(s, seed));
        std::ifstream in(s.get<std::string>("edges"));
        if (!in) throw Error("cannot open " + s.get<std::string>("edges"));
        return sbm::read_edge_list(in);
    };
    const auto net = load();
    const auto sp = spectra::normalized_laplacian_spectrum(net);
    dump_spectrum(sp, s.get("bins", 100), dir);
    out << spectrum_summary(sp).dump() << '\n';
    return 0;
}

int cmd_predict(const Settings& s, std::uint64_t seed, const fs::path& dir, std::ostream& out) {
    const auto model = build_model(s, seed);
    rmt::PredictOptions opts;
    opts.grid.points = s.get("grid_points", opts.grid.points);
    opts.grid.eta = s.get("eta", opts.grid.eta);
    opts.grid.lo = s.get("grid_lo", opts.grid.lo);
    opts.grid.hi = s.get("grid_hi", opts.grid.hi);
    const auto pred = rmt::predict(model, opts);
    write_text(dir, "prediction.json", rmt::prediction_json(pred));
    write_text(dir, "prediction.csv", rmt::prediction_csv(pred));
    json summary = {{"lambdaL", pred.support.lambda_left},
                    {"lambdaR", pred.support.lambda_right},
                    {"isolated", pred.isolated},
                    {"predicted_lambda2", pred.predicted_lambda2}};
    if (s.get("compare_empirical", false)) {
        const auto sp = spectra::normalized_laplacian_spectrum(connected_network(model));
        dump_spectrum(sp, s.get("bins", 100), dir);
        summary["lambda2_empirical"] = sp.lambda2;
    }
    out << summary.dump() << '\n';
    return 0;
}

int cmd_consensus(const Settings& s, std::uint64_t seed, const fs::path& dir, std::ostream& out) {
    const auto model = build_model(s, seed);
    const auto net = connected_network(model);
    const double eps = s.get("epsilon", 1e-10);
    const auto x0 = consensus::uniform_initial_state(net.num_nodes(), child_seed(net.seed(), 0x10));
    const auto r = consensus::run(net, x0, eps, {s.get("max_rounds", 100000L), 50});
    const auto sp = spectra::normalized_laplacian_spectrum(net);
    consensus::RunSummary sum;
    sum.n = net.num_nodes();
    sum.K = net.num_blocks();
    sum.p_in = s.get("p_in", std::nan(""));
    sum.p_out = s.get("p_out", std::nan(""));
    sum.epsilon = eps;
    sum.tau_eps = r.tau_eps;
    sum.censored = r.censored;
    sum.lambda2_empirical = sp.lambda2;
    sum.mu2_abs = sp.mu2_abs;
    const auto text = consensus::summary_json(sum);
    write_text(dir, "consensus.json", text);
    if (s.get("trace", false)) {
        auto f = open_out(dir, "consensus_trace.csv");
        consensus::write_error_trace_csv(r, f);
    }
    out << json::parse(text).dump() << '\n';
    return 0;
}

int cmd_gadget(const Settings& s, std::uint64_t seed, const fs::path& dir, std::ostream& out) {
    const auto model = build_model(s, seed);
    auto g = gadget_config(s);
    g.seed = child_seed(seed, 0x20);
    bench::SweepConfig sc;
    sc.seed = seed;
    sc.dataset = dataset_ref(s);
    const auto [train, test] = bench::load_dataset(sc);
    const auto r = gossip::run_gadget(model, train, test, g);
    const auto text = gossip::run_summary_json(g, r);
    write_text(dir, "gadget.json", text);
    {
        auto f = open_out(dir, "gadget_trace.csv");
        gossip::write_trace_csv(r, f);
    }
    out << json::parse(text).dump() << '\n';
    return 0;
}

int cmd_sweep(const Settings& s, std::uint64_t seed, const fs::path& dir, std::ostream& out) {
    bench::SweepConfig cfg;
    cfg.sizes = s.get<std::vector<int>>("sizes");
    cfg.p_in = s.get<double>("p_in");
    cfg.p_out_list = p_out_grid(s);
    cfg.seeds_per_point = s.get("seeds_per_point", cfg.seeds_per_point);
    cfg.epsilon = s.get("epsilon", cfg.epsilon);
    cfg.max_rounds = s.get("max_rounds", cfg.max_rounds);
    cfg.threads = s.get("threads", cfg.threads);
    cfg.dense_limit = s.get("dense_limit", cfg.dense_limit);
    cfg.seed = seed;
    const auto mode = s.get<std::string>("mode", "scalar");
    if (mode == "scalar") cfg.mode = bench::SweepMode::Scalar;
    else if (mode == "gadget") cfg.mode = bench::SweepMode::Gadget;
    else throw UsageError("mode must be scalar or gadget");
    cfg.gadget = gadget_config(s);
    cfg.dataset = dataset_ref(s);
    cfg.out_dir = dir.string();
    try {
        cfg.validate();
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }

    auto csv = open_out(dir, "rows.csv");
    bench::write_rows_header(csv);
    csv.flush();
    const auto rows = bench::sweep(cfg, [&](const bench::SweepRow& row) {
        bench::write_row(row, csv);
        csv.flush();
    });
    write_text(dir, "rows.json", bench::sweep_sidecar_json(cfg, rows));

    std::vector<double> d, t;
    int failed = 0;
    for (const auto& r : rows) {
        failed += !r.error.empty();
        if (r.censored == 0 && std::isfinite(r.tau_median)) {
            d.push_back(r.delta);
            t.push_back(r.tau_median);
        }
    }
    json summary = {{"rows", rows.size()}, {"failed_rows", failed}};
    if (d.size() >= 2) summary["spearman_delta_tau"] = stats::spearman(d, t);
    out << summary.dump() << '\n';
    return 0;
}

int cmd_fit(const Settings& s, const fs::path& dir, std::ostream& out) {
    const auto path = s.get<std::string>("rows");
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    const auto rows = bench::read_rows_csv(in);
    std::optional<double> pole;
    if (s.has("fix_pole")) pole = s.get<double>("fix_pole");
    json j;
    if (s.get("inverse_lambda2", false)) {
        j = json::parse(bench::fit_json(bench::fit_inverse_lambda2(rows), 0.0));
        j["form"] = "b/lambda2";
    } else {
        j = json::parse(bench::fit_json(bench::fit_reciprocal(rows, pole), pole));
        j["form"] = "a/(c-delta)";
    }
    std::vector<double> d, t;
    for (const auto& r : rows)
        if (r.censored == 0 && std::isfinite(r.tau_median)) {
            d.push_back(r.delta);
            t.push_back(r.tau_median);
        }
    if (d.size() >= 2) j["spearman_delta_tau"] = stats::spearman(d, t);
    write_text(dir, "fit.json", j.dump(2));
    out << j.dump() << '\n';
    return 0;
}

int cmd_bifurcation(const Settings& s, const fs::path& dir, std::ostream& out) {
    const double p_in = s.get<double>("p_in");
    std::vector<double> deltas;
    for (double p : p_out_grid(s)) deltas.push_back(p_in - p);
    const auto b = bench::detect_bifurcation(s.get<std::vector<int>>("sizes"), p_in, deltas, s.get("tol", 1e-4));
    const auto text = bench::bifurcation_json(b);
    write_text(dir, "bifurcation.json", text);
    out << json{{"in_range", b.in_range},
                {"status", b.status},
                {"delta1_star", b.in_range ? json(b.delta1_star) : json(nullptr)}}
               .dump()
        << '\n';
    return 0;
}

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config " + path);
    json j;
    try {
        j = json::parse(in, nullptr, true, true);  // comments allowed
    } catch (const json::exception& e) {
        throw UsageError("config " + path + ": " + e.what());
    }
    if (!j.is_object()) throw UsageError("config must be a JSON object");
    const auto known = all_keys();
    for (const auto& [k, _] : j.items())
        if (!known.count(k)) throw UsageError("unknown config key '" + k + "'");
    return j;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Consensus and spectra on stochastic block model networks", "blockcons"};
    app.require_subcommand(1);
    app.set_version_flag("--version", BLOCKCONS_VERSION);

    std::string config_path, out_dir = "out";
    std::optional<std::uint64_t> seed_flag;
    const auto table = subcommand_keys();
    std::map<std::string, std::map<std::string, std::string>> flag_text;
    std::map<std::string, CLI::App*> subs;
    for (const auto& [name, keys] : table) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "flat JSON config file");
        sub->add_option("--out", out_dir, "output directory")->capture_default_str();
        sub->add_option("--seed", seed_flag, "base random seed");
        for (const auto& k : keys) sub->add_option(flag_name(k), flag_text[name][k]);
        subs[name] = sub;
    }
    subs["sample"]->description("sample one network, write an edge list and JSON");
    subs["spectrum"]->description("normalized Laplacian spectrum of a sampled or given network");
    subs["predict"]->description("random-matrix spectral prediction");
    subs["consensus"]->description("one consensus run on a sampled network");
    subs["gadget"]->description("decentralized SVM training on a sampled network");
    subs["sweep"]->description("sweep p_out, write rows.csv and rows.json");
    subs["fit"]->description("fit tau = a/(c - delta) to sweep rows");
    subs["bifurcation"]->description("locate the spectral bifurcation along a delta grid");

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << BLOCKCONS_VERSION << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    const auto chosen = app.get_subcommands().front()->get_name();
    try {
        json merged = config_path.empty() ? json::object() : load_config(config_path);
        for (const auto& [k, text] : flag_text[chosen])
            if (subs[chosen]->count(flag_name(k)) > 0) merged[k] = flag_value(text);
        const Settings s(merged);
        std::uint64_t seed = seed_flag ? *seed_flag : s.get<std::uint64_t>("seed", 1);

        const fs::path dir(out_dir);
        fs::create_directories(dir);
        if (chosen == "sample") return cmd_sample(s, seed, dir, out);
        if (chosen == "spectrum") return cmd_spectrum(s, seed, dir, out);
        if (chosen == "predict") return cmd_predict(s, seed, dir, out);
        if (chosen == "consensus") return cmd_consensus(s, seed, dir, out);
        if (chosen == "gadget") return cmd_gadget(s, seed, dir, out);
        if (chosen == "sweep") return cmd_sweep(s, seed, dir, out);
        if (chosen == "fit") return cmd_fit(s, dir, out);
        if (chosen == "bifurcation") return cmd_bifurcation(s, dir, out);
        err << "error: unhandled subcommand " << chosen << '\n';
        return 2;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n\n" << subs[chosen]->help();
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace blockcons
