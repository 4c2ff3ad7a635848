#include "blockcons/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>
#include <string_view>

#include "blockcons/error.hpp"
#include "blockcons/format.hpp"
#include "blockcons/random.hpp"
#include "json.hpp"

namespace blockcons::data {

double SparseVector::dot(std::span<const double> dense) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < index.size(); ++k) acc += value[k] * dense[index[k]];
    return acc;
}

void SparseVector::axpy(double scale, std::span<double> dense) const {
    for (std::size_t k = 0; k < index.size(); ++k) dense[index[k]] += scale * value[k];
}

double SparseVector::squared_norm() const {
    double acc = 0.0;
    for (double v : value) acc += v * v;
    return acc;
}

namespace {

struct RawRow {
    double label;
    std::vector<std::pair<long long, double>> entries;
};

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }

std::vector<std::string_view> split_tokens(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && is_space(line[i])) ++i;
        std::size_t j = i;
        while (j < line.size() && !is_space(line[j])) ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

double parse_number(std::string_view tok, std::size_t lineno, const char* what) {
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw ParseError(std::string("malformed ") + what + " '" + std::string(tok) + "'", lineno);
    if (!std::isfinite(v)) throw ParseError(std::string("non-finite ") + what, lineno);
    return v;
}

long long parse_index(std::string_view tok, std::size_t lineno) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw ParseError("malformed feature index '" + std::string(tok) + "'", lineno);
    if (v < 0) throw ParseError("negative feature index", lineno);
    return v;
}

}  // namespace

LabeledDataset parse_sparse_text(std::istream& in, const LoadOptions& opts, std::string name) {
    std::vector<RawRow> rows;
    std::vector<std::size_t> row_lines;
    bool saw_zero_index = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view view(line);
        if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        const auto tokens = split_tokens(view);
        if (tokens.empty()) continue;
        RawRow row;
        row.label = parse_number(tokens[0], lineno, "label");
        long long prev = -1;
        for (std::size_t k = 1; k < tokens.size(); ++k) {
            const auto colon = tokens[k].find(':');
            if (colon == std::string_view::npos)
                throw ParseError("expected idx:value, got '" + std::string(tokens[k]) + "'", lineno);
            const long long idx = parse_index(tokens[k].substr(0, colon), lineno);
            const double val = parse_number(tokens[k].substr(colon + 1), lineno, "feature value");
            if (idx <= prev) throw ParseError("feature indices must be strictly increasing", lineno);
            prev = idx;
            if (idx == 0) saw_zero_index = true;
            row.entries.emplace_back(idx, val);
        }
        rows.push_back(std::move(row));
        row_lines.push_back(lineno);
    }

    long long base = 1;
    if (opts.index_base == IndexBase::Zero || (opts.index_base == IndexBase::Auto && saw_zero_index)) base = 0;

    // Label mapping.
    std::set<double> labels;
    for (const auto& r : rows) labels.insert(r.label);
    auto subset_of = [&](std::initializer_list<double> allowed) {
        return std::all_of(labels.begin(), labels.end(), [&](double l) {
            return std::find(allowed.begin(), allowed.end(), l) != allowed.end();
        });
    };
    enum class Mapping { Signed, ZeroOne, OneVsRest } mapping;
    if (opts.target_class) mapping = Mapping::OneVsRest;
    else if (subset_of({-1.0, 1.0})) mapping = Mapping::Signed;
    else if (subset_of({0.0, 1.0})) mapping = Mapping::ZeroOne;
    else throw InvalidArgument("labels are not binary; pass a target class for one-vs-rest");

    LabeledDataset ds;
    ds.name = std::move(name);
    std::size_t max_index_plus_one = 0;
    ds.examples.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        Example ex;
        switch (mapping) {
            case Mapping::Signed: ex.label = rows[i].label > 0 ? 1 : -1; break;
            case Mapping::ZeroOne: ex.label = rows[i].label > 0 ? 1 : -1; break;
            case Mapping::OneVsRest: ex.label = rows[i].label == *opts.target_class ? 1 : -1; break;
        }
        for (const auto& [idx, val] : rows[i].entries) {
            const long long j = idx - base;
            if (j < 0) throw ParseError("index 0 in a 1-based file", row_lines[i]);
            if (opts.dimension && static_cast<std::size_t>(j) >= *opts.dimension)
                throw ParseError("feature index exceeds dimension", row_lines[i]);
            ex.x.index.push_back(static_cast<std::uint32_t>(j));
            ex.x.value.push_back(val);
            max_index_plus_one = std::max(max_index_plus_one, static_cast<std::size_t>(j) + 1);
        }
        ds.examples.push_back(std::move(ex));
    }
    ds.d = opts.dimension ? *opts.dimension : max_index_plus_one;
    return ds;
}

LabeledDataset load_sparse_text(const std::filesystem::path& path, const LoadOptions& opts) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open " + path.string());
    return parse_sparse_text(in, opts, path.filename().string());
}

void write_sparse_text(const LabeledDataset& ds, std::ostream& out, int index_base) {
    for (const auto& ex : ds.examples) {
        out << (ex.label > 0 ? "+1" : "-1");
        for (std::size_t k = 0; k < ex.x.nnz(); ++k)
            out << ' ' << (ex.x.index[k] + index_base) << ':' << format_double(ex.x.value[k]);
        out << '\n';
    }
}

void save_sparse_text(const LabeledDataset& ds, const std::filesystem::path& path, int index_base) {
    {
        std::ofstream out(path);
        if (!out) throw InvalidArgument("cannot write " + path.string());
        write_sparse_text(ds, out, index_base);
    }
    std::size_t positives = 0;
    for (const auto& ex : ds.examples) positives += ex.label > 0;
    nlohmann::json meta = {{"name", ds.name},
                           {"d", ds.d},
                           {"examples", ds.size()},
                           {"positives", positives},
                           {"index_base", index_base}};
    std::ofstream side(path.string() + ".json");
    side << meta.dump(2) << '\n';
}

Partition partition_equal(std::size_t n_examples, int n_nodes, std::uint64_t seed) {
    if (n_nodes < 1) throw InvalidArgument("need at least one node");
    std::vector<std::size_t> order(n_examples);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = n_examples; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

    Partition p;
    p.shards.resize(n_nodes);
    for (std::size_t k = 0; k < n_examples; ++k) p.shards[k % n_nodes].push_back(order[k]);
    p.has_empty_shard = n_examples < static_cast<std::size_t>(n_nodes);
    return p;
}

namespace {

double standard_normal(Rng& rng) {
    // Box-Muller on the portable uniform.
    double u1;
    do {
        u1 = uniform01(rng);
    } while (u1 <= 0.0);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

LabeledDataset make_blobs(std::size_t n_examples, std::size_t d, double margin, std::uint64_t seed, double radius) {
    if (!(margin > 0.0)) throw InvalidArgument("margin must be positive");
    if (d < 1) throw InvalidArgument("dimension must be >= 1");
    if (!(radius > 0.0)) throw InvalidArgument("radius must be positive");
    Rng rng(seed);

    std::vector<double> normal(d);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (double& v : normal) {
            v = standard_normal(rng);
            norm += v * v;
        }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (double& v : normal) v /= norm;

    const double offset = margin / 2.0 + radius;
    // Per-coordinate sigma puts the typical noise norm at half the radius.
    const double sigma = radius / (2.0 * std::sqrt(static_cast<double>(d)));

    LabeledDataset ds;
    ds.d = d;
    ds.name = "blobs";
    ds.examples.reserve(n_examples);
    std::vector<double> noise(d);
    for (std::size_t i = 0; i < n_examples; ++i) {
        const int y = (i % 2 == 0) ? 1 : -1;
        double nn;
        do {
            nn = 0.0;
            for (double& v : noise) {
                v = sigma * standard_normal(rng);
                nn += v * v;
            }
        } while (nn > radius * radius);
        Example ex;
        ex.label = y;
        for (std::size_t j = 0; j < d; ++j) {
            ex.x.index.push_back(static_cast<std::uint32_t>(j));
            ex.x.value.push_back(y * offset * normal[j] + noise[j]);
        }
        ds.examples.push_back(std::move(ex));
    }
    return ds;
}

std::pair<LabeledDataset, LabeledDataset> train_test_split(const LabeledDataset& ds, double test_fraction,
                                                           std::uint64_t seed) {
    if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw InvalidArgument("test fraction must lie in [0, 1)");
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    const auto n_test = static_cast<std::size_t>(std::floor(test_fraction * ds.size()));
    LabeledDataset train, test;
    train.d = test.d = ds.d;
    train.name = ds.name + ":train";
    test.name = ds.name + ":test";
    for (std::size_t k = 0; k < order.size(); ++k)
        (k < order.size() - n_test ? train : test).examples.push_back(ds.examples[order[k]]);
    return {std::move(train), std::move(test)};
}

double accuracy(const LabeledDataset& ds, std::span<const double> w) {
    if (ds.size() == 0) return 0.0;
    std::size_t correct = 0;
    for (const auto& ex : ds.examples) {
        const int pred = ex.x.dot(w) >= 0.0 ? 1 : -1;
        correct += pred == ex.label;
    }
    return static_cast<double>(correct) / ds.size();
}

}  // namespace blockcons::data
