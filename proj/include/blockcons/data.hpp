#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace blockcons::data {

struct SparseVector {
    std::vector<std::uint32_t> index;  // strictly increasing
    std::vector<double> value;

    std::size_t nnz() const { return index.size(); }
    double dot(std::span<const double> dense) const;
    /// dense += scale * this
    void axpy(double scale, std::span<double> dense) const;
    double squared_norm() const;
};

struct Example {
    SparseVector x;
    int label = 1;  // -1 or +1
};

struct LabeledDataset {
    std::size_t d = 0;
    std::vector<Example> examples;
    std::string name;

    std::size_t size() const { return examples.size(); }
};

enum class IndexBase { Auto, Zero, One };

struct LoadOptions {
    IndexBase index_base = IndexBase::Auto;
    /// Multi-class labels become one-vs-rest against this class.
    std::optional<double> target_class;
    /// Fix the feature dimension instead of inferring it; larger indices are errors.
    std::optional<std::size_t> dimension;
};

/// Reads `label idx:val idx:val ...` lines. Indices are 1-based unless a 0
/// index appears (Auto) or the base is forced. Labels in {-1,+1} are kept,
/// {0,1} is remapped to {-1,+1}; anything else needs target_class.
LabeledDataset parse_sparse_text(std::istream& in, const LoadOptions& opts = {}, std::string name = {});
LabeledDataset load_sparse_text(const std::filesystem::path& path, const LoadOptions& opts = {});

/// Writes the same format (1-based by default) at full precision.
void write_sparse_text(const LabeledDataset& ds, std::ostream& out, int index_base = 1);
/// Writes `path` plus a `path.json` metadata sidecar.
void save_sparse_text(const LabeledDataset& ds, const std::filesystem::path& path, int index_base = 1);

/// Disjoint shards covering 0..n_examples-1.
struct Partition {
    std::vector<std::vector<std::size_t>> shards;
    bool has_empty_shard = false;
};

/// Seeded shuffle, then round-robin; shard sizes differ by at most one.
Partition partition_equal(std::size_t n_examples, int n_nodes, std::uint64_t seed);
inline Partition partition_equal(const LabeledDataset& ds, int n_nodes, std::uint64_t seed) {
    return partition_equal(ds.size(), n_nodes, seed);
}

/// Two Gaussian clouds mirrored across a random hyperplane through the
/// origin. Cloud centers sit at distance margin/2 + radius from the plane
/// and samples are truncated to the radius, so every point is at least
/// margin/2 from the plane. Labels alternate +1/-1.
LabeledDataset make_blobs(std::size_t n_examples, std::size_t d, double margin, std::uint64_t seed,
                          double radius = 1.0);

/// Splits off the last `test_fraction` of a seeded shuffle as a test set.
std::pair<LabeledDataset, LabeledDataset> train_test_split(const LabeledDataset& ds, double test_fraction,
                                                           std::uint64_t seed);

/// Fraction of examples with sign(<w, x>) == y, treating 0 as +1.
double accuracy(const LabeledDataset& ds, std::span<const double> w);

}  // namespace blockcons::data
