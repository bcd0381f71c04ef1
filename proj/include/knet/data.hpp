#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "knet/knn.hpp"
#include "knet/matrix.hpp"

namespace knet {

/// Feature vectors with integer labels in [0, num_labels).
struct LabeledDataset {
    Matrix vectors;
    std::vector<Label> labels;
    std::size_t num_labels = 0;
    /// "clean", or "noisy(<source>)" after noise injection. Not serialized.
    std::string provenance = "clean";

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t dim() const noexcept { return vectors.cols(); }

    void validate() const;

    /// Same vectors and labels, viewed as an embedding set.
    EmbeddingSet as_embeddings() const { return {vectors, labels, num_labels}; }

    bool operator==(const LabeledDataset& o) const {
        return vectors == o.vectors && labels == o.labels && num_labels == o.num_labels;
    }
};

/// Axis-independent 2-D Gaussian.
struct GaussianSpec {
    std::array<double, 2> mean{};
    std::array<double, 2> stddev{};
};

/// Three classes centered at (0.1,0.1), (0.8,0.1), (0.5,0.5), all with stddev 0.1.
std::array<GaussianSpec, 3> default_toy_specs();

/// n_per_class draws from each Gaussian, class-major order, label = class index.
LabeledDataset gen_toy(std::size_t n_per_class, std::uint64_t seed,
                       std::span<const GaussianSpec> specs = default_toy_specs());

/// Text format: "DATASET v1 n=<n> d=<d> L=<L>", then per sample d decimals and the label.
void write_dataset(std::ostream& out, const LabeledDataset& ds);
LabeledDataset read_dataset(std::istream& in, const std::string& source = "dataset");
void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path);
LabeledDataset load_dataset(const std::filesystem::path& path);

/// Loads an externally produced embedding file (same format as datasets).
EmbeddingSet load_embeddings(const std::filesystem::path& path);
void save_embeddings(const EmbeddingSet& es, const std::filesystem::path& path);

/// Seeded shuffle then partition into (train, test) with |test| = floor(n * f).
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds, double test_fraction,
                                                std::uint64_t seed);

}  // namespace knet
