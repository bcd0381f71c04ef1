#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "knet/matrix.hpp"

namespace knet {

using Label = std::size_t;

/// Normalized label histogram: entries are nonnegative and sum to 1.
using VoteVector = std::vector<double>;

/// Penultimate-layer features paired with (noisy) labels.
struct EmbeddingSet {
    Matrix vectors;
    std::vector<Label> labels;
    std::size_t num_labels = 0;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t dim() const noexcept { return vectors.cols(); }

    /// Throws EmptyInputError, ShapeError or RangeError when the invariants fail.
    void validate() const;
};

enum class Metric { L1, L2 };

/// L1 distance, or squared L2 distance (same ordering as L2, no sqrt).
double distance(Metric metric, std::span<const double> a, std::span<const double> b);

/// Whether a stored sample may appear among its own neighbors.
enum class SelfPolicy { Include, Exclude };

/// Exact nearest-neighbor index. Every query is a linear scan over the stored
/// vectors; neighbors are ordered by (distance, sample id) ascending.
class KnnIndex {
public:
    explicit KnnIndex(EmbeddingSet embeddings, Metric metric = Metric::L1);

    std::size_t size() const noexcept { return data_.size(); }
    std::size_t dim() const noexcept { return data_.dim(); }
    std::size_t num_labels() const noexcept { return data_.num_labels; }
    Metric metric() const noexcept { return metric_; }
    const EmbeddingSet& embeddings() const noexcept { return data_; }

    /// Number of stored reals, n * d.
    std::size_t stored_values() const noexcept { return data_.vectors.size(); }

    /// The k nearest sample ids, nearest first.
    std::vector<std::size_t> query(std::span<const double> q, std::size_t k) const;

    /// Neighbors of stored sample i. With Include the sample itself ranks first
    /// (ahead of exact duplicates); with Exclude it never appears.
    std::vector<std::size_t> neighbors_of(std::size_t i, std::size_t k, SelfPolicy policy) const;

    std::vector<Label> labels_of(std::span<const std::size_t> ids) const;

    VoteVector vote(std::span<const double> q, std::size_t k) const;
    Label classify(std::span<const double> q, std::size_t k) const;

private:
    std::vector<std::size_t> nearest(std::span<const double> q, std::size_t k,
                                     std::size_t skip) const;
    void check_query(std::span<const double> q) const;

    EmbeddingSet data_;
    Metric metric_;
};

inline KnnIndex build_index(EmbeddingSet embeddings, Metric metric = Metric::L1) {
    return KnnIndex(std::move(embeddings), metric);
}

/// probs[c] = (count of c among the labels) / k.
VoteVector vote_pdf(std::span<const Label> neighbor_labels, std::size_t num_labels);

/// Index of the largest entry; ties go to the lowest index.
Label argmax_label(std::span<const double> probs);

inline std::vector<std::size_t> query_knn(const KnnIndex& index, std::span<const double> q, std::size_t k) {
    return index.query(q, k);
}

inline Label knn_classify(const KnnIndex& index, std::span<const double> q, std::size_t k) {
    return index.classify(q, k);
}

}  // namespace knet
