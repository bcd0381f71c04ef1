#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <variant>
#include <vector>

#include "knet/knn.hpp"
#include "knet/nn.hpp"

namespace knet {

/// Upper end of the random-k training range.
inline constexpr std::size_t kDefaultKMax = 101;

/// kNet layer stack for embedding width d and L labels:
/// FC(d+1, h) -> ReLU -> BN(h) -> FC(h, L) -> Softmax with h = max(1, floor(d/16)).
struct KnetSpec {
    std::size_t dim = 0;
    std::size_t num_labels = 0;

    std::size_t hidden() const noexcept { return dim / 16 > 0 ? dim / 16 : 1; }
    NetSpec layers() const;
    /// (d+1)*h + h + 2h + h*L + L
    std::size_t param_count() const;
};

/// A fresh k is drawn uniformly from [k_min, k_max] for every batch.
struct RandomK {
    std::size_t k_min = 1;
    std::size_t k_max = kDefaultKMax;
};

/// Every batch uses the same k.
struct FixedK {
    std::size_t k = 1;
};

using KTrainMode = std::variant<RandomK, FixedK>;

struct KnetOptions {
    /// Include each training sample among its own neighbors when building targets.
    bool include_self = true;
    Metric metric = Metric::L1;
    /// Divisor for the k input feature; 0 picks k_max for RandomK and
    /// max(k, kDefaultKMax) for FixedK.
    std::size_t k_scale = 0;
};

class KnetModel {
public:
    KnetModel(KnetSpec spec, DenseNet net, std::size_t k_scale, bool include_self);

    const KnetSpec& spec() const noexcept { return spec_; }
    const DenseNet& net() const noexcept { return net_; }
    DenseNet& mutable_net() noexcept { return net_; }
    std::size_t k_scale() const noexcept { return k_scale_; }
    bool include_self() const noexcept { return include_self_; }
    std::size_t param_count() const { return net_.param_count(); }

    /// Rows [x || k / k_scale].
    Matrix encode(const Matrix& embeddings, std::size_t k) const;

    /// Infer-mode vote vectors for every row of `embeddings`.
    Matrix predict(const Matrix& embeddings, std::size_t k) const;

    /// Header "KNET v1 d=<d> L=<L> kmax=<k_scale> self=<0|1>" followed by the DenseNet format.
    void save(std::ostream& out) const;
    static KnetModel load(std::istream& in);
    void save_file(const std::filesystem::path& path) const;
    static KnetModel load_file(const std::filesystem::path& path);

private:
    KnetSpec spec_;
    DenseNet net_;
    std::size_t k_scale_;
    bool include_self_;
};

/// Initialized kNet from cfg's seed, scale and batch-norm settings.
KnetModel build_knet(std::size_t dim, std::size_t num_labels, const TrainConfig& cfg = {},
                     std::size_t k_scale = kDefaultKMax, bool include_self = true);

/// vote_pdf over the k nearest neighbors of stored sample i.
VoteVector make_target(const KnnIndex& index, std::size_t i, std::size_t k,
                       SelfPolicy policy = SelfPolicy::Include);

/// Precomputed neighbor lists (up to k_max per sample) for fast target generation.
class NeighborTable {
public:
    NeighborTable(const KnnIndex& index, std::size_t k_max, SelfPolicy policy);

    std::size_t size() const noexcept { return labels_.size() / (k_max_ ? k_max_ : 1); }
    std::size_t k_max() const noexcept { return k_max_; }

    /// Vote vector of sample i at k <= k_max, written into `out` (length L).
    void target(std::size_t i, std::size_t k, std::span<double> out) const;
    VoteVector target(std::size_t i, std::size_t k) const;

private:
    std::size_t k_max_;
    std::size_t num_labels_;
    std::vector<Label> labels_;  // n x k_max neighbor labels, nearest first
};

KnetModel train_knet(const EmbeddingSet& embeddings, const KTrainMode& mode, const TrainConfig& cfg,
                     const KnetOptions& options = {});

/// Vote vector for a single embedding.
VoteVector knet_predict(const KnetModel& model, std::span<const double> embedding, std::size_t k);

inline Label knet_predict_label(const KnetModel& model, std::span<const double> embedding, std::size_t k) {
    return argmax_label(knet_predict(model, embedding, k));
}

}  // namespace knet
