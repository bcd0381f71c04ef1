#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "knet/data.hpp"
#include "knet/matrix.hpp"

namespace knet {

enum class NoiseKind { Uniform, RandomAsymmetric, SemanticAsymmetric, Custom };

/// Row-stochastic L x L matrix; entry (y, y') is P(noisy label y' | clean label y).
///
/// The "rate" means different things per kind. Uniform noise redraws the label
/// over all L classes including the original, so the diagonal keeps
/// 1 - r + r/L. The asymmetric kinds put exactly 1 - r on the diagonal.
class TransitionMatrix {
public:
    /// Validates a user-supplied matrix (square, entries in [0,1], rows sum to 1).
    static TransitionMatrix custom(Matrix rows);

    std::size_t num_labels() const noexcept { return rows_.rows(); }
    NoiseKind kind() const noexcept { return kind_; }
    double rate() const noexcept { return rate_; }
    const Matrix& rows() const noexcept { return rows_; }
    double operator()(Label from, Label to) const { return rows_(from, to); }

    /// For RandomAsymmetric: the (2/3 r, 1/3 r) flip targets of each class.
    const std::vector<std::pair<Label, Label>>& flip_targets() const noexcept { return targets_; }

    /// Text format: "TM v1 L=<L>", then L rows of L decimals.
    void save(std::ostream& out) const;
    static TransitionMatrix load(std::istream& in, const std::string& source = "matrix");
    void save_file(const std::filesystem::path& path) const;
    static TransitionMatrix load_file(const std::filesystem::path& path);

private:
    TransitionMatrix(Matrix rows, NoiseKind kind, double rate);
    void validate() const;

    Matrix rows_;
    NoiseKind kind_ = NoiseKind::Custom;
    double rate_ = 0.0;
    std::vector<std::pair<Label, Label>> targets_;

    friend TransitionMatrix make_uniform(double, std::size_t);
    friend TransitionMatrix make_random_asym(double, std::size_t, std::uint64_t, bool);
    friend TransitionMatrix make_semantic(std::span<const std::pair<Label, Label>>, double, std::size_t);
};

TransitionMatrix make_uniform(double rate, std::size_t num_labels);

/// Each class keeps 1 - r and sends 2r/3 and r/3 to two distinct other classes.
/// Targets are drawn per class without replacement from the seed, or with
/// `cyclic` fixed to (c+1) mod L and (c+2) mod L.
TransitionMatrix make_random_asym(double rate, std::size_t num_labels, std::uint64_t seed, bool cyclic = false);

/// Each pair (a, b) swaps with probability r in both directions; other rows are identity.
TransitionMatrix make_semantic(std::span<const std::pair<Label, Label>> pairs, double rate, std::size_t num_labels);

struct Flip {
    Label original = 0;
    Label resulting = 0;
    bool flipped = false;
};

using FlipRecord = std::vector<Flip>;

struct NoisyDataset {
    LabeledDataset dataset;
    FlipRecord record;
};

/// Samples each noisy label independently from the row of its clean label.
NoisyDataset apply_noise(const LabeledDataset& clean, const TransitionMatrix& tm, std::uint64_t seed);

}  // namespace knet
