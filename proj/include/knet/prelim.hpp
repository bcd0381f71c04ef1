#pragma once

#include <vector>

#include "knet/data.hpp"
#include "knet/knn.hpp"
#include "knet/nn.hpp"

namespace knet {

/// Preliminary classifier: FC/ReLU blocks for each hidden size, then FC to L and Softmax.
struct PrelimSpec {
    std::vector<std::size_t> hidden{16, 8};
    std::size_t input_dim = 2;
    std::size_t num_labels = 3;

    void validate() const;
    NetSpec layers() const;
};

/// Rows are one-hot encodings of the labels.
Matrix one_hot(std::span<const Label> labels, std::size_t num_labels);

/// Minibatch SGD on one-hot targets. Each epoch visits a seeded permutation;
/// a trailing batch of one sample is dropped when the net has batch norm.
DenseNet train_prelim(const LabeledDataset& train, const PrelimSpec& spec, const TrainConfig& cfg);

/// Index of the final FullyConnected layer; its input is the penultimate representation.
std::size_t penultimate_layer(const DenseNet& net);

/// Infer-mode activations entering the final FC layer, paired with the dataset labels.
EmbeddingSet extract_penultimate(const DenseNet& net, const LabeledDataset& ds);

/// As extract_penultimate, for bare inputs.
Matrix embed(const DenseNet& net, const Matrix& inputs);

}  // namespace knet
