#include "knet/prelim.hpp"

#include <numeric>

#include "knet/errors.hpp"
#include "knet/rng.hpp"

namespace knet {

void PrelimSpec::validate() const {
    if (hidden.empty()) throw ValidationError("preliminary network needs at least one hidden layer");
    if (input_dim == 0 || num_labels == 0) throw ValidationError("preliminary network dimensions must be positive");
    for (auto h : hidden) {
        if (h == 0) throw ValidationError("hidden layer sizes must be positive");
    }
}

NetSpec PrelimSpec::layers() const {
    validate();
    NetSpec spec;
    std::size_t width = input_dim;
    for (auto h : hidden) {
        spec.push_back(LayerSpec::fully_connected(width, h));
        spec.push_back(LayerSpec::relu());
        width = h;
    }
    spec.push_back(LayerSpec::fully_connected(width, num_labels));
    spec.push_back(LayerSpec::softmax());
    return spec;
}

Matrix one_hot(std::span<const Label> labels, std::size_t num_labels) {
    Matrix m(labels.size(), num_labels);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= num_labels) throw RangeError("label outside [0, L)");
        m(i, labels[i]) = 1.0;
    }
    return m;
}

DenseNet train_prelim(const LabeledDataset& train, const PrelimSpec& spec, const TrainConfig& cfg) {
    train.validate();
    spec.validate();
    if (spec.input_dim != train.dim()) {
        throw ShapeError("preliminary network input width " + std::to_string(spec.input_dim) +
                         " does not match dataset width " + std::to_string(train.dim()));
    }
    if (spec.num_labels < train.num_labels) throw ShapeError("preliminary network has fewer outputs than labels");

    // The net is initialized from the seed before any data is touched, so
    // epochs == 0 returns the untrained initialization.
    SplitMix64 rng(cfg.seed);
    DenseNet net(spec.layers(), {cfg.bn_momentum, cfg.bn_epsilon});
    net.initialize(cfg.weight_init_scale, rng);
    cfg.validate();
    if (cfg.epochs == 0) return net;

    const Matrix targets = one_hot(train.labels, spec.num_labels);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            if (end - start < 2 && net.has_batch_norm()) continue;
            std::span<const std::size_t> ids(order.data() + start, end - start);
            Batch batch{train.vectors.gather(ids), targets.gather(ids)};
            train_on_batch(net, batch, LossKind::CrossEntropy, cfg.learning_rate);
        }
    }
    return net;
}

std::size_t penultimate_layer(const DenseNet& net) {
    const auto& spec = net.spec();
    for (std::size_t i = spec.size(); i-- > 0;) {
        if (spec[i].kind == LayerKind::FullyConnected) return i;
    }
    throw ShapeError("network has no fully connected layer");
}

Matrix embed(const DenseNet& net, const Matrix& inputs) { return net.infer_until(inputs, penultimate_layer(net)); }

EmbeddingSet extract_penultimate(const DenseNet& net, const LabeledDataset& ds) {
    if (ds.dim() != net.input_dim()) {
        throw ShapeError("network input width " + std::to_string(net.input_dim()) + " does not match dataset width " +
                         std::to_string(ds.dim()));
    }
    return {embed(net, ds.vectors), ds.labels, ds.num_labels};
}

}  // namespace knet
