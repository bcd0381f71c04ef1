#include "knet/knet_model.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <ostream>

#include "knet/errors.hpp"
#include "knet/rng.hpp"
#include "text_io.hpp"

namespace knet {

NetSpec KnetSpec::layers() const {
    if (dim == 0) throw RangeError("kNet embedding dimension must be at least 1");
    if (num_labels < 2) throw RangeError("kNet needs at least 2 labels");
    const std::size_t h = hidden();
    return {LayerSpec::fully_connected(dim + 1, h), LayerSpec::relu(), LayerSpec::batch_norm(h),
            LayerSpec::fully_connected(h, num_labels), LayerSpec::softmax()};
}

std::size_t KnetSpec::param_count() const {
    const std::size_t h = hidden();
    return (dim + 1) * h + h + 2 * h + h * num_labels + num_labels;
}

KnetModel::KnetModel(KnetSpec spec, DenseNet net, std::size_t k_scale, bool include_self)
    : spec_(spec), net_(std::move(net)), k_scale_(k_scale), include_self_(include_self) {
    if (net_.spec() != spec_.layers()) throw ShapeError("network does not match the kNet layer stack");
    if (k_scale_ == 0) throw RangeError("kNet k scale must be positive");
}

Matrix KnetModel::encode(const Matrix& embeddings, std::size_t k) const {
    if (embeddings.cols() != spec_.dim) {
        throw ShapeError("kNet expects embedding width " + std::to_string(spec_.dim) + ", got " +
                         std::to_string(embeddings.cols()));
    }
    if (k < 1) throw RangeError("k must be at least 1");
    Matrix x(embeddings.rows(), spec_.dim + 1);
    const double scaled = static_cast<double>(k) / static_cast<double>(k_scale_);
    for (std::size_t r = 0; r < embeddings.rows(); ++r) {
        auto src = embeddings.row(r);
        auto dst = x.row(r);
        std::copy(src.begin(), src.end(), dst.begin());
        dst[spec_.dim] = scaled;
    }
    return x;
}

Matrix KnetModel::predict(const Matrix& embeddings, std::size_t k) const { return net_.infer(encode(embeddings, k)); }

void KnetModel::save(std::ostream& out) const {
    out << "KNET v1 d=" << spec_.dim << " L=" << spec_.num_labels << " kmax=" << k_scale_
        << " self=" << (include_self_ ? 1 : 0) << '\n';
    net_.save(out);
}

KnetModel KnetModel::load(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw EmptyInputError("kNet model stream is empty");
    auto parts = detail::split_ws(line);
    std::size_t d = 0, L = 0, kmax = 0;
    int self = 0;
    if (parts.size() != 6 || parts[0] != "KNET" || parts[1] != "v1" || !detail::parse_keyed(parts[2], "d", d) ||
        !detail::parse_keyed(parts[3], "L", L) || !detail::parse_keyed(parts[4], "kmax", kmax) ||
        !detail::parse_keyed(parts[5], "self", self) || (self != 0 && self != 1)) {
        throw ParseError("model:1: expected header 'KNET v1 d=<d> L=<L> kmax=<k> self=<0|1>'");
    }
    DenseNet net = DenseNet::load(in);
    return KnetModel(KnetSpec{d, L}, std::move(net), kmax, self == 1);
}

void KnetModel::save_file(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    save(out);
}

KnetModel KnetModel::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    return load(in);
}

KnetModel build_knet(std::size_t dim, std::size_t num_labels, const TrainConfig& cfg, std::size_t k_scale,
                     bool include_self) {
    KnetSpec spec{dim, num_labels};
    return KnetModel(spec, DenseNet::initialized(spec.layers(), cfg), k_scale, include_self);
}

VoteVector make_target(const KnnIndex& index, std::size_t i, std::size_t k, SelfPolicy policy) {
    auto ids = index.neighbors_of(i, k, policy);
    return vote_pdf(index.labels_of(ids), index.num_labels());
}

NeighborTable::NeighborTable(const KnnIndex& index, std::size_t k_max, SelfPolicy policy)
    : k_max_(k_max), num_labels_(index.num_labels()) {
    labels_.reserve(index.size() * k_max);
    for (std::size_t i = 0; i < index.size(); ++i) {
        auto ids = index.neighbors_of(i, k_max, policy);
        for (auto id : ids) labels_.push_back(index.embeddings().labels[id]);
    }
}

void NeighborTable::target(std::size_t i, std::size_t k, std::span<double> out) const {
    if (k < 1 || k > k_max_) throw RangeError("k=" + std::to_string(k) + " outside the precomputed range");
    if (out.size() != num_labels_) throw ShapeError("target buffer has the wrong length");
    std::fill(out.begin(), out.end(), 0.0);
    const Label* row = labels_.data() + i * k_max_;
    for (std::size_t j = 0; j < k; ++j) out[row[j]] += 1.0;
    for (double& v : out) v /= static_cast<double>(k);
}

VoteVector NeighborTable::target(std::size_t i, std::size_t k) const {
    VoteVector v(num_labels_);
    target(i, k, v);
    return v;
}

namespace {

// Sets each first-layer bias to minus the median pre-activation over the
// training inputs, so every ReLU unit starts active on half the data. With
// nonnegative embeddings and zero biases a narrow hidden layer can otherwise
// start (and stay) dead.
void center_hidden_units(KnetModel& model, const Matrix& embeddings, std::size_t k) {
    const Matrix x = model.encode(embeddings, k);
    LayerParams& fc = model.mutable_net().mutable_layer_params(0);
    const std::size_t in = x.cols();
    const std::size_t hidden = fc.bias.size();
    std::vector<double> pre(x.rows());
    for (std::size_t h = 0; h < hidden; ++h) {
        const double* w = fc.weight.data() + h * in;
        for (std::size_t r = 0; r < x.rows(); ++r) {
            auto row = x.row(r);
            double acc = 0.0;
            for (std::size_t i = 0; i < in; ++i) acc += w[i] * row[i];
            pre[r] = acc;
        }
        auto mid = pre.begin() + static_cast<std::ptrdiff_t>(pre.size() / 2);
        std::nth_element(pre.begin(), mid, pre.end());
        fc.bias[h] = -*mid;
    }
}

}  // namespace

KnetModel train_knet(const EmbeddingSet& embeddings, const KTrainMode& mode, const TrainConfig& cfg,
                     const KnetOptions& options) {
    embeddings.validate();
    cfg.validate();
    const SelfPolicy policy = options.include_self ? SelfPolicy::Include : SelfPolicy::Exclude;
    const std::size_t available = options.include_self ? embeddings.size() : embeddings.size() - 1;

    std::size_t k_lo = 0, k_hi = 0, k_scale = options.k_scale;
    if (const auto* r = std::get_if<RandomK>(&mode)) {
        k_lo = r->k_min;
        k_hi = r->k_max;
        if (k_scale == 0) k_scale = r->k_max;
    } else {
        k_lo = k_hi = std::get<FixedK>(mode).k;
        if (k_scale == 0) k_scale = std::max(k_hi, kDefaultKMax);
    }
    if (k_lo < 1 || k_lo > k_hi || k_hi > available) {
        throw RangeError("k range [" + std::to_string(k_lo) + ", " + std::to_string(k_hi) + "] is not within [1, " +
                         std::to_string(available) + "]");
    }

    SplitMix64 rng(cfg.seed);
    KnetSpec spec{embeddings.dim(), embeddings.num_labels};
    DenseNet net(spec.layers(), {cfg.bn_momentum, cfg.bn_epsilon});
    net.initialize(cfg.weight_init_scale, rng);
    KnetModel model(spec, std::move(net), k_scale, options.include_self);
    if (cfg.epochs == 0) return model;
    center_hidden_units(model, embeddings.vectors, (k_lo + k_hi) / 2);

    const KnnIndex index(embeddings, options.metric);
    const NeighborTable table(index, k_hi, policy);

    std::vector<std::size_t> order(embeddings.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t L = spec.num_labels;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const std::size_t k = k_lo == k_hi ? k_lo : static_cast<std::size_t>(rng.between(k_lo, k_hi));
            if (end - start < 2) continue;  // batch norm needs two samples
            std::span<const std::size_t> ids(order.data() + start, end - start);
            Batch batch{model.encode(embeddings.vectors.gather(ids), k), Matrix(ids.size(), L)};
            for (std::size_t b = 0; b < ids.size(); ++b) table.target(ids[b], k, batch.targets.row(b));
            train_on_batch(model.mutable_net(), batch, cfg.loss, cfg.learning_rate);
        }
    }
    return model;
}

VoteVector knet_predict(const KnetModel& model, std::span<const double> embedding, std::size_t k) {
    Matrix x(1, embedding.size(), std::vector<double>(embedding.begin(), embedding.end()));
    Matrix p = model.predict(x, k);
    auto row = p.row(0);
    return VoteVector(row.begin(), row.end());
}

}  // namespace knet
