#pragma once

// Independent reference implementations used by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "knet/knn.hpp"
#include "knet/matrix.hpp"
#include "knet/nn.hpp"
#include "knet/rng.hpp"

namespace knet::oracle {

/// k nearest ids by full sort of (distance, id). When `self` names a stored
/// point, it ranks ahead of other points at the same distance.
inline std::vector<std::size_t> brute_force_knn(const Matrix& points, std::span<const double> q, std::size_t k,
                                                Metric metric = Metric::L1,
                                                std::size_t self = static_cast<std::size_t>(-1)) {
    std::vector<std::tuple<double, bool, std::size_t>> all;
    all.reserve(points.rows());
    for (std::size_t i = 0; i < points.rows(); ++i) {
        double d = 0.0;
        for (std::size_t j = 0; j < q.size(); ++j) {
            const double diff = q[j] - points(i, j);
            d += metric == Metric::L1 ? std::abs(diff) : diff * diff;
        }
        all.emplace_back(d, i != self, i);
    }
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < k; ++i) ids.push_back(std::get<2>(all[i]));
    return ids;
}

inline std::vector<double> histogram(std::span<const Label> labels, std::size_t num_labels) {
    std::vector<double> h(num_labels, 0.0);
    for (Label l : labels) h[l] += 1.0;
    for (double& v : h) v /= static_cast<double>(labels.size());
    return h;
}

inline double entropy(std::span<const double> p) {
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

/// Random probability rows, strictly positive.
inline Matrix random_distributions(std::size_t rows, std::size_t cols, SplitMix64& rng) {
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < cols; ++c) sum += m(r, c) = rng.uniform(0.05, 1.0);
        for (std::size_t c = 0; c < cols; ++c) m(r, c) /= sum;
    }
    return m;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, SplitMix64& rng, double lo = -1.0, double hi = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.values()) v = rng.uniform(lo, hi);
    return m;
}

/// |a - n| / max(|a|, |n|, floor); the floor keeps roundoff on near-zero
/// gradients from dominating.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct GradCheck {
    double worst = 0.0;
    std::size_t checked = 0;
    std::string where;
};

/// Compares analytic gradients from `analytic` against central differences of
/// the Train-mode loss. The net is copied for every evaluation so running
/// statistics never leak between probes.
inline GradCheck check_gradients(const DenseNet& net, const Matrix& x, const Matrix& t, LossKind kind,
                                 const Gradients& analytic, double h = 1e-5) {
    auto eval = [&](const DenseNet& probe) {
        DenseNet copy = probe;
        return loss(kind, copy.forward(x, Mode::Train).outputs, t);
    };
    GradCheck out;
    for (std::size_t layer = 0; layer < net.num_layers(); ++layer) {
        for (int which = 0; which < 2; ++which) {
            const std::size_t n = which == 0 ? net.layer_params(layer).weight.size()
                                              : net.layer_params(layer).bias.size();
            for (std::size_t i = 0; i < n; ++i) {
                DenseNet plus = net, minus = net;
                auto& pp = plus.mutable_layer_params(layer);
                auto& mp = minus.mutable_layer_params(layer);
                (which == 0 ? pp.weight : pp.bias)[i] += h;
                (which == 0 ? mp.weight : mp.bias)[i] -= h;
                const double numeric = (eval(plus) - eval(minus)) / (2.0 * h);
                const auto& g = analytic.at(layer);
                const double a = (which == 0 ? g.weight : g.bias).at(i);
                const double err = relative_error(a, numeric);
                ++out.checked;
                if (err > out.worst) {
                    out.worst = err;
                    out.where = "layer " + std::to_string(layer) + (which == 0 ? " weight " : " bias ") +
                                std::to_string(i);
                }
            }
        }
    }
    return out;
}

/// Small random nets covering every layer kind, all ending in Softmax.
inline NetSpec random_small_spec(SplitMix64& rng) {
    auto dim = [&] { return static_cast<std::size_t>(rng.between(1, 8)); };
    const std::size_t in = dim(), hidden = dim(), out = static_cast<std::size_t>(rng.between(2, 8));
    switch (rng.below(4)) {
        case 0:
            return {LayerSpec::fully_connected(in, out), LayerSpec::softmax()};
        case 1:
            return {LayerSpec::fully_connected(in, hidden), LayerSpec::relu(), LayerSpec::fully_connected(hidden, out),
                    LayerSpec::softmax()};
        case 2:
            return {LayerSpec::fully_connected(in, hidden), LayerSpec::batch_norm(hidden), LayerSpec::relu(),
                    LayerSpec::fully_connected(hidden, out), LayerSpec::softmax()};
        default:
            return {LayerSpec::fully_connected(in, hidden), LayerSpec::relu(), LayerSpec::batch_norm(hidden),
                    LayerSpec::fully_connected(hidden, out), LayerSpec::softmax()};
    }
}

/// Random net with perturbed BN affine parameters so gamma and beta gradients are non-trivial.
inline DenseNet random_small_net(SplitMix64& rng) {
    DenseNet net(random_small_spec(rng));
    net.initialize(1.0, rng);
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        if (net.spec()[l].kind != LayerKind::BatchNorm) continue;
        auto& p = net.mutable_layer_params(l);
        for (double& g : p.weight) g = rng.uniform(0.5, 1.5);
        for (double& b : p.bias) b = rng.uniform(-0.5, 0.5);
    }
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        if (net.spec()[l].kind != LayerKind::FullyConnected) continue;
        for (double& b : net.mutable_layer_params(l).bias) b = rng.uniform(-0.3, 0.3);
    }
    return net;
}

/// Smallest |input| reaching any ReLU in a Train-mode pass over x. Finite
/// differences are meaningless when a probe straddles the kink at 0.
inline double relu_margin(const DenseNet& net, const Matrix& x) {
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        if (net.spec()[l].kind != LayerKind::ReLU) continue;
        if (l == 0) {
            for (double v : x.values()) margin = std::min(margin, std::abs(v));
            continue;
        }
        NetSpec prefix(net.spec().begin(), net.spec().begin() + static_cast<std::ptrdiff_t>(l));
        DenseNet head(prefix, net.batch_norm_options(), net.input_dim());
        for (std::size_t i = 0; i < l; ++i) {
            head.mutable_layer_params(i) = net.layer_params(i);
            if (prefix[i].kind == LayerKind::BatchNorm) head.mutable_batch_norm_state(i) = net.batch_norm_state(i);
        }
        const Matrix pre = head.forward(x, Mode::Train).outputs;
        for (double v : pre.values()) margin = std::min(margin, std::abs(v));
    }
    return margin;
}

inline constexpr double kReluMargin = 1e-3;

struct GradientSweep {
    double worst = 0.0;
    std::size_t nets = 0;
    std::size_t resampled = 0;  // draws rejected for sitting near a ReLU kink
    std::size_t with_relu = 0;
    std::size_t with_batch_norm = 0;
    std::size_t checked = 0;
    std::string where;
};

/// Runs the finite-difference check over `count` random nets for one loss, on
/// both the generic output-gradient path and the fused logit path.
inline GradientSweep gradient_sweep(std::uint64_t base_seed, std::size_t count, LossKind kind) {
    GradientSweep sweep;
    SplitMix64 rng(base_seed);
    while (sweep.nets < count) {
        DenseNet net = random_small_net(rng);
        const std::size_t batch = static_cast<std::size_t>(rng.between(2, 6));
        const Matrix x = random_matrix(batch, net.input_dim(), rng);
        const Matrix t = random_distributions(batch, net.output_dim(), rng);
        if (relu_margin(net, x) < kReluMargin) {
            ++sweep.resampled;
            continue;
        }

        DenseNet probe = net;
        auto fwd = probe.forward(x, Mode::Train);
        const Gradients generic = probe.backward(fwd.tape, loss_gradient(kind, fwd.outputs, t));
        const Gradients fused = probe.backward_from_logits(fwd.tape, softmax_logit_gradient(fwd.outputs, t));
        for (const Gradients* g : {&generic, &fused}) {
            GradCheck c = check_gradients(net, x, t, kind, *g);
            sweep.checked += c.checked;
            if (c.worst > sweep.worst) {
                sweep.worst = c.worst;
                sweep.where = "net " + std::to_string(sweep.nets) + " (" + spec_to_tokens(net.spec()) + ") " + c.where;
            }
        }
        const auto has = [&](LayerKind kind) {
            return std::any_of(net.spec().begin(), net.spec().end(), [&](const LayerSpec& l) { return l.kind == kind; });
        };
        sweep.with_relu += has(LayerKind::ReLU);
        sweep.with_batch_norm += has(LayerKind::BatchNorm);
        ++sweep.nets;
    }
    return sweep;
}

}  // namespace knet::oracle
