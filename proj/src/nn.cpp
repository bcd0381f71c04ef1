#include "knet/nn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "knet/errors.hpp"
#include "knet/rng.hpp"
#include "text_io.hpp"

namespace knet {

namespace {

std::uint64_t next_version() {
    static std::atomic<std::uint64_t> counter{0};
    return ++counter;
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(what) + ": shape " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
    }
}

const char* token_for(LayerKind kind) {
    switch (kind) {
    case LayerKind::FullyConnected: return "FC";
    case LayerKind::ReLU: return "RELU";
    case LayerKind::BatchNorm: return "BN";
    case LayerKind::Softmax: return "SOFTMAX";
    }
    return "?";
}

bool spec_has_batch_norm(const NetSpec& spec) {
    return std::any_of(spec.begin(), spec.end(),
                       [](const LayerSpec& l) { return l.kind == LayerKind::BatchNorm; });
}

}  // namespace

std::size_t param_count(std::span<const LayerSpec> spec) {
    std::size_t total = 0;
    for (const auto& layer : spec) {
        switch (layer.kind) {
        case LayerKind::FullyConnected: total += layer.in_dim * layer.out_dim + layer.out_dim; break;
        case LayerKind::BatchNorm: total += 2 * layer.in_dim; break;
        case LayerKind::ReLU:
        case LayerKind::Softmax: break;
        }
    }
    return total;
}

std::string spec_to_tokens(std::span<const LayerSpec> spec) {
    std::string out;
    for (const auto& layer : spec) {
        if (!out.empty()) out += ' ';
        out += token_for(layer.kind);
        if (layer.kind == LayerKind::FullyConnected) {
            out += ' ' + std::to_string(layer.in_dim) + ' ' + std::to_string(layer.out_dim);
        } else if (layer.kind == LayerKind::BatchNorm) {
            out += ' ' + std::to_string(layer.in_dim);
        }
    }
    return out;
}

NetSpec spec_from_tokens(const std::string& tokens) {
    auto parts = detail::split_ws(tokens);
    NetSpec spec;
    auto read_dim = [&](std::size_t& i) {
        if (i >= parts.size()) throw ParseError("layer spec ends before a dimension");
        std::size_t v = 0;
        if (!detail::parse_int(parts[i], v)) {
            throw ParseError("bad dimension '" + std::string(parts[i]) + "' in layer spec");
        }
        ++i;
        return v;
    };
    for (std::size_t i = 0; i < parts.size();) {
        const std::string_view tok = parts[i++];
        if (tok == "FC") {
            std::size_t in = read_dim(i);
            std::size_t out = read_dim(i);
            spec.push_back(LayerSpec::fully_connected(in, out));
        } else if (tok == "BN") {
            spec.push_back(LayerSpec::batch_norm(read_dim(i)));
        } else if (tok == "RELU") {
            spec.push_back(LayerSpec::relu());
        } else if (tok == "SOFTMAX") {
            spec.push_back(LayerSpec::softmax());
        } else {
            throw ParseError("unknown layer token '" + std::string(tok) + "'");
        }
    }
    return spec;
}

std::size_t validate_spec(std::span<const LayerSpec> spec, std::size_t input_dim) {
    std::size_t width = input_dim;
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const auto& layer = spec[i];
        switch (layer.kind) {
        case LayerKind::FullyConnected:
        case LayerKind::BatchNorm:
            if (layer.in_dim == 0 || layer.out_dim == 0) {
                throw ShapeError("layer " + std::to_string(i) + " has a zero dimension");
            }
            if (width == 0 && i == 0) {
                width = layer.in_dim;
                if (input_dim == 0) input_dim = width;
            }
            if (layer.in_dim != width) {
                throw ShapeError("layer " + std::to_string(i) + " (" + token_for(layer.kind) + ") expects width " +
                                 std::to_string(layer.in_dim) + " but receives " + std::to_string(width));
            }
            width = layer.out_dim;
            break;
        case LayerKind::ReLU:
        case LayerKind::Softmax:
            if (width == 0) {
                throw ShapeError("layer " + std::to_string(i) + " needs an explicit input width");
            }
            if (layer.kind == LayerKind::Softmax && i + 1 != spec.size()) {
                throw ShapeError("softmax must be the final layer");
            }
            break;
        }
    }
    return input_dim;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw RangeError("learning_rate must be positive");
    if (batch_size == 0) throw RangeError("batch_size must be positive");
    if (!(bn_momentum > 0.0 && bn_momentum < 1.0)) throw RangeError("bn_momentum must lie in (0, 1)");
    if (!(bn_epsilon > 0.0)) throw RangeError("bn_epsilon must be positive");
    if (!(weight_init_scale > 0.0)) throw RangeError("weight_init_scale must be positive");
}

void Batch::validate() const {
    if (inputs.rows() != targets.rows()) {
        throw ShapeError("batch has " + std::to_string(inputs.rows()) + " inputs but " +
                         std::to_string(targets.rows()) + " targets");
    }
    for (std::size_t r = 0; r < targets.rows(); ++r) {
        double sum = 0.0;
        for (double v : targets.row(r)) {
            if (!(v >= 0.0)) throw ValidationError("target row " + std::to_string(r) + " has a negative entry");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw ValidationError("target row " + std::to_string(r) + " sums to " + detail::format_double(sum));
        }
    }
}

// ---------------------------------------------------------------------------

DenseNet::DenseNet(NetSpec spec, BatchNormOptions bn, std::size_t input_dim)
    : spec_(std::move(spec)), bn_options_(bn), version_(next_version()) {
    input_dim_ = validate_spec(spec_, input_dim);
    widths_.reserve(spec_.size());
    params_.resize(spec_.size());
    bn_state_.resize(spec_.size());
    std::size_t width = input_dim_;
    for (std::size_t i = 0; i < spec_.size(); ++i) {
        const auto& layer = spec_[i];
        if (layer.kind == LayerKind::FullyConnected) {
            params_[i].weight.assign(layer.in_dim * layer.out_dim, 0.0);
            params_[i].bias.assign(layer.out_dim, 0.0);
            width = layer.out_dim;
        } else if (layer.kind == LayerKind::BatchNorm) {
            params_[i].weight.assign(layer.in_dim, 1.0);
            params_[i].bias.assign(layer.in_dim, 0.0);
            bn_state_[i].running_mean.assign(layer.in_dim, 0.0);
            bn_state_[i].running_var.assign(layer.in_dim, 1.0);
        }
        widths_.push_back(width);
    }
}

DenseNet DenseNet::initialized(NetSpec spec, const TrainConfig& cfg, std::size_t input_dim) {
    DenseNet net(std::move(spec), {cfg.bn_momentum, cfg.bn_epsilon}, input_dim);
    SplitMix64 rng(cfg.seed);
    net.initialize(cfg.weight_init_scale, rng);
    return net;
}

void DenseNet::initialize(double weight_init_scale, SplitMix64& rng) {
    for (std::size_t i = 0; i < spec_.size(); ++i) {
        if (spec_[i].kind != LayerKind::FullyConnected) continue;
        const double s = weight_init_scale / std::sqrt(static_cast<double>(spec_[i].in_dim));
        for (double& w : params_[i].weight) w = rng.uniform(-s, s);
        std::fill(params_[i].bias.begin(), params_[i].bias.end(), 0.0);
    }
    touch();
}

LayerParams& DenseNet::mutable_layer_params(std::size_t layer) {
    touch();
    return params_.at(layer);
}

BatchNormState& DenseNet::mutable_batch_norm_state(std::size_t layer) {
    touch();
    return bn_state_.at(layer);
}

bool DenseNet::has_batch_norm() const { return spec_has_batch_norm(spec_); }

void DenseNet::touch() { version_ = next_version(); }

void DenseNet::check_input(const Matrix& inputs) const {
    if (spec_.empty()) throw StateError("network has no layers");
    if (inputs.cols() != input_dim_) {
        throw ShapeError("network expects input width " + std::to_string(input_dim_) + ", got " +
                         std::to_string(inputs.cols()));
    }
}

ForwardResult DenseNet::forward(const Matrix& inputs, Mode mode) {
    check_input(inputs);
    ForwardResult result;
    if (mode == Mode::Train) {
        if (inputs.rows() < 2 && has_batch_norm()) {
            throw DegenerateBatchError("batch normalization needs at least 2 samples in train mode");
        }
        result.outputs = run(inputs, spec_.size(), Mode::Train, &result.tape, &bn_state_);
        touch();
        result.tape.version_ = version_;
    } else {
        result.outputs = run(inputs, spec_.size(), Mode::Infer, nullptr, nullptr);
        result.tape.mode_ = Mode::Infer;
        result.tape.version_ = version_;
        result.tape.batch_size_ = inputs.rows();
    }
    return result;
}

Matrix DenseNet::infer(const Matrix& inputs) const {
    check_input(inputs);
    return run(inputs, spec_.size(), Mode::Infer, nullptr, nullptr);
}

Matrix DenseNet::infer_until(const Matrix& inputs, std::size_t end) const {
    check_input(inputs);
    if (end > spec_.size()) throw RangeError("layer index beyond network depth");
    return run(inputs, end, Mode::Infer, nullptr, nullptr);
}

Matrix DenseNet::run(const Matrix& inputs, std::size_t end, Mode mode, Tape* tape,
                     std::vector<BatchNormState>* running) const {
    const std::size_t batch = inputs.rows();
    if (tape) {
        tape->layers_.assign(end, {});
        tape->mode_ = mode;
        tape->batch_size_ = batch;
    }
    Matrix x = inputs;
    for (std::size_t li = 0; li < end; ++li) {
        const LayerSpec& layer = spec_[li];
        const LayerParams& p = params_[li];
        Tape::LayerCache* cache = tape ? &tape->layers_[li] : nullptr;
        if (cache) cache->input = x;
        switch (layer.kind) {
        case LayerKind::FullyConnected: {
            Matrix y(batch, layer.out_dim);
            for (std::size_t b = 0; b < batch; ++b) {
                auto in = x.row(b);
                auto out = y.row(b);
                for (std::size_t o = 0; o < layer.out_dim; ++o) {
                    const double* w = p.weight.data() + o * layer.in_dim;
                    double acc = p.bias[o];
                    for (std::size_t i = 0; i < layer.in_dim; ++i) acc += w[i] * in[i];
                    out[o] = acc;
                }
            }
            x = std::move(y);
            break;
        }
        case LayerKind::ReLU:
            for (double& v : x.values()) v = v > 0.0 ? v : 0.0;
            break;
        case LayerKind::BatchNorm: {
            const std::size_t dim = layer.in_dim;
            const double eps = bn_options_.epsilon;
            if (mode == Mode::Train) {
                std::vector<double> mean(dim, 0.0), var(dim, 0.0), inv_std(dim);
                for (std::size_t b = 0; b < batch; ++b) {
                    for (std::size_t j = 0; j < dim; ++j) mean[j] += x(b, j);
                }
                for (double& m : mean) m /= static_cast<double>(batch);
                for (std::size_t b = 0; b < batch; ++b) {
                    for (std::size_t j = 0; j < dim; ++j) {
                        const double d = x(b, j) - mean[j];
                        var[j] += d * d;
                    }
                }
                for (double& v : var) v /= static_cast<double>(batch);
                for (std::size_t j = 0; j < dim; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + eps);
                Matrix normalized(batch, dim);
                for (std::size_t b = 0; b < batch; ++b) {
                    for (std::size_t j = 0; j < dim; ++j) {
                        normalized(b, j) = (x(b, j) - mean[j]) * inv_std[j];
                        x(b, j) = p.weight[j] * normalized(b, j) + p.bias[j];
                    }
                }
                auto& state = (*running)[li];
                const double m = bn_options_.momentum;
                for (std::size_t j = 0; j < dim; ++j) {
                    state.running_mean[j] = m * state.running_mean[j] + (1.0 - m) * mean[j];
                    state.running_var[j] = m * state.running_var[j] + (1.0 - m) * var[j];
                }
                if (cache) {
                    cache->normalized = std::move(normalized);
                    cache->inv_std = std::move(inv_std);
                }
            } else {
                const auto& state = bn_state_[li];
                for (std::size_t b = 0; b < batch; ++b) {
                    for (std::size_t j = 0; j < dim; ++j) {
                        const double xhat = (x(b, j) - state.running_mean[j]) / std::sqrt(state.running_var[j] + eps);
                        x(b, j) = p.weight[j] * xhat + p.bias[j];
                    }
                }
            }
            break;
        }
        case LayerKind::Softmax:
            for (std::size_t b = 0; b < batch; ++b) {
                auto r = x.row(b);
                const double mx = *std::max_element(r.begin(), r.end());
                double sum = 0.0;
                for (double& v : r) {
                    v = std::exp(v - mx);
                    sum += v;
                }
                for (double& v : r) v /= sum;
            }
            if (cache) cache->output = x;
            break;
        }
    }
    return x;
}

void DenseNet::check_tape(const Tape& tape) const {
    if (tape.empty()) throw StateError("backward called without a recorded forward pass");
    if (tape.mode_ != Mode::Train) throw StateError("backward needs a tape recorded in train mode");
    if (tape.version_ != version_ || tape.layers_.size() != spec_.size()) {
        throw StateError("tape is stale: the network changed after the forward pass");
    }
}

Gradients DenseNet::backward(const Tape& tape, const Matrix& output_grad) const {
    check_tape(tape);
    if (output_grad.rows() != tape.batch_size_ || output_grad.cols() != output_dim()) {
        throw ShapeError("output gradient shape does not match the forward pass");
    }
    return backward_range(tape, output_grad, spec_.size());
}

Gradients DenseNet::backward_from_logits(const Tape& tape, const Matrix& logit_grad) const {
    check_tape(tape);
    if (spec_.back().kind != LayerKind::Softmax) {
        throw StateError("backward_from_logits needs a softmax-terminated network");
    }
    if (logit_grad.rows() != tape.batch_size_ || logit_grad.cols() != output_dim()) {
        throw ShapeError("logit gradient shape does not match the forward pass");
    }
    return backward_range(tape, logit_grad, spec_.size() - 1);
}

Gradients DenseNet::backward_range(const Tape& tape, Matrix grad, std::size_t top) const {
    Gradients grads = zero_gradients();
    const std::size_t batch = tape.batch_size_;
    for (std::size_t li = top; li-- > 0;) {
        const LayerSpec& layer = spec_[li];
        const auto& cache = tape.layers_[li];
        switch (layer.kind) {
        case LayerKind::FullyConnected: {
            const auto& w = params_[li].weight;
            auto& gw = grads[li].weight;
            auto& gb = grads[li].bias;
            Matrix grad_in(batch, layer.in_dim);
            for (std::size_t b = 0; b < batch; ++b) {
                auto g = grad.row(b);
                auto x = cache.input.row(b);
                auto gi = grad_in.row(b);
                for (std::size_t o = 0; o < layer.out_dim; ++o) {
                    const double go = g[o];
                    if (go == 0.0) continue;
                    gb[o] += go;
                    double* gwo = gw.data() + o * layer.in_dim;
                    const double* wo = w.data() + o * layer.in_dim;
                    for (std::size_t i = 0; i < layer.in_dim; ++i) {
                        gwo[i] += go * x[i];
                        gi[i] += go * wo[i];
                    }
                }
            }
            grad = std::move(grad_in);
            break;
        }
        case LayerKind::ReLU: {
            auto in = cache.input.values();
            auto g = grad.values();
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (!(in[i] > 0.0)) g[i] = 0.0;
            }
            break;
        }
        case LayerKind::BatchNorm: {
            const std::size_t dim = layer.in_dim;
            const auto& gamma = params_[li].weight;
            auto& ggamma = grads[li].weight;
            auto& gbeta = grads[li].bias;
            const double n = static_cast<double>(batch);
            for (std::size_t j = 0; j < dim; ++j) {
                double sum_g = 0.0, sum_g_xhat = 0.0;
                for (std::size_t b = 0; b < batch; ++b) {
                    sum_g += grad(b, j);
                    sum_g_xhat += grad(b, j) * cache.normalized(b, j);
                }
                ggamma[j] = sum_g_xhat;
                gbeta[j] = sum_g;
                // dx = gamma * inv_std / n * (n*g - sum(g) - xhat*sum(g*xhat))
                const double scale = gamma[j] * cache.inv_std[j] / n;
                for (std::size_t b = 0; b < batch; ++b) {
                    grad(b, j) = scale * (n * grad(b, j) - sum_g - cache.normalized(b, j) * sum_g_xhat);
                }
            }
            break;
        }
        case LayerKind::Softmax: {
            for (std::size_t b = 0; b < batch; ++b) {
                auto p = cache.output.row(b);
                auto g = grad.row(b);
                double dot = 0.0;
                for (std::size_t c = 0; c < g.size(); ++c) dot += g[c] * p[c];
                for (std::size_t c = 0; c < g.size(); ++c) g[c] = p[c] * (g[c] - dot);
            }
            break;
        }
        }
    }
    return grads;
}

Gradients DenseNet::zero_gradients() const {
    Gradients grads(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
        grads[i].weight.assign(params_[i].weight.size(), 0.0);
        grads[i].bias.assign(params_[i].bias.size(), 0.0);
    }
    return grads;
}

void DenseNet::apply_gradients(const Gradients& grads, double learning_rate) {
    if (grads.size() != params_.size()) throw ShapeError("gradients cover a different number of layers");
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (grads[i].weight.size() != params_[i].weight.size() || grads[i].bias.size() != params_[i].bias.size()) {
            throw ShapeError("gradient for layer " + std::to_string(i) + " is misaligned with its parameters");
        }
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
        for (std::size_t k = 0; k < params_[i].weight.size(); ++k) {
            params_[i].weight[k] -= learning_rate * grads[i].weight[k];
        }
        for (std::size_t k = 0; k < params_[i].bias.size(); ++k) {
            params_[i].bias[k] -= learning_rate * grads[i].bias[k];
        }
    }
    touch();
}

// ---------------------------------------------------------------------------
// Serialization

void DenseNet::save(std::ostream& out) const {
    auto write_tensor = [&](const std::string& name, const std::vector<double>& values) {
        out << name << ' ' << values.size();
        for (double v : values) out << ' ' << detail::format_double(v);
        out << '\n';
    };
    out << "DENSENET v1\n" << spec_to_tokens(spec_) << '\n';
    bool any_bn = false;
    for (std::size_t i = 0; i < spec_.size(); ++i) {
        const std::string prefix = "L" + std::to_string(i) + ".";
        if (spec_[i].kind == LayerKind::FullyConnected) {
            write_tensor(prefix + "weight", params_[i].weight);
            write_tensor(prefix + "bias", params_[i].bias);
        } else if (spec_[i].kind == LayerKind::BatchNorm) {
            any_bn = true;
            write_tensor(prefix + "gamma", params_[i].weight);
            write_tensor(prefix + "beta", params_[i].bias);
            write_tensor(prefix + "running_mean", bn_state_[i].running_mean);
            write_tensor(prefix + "running_var", bn_state_[i].running_var);
        }
    }
    if (any_bn) {
        write_tensor("bn.momentum", {bn_options_.momentum});
        write_tensor("bn.epsilon", {bn_options_.epsilon});
    }
}

DenseNet DenseNet::load(std::istream& in) {
    detail::LineReader reader(in, "model");
    std::string line;
    if (!reader.next(line)) throw EmptyInputError("model stream is empty");
    if (line != "DENSENET v1") reader.fail("expected header 'DENSENET v1'");
    if (!reader.next(line)) reader.fail("missing layer spec line");
    NetSpec spec;
    try {
        spec = spec_from_tokens(line);
    } catch (const ParseError& e) {
        reader.fail(e.what());
    }
    if (spec.empty()) reader.fail("empty layer spec");

    std::map<std::string, std::vector<double>, std::less<>> tensors;
    while (reader.next(line)) {
        auto parts = detail::split_ws(line);
        if (parts.empty()) continue;
        if (parts.size() < 2) reader.fail("tensor line needs a name and a length");
        std::size_t len = 0;
        if (!detail::parse_int(parts[1], len)) reader.fail("bad tensor length");
        if (parts.size() != len + 2) {
            reader.fail("tensor '" + std::string(parts[0]) + "' declares " + std::to_string(len) + " values, found " +
                        std::to_string(parts.size() - 2));
        }
        std::vector<double> values(len);
        for (std::size_t k = 0; k < len; ++k) {
            if (!detail::parse_double(parts[k + 2], values[k])) reader.fail("bad number '" + std::string(parts[k + 2]) + "'");
        }
        if (!tensors.emplace(std::string(parts[0]), std::move(values)).second) {
            reader.fail("duplicate tensor '" + std::string(parts[0]) + "'");
        }
    }

    auto take = [&](const std::string& name, std::size_t expected) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw ParseError("model: missing tensor '" + name + "'");
        if (it->second.size() != expected) {
            throw ParseError("model: tensor '" + name + "' has " + std::to_string(it->second.size()) +
                             " values, expected " + std::to_string(expected));
        }
        auto values = std::move(it->second);
        tensors.erase(it);
        return values;
    };

    BatchNormOptions bn;
    if (spec_has_batch_norm(spec)) {
        bn.momentum = take("bn.momentum", 1)[0];
        bn.epsilon = take("bn.epsilon", 1)[0];
    }
    DenseNet net(spec, bn);
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const std::string prefix = "L" + std::to_string(i) + ".";
        const auto& layer = spec[i];
        if (layer.kind == LayerKind::FullyConnected) {
            net.params_[i].weight = take(prefix + "weight", layer.in_dim * layer.out_dim);
            net.params_[i].bias = take(prefix + "bias", layer.out_dim);
        } else if (layer.kind == LayerKind::BatchNorm) {
            net.params_[i].weight = take(prefix + "gamma", layer.in_dim);
            net.params_[i].bias = take(prefix + "beta", layer.in_dim);
            net.bn_state_[i].running_mean = take(prefix + "running_mean", layer.in_dim);
            net.bn_state_[i].running_var = take(prefix + "running_var", layer.in_dim);
        }
    }
    if (!tensors.empty()) throw ParseError("model: unexpected tensor '" + tensors.begin()->first + "'");
    net.touch();
    return net;
}

void DenseNet::save_file(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    save(out);
    if (!out) throw IoError("failed writing " + path.string());
}

DenseNet DenseNet::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    return load(in);
}

// ---------------------------------------------------------------------------
// Losses and optimizer

double loss_ce(const Matrix& pred, const Matrix& target) {
    require_same_shape(pred, target, "loss_ce");
    if (pred.rows() == 0) return 0.0;
    double total = 0.0;
    for (std::size_t r = 0; r < pred.rows(); ++r) {
        auto p = pred.row(r);
        auto t = target.row(r);
        for (std::size_t c = 0; c < p.size(); ++c) {
            if (t[c] != 0.0) total -= t[c] * std::log(std::max(p[c], kLogEpsilon));
        }
    }
    return total / static_cast<double>(pred.rows());
}

double loss_kl(const Matrix& pred, const Matrix& target) {
    require_same_shape(pred, target, "loss_kl");
    if (pred.rows() == 0) return 0.0;
    double total = 0.0;
    for (std::size_t r = 0; r < pred.rows(); ++r) {
        auto p = pred.row(r);
        auto t = target.row(r);
        for (std::size_t c = 0; c < p.size(); ++c) {
            if (t[c] > 0.0) total += t[c] * (std::log(t[c]) - std::log(std::max(p[c], kLogEpsilon)));
        }
    }
    return total / static_cast<double>(pred.rows());
}

double loss(LossKind kind, const Matrix& pred, const Matrix& target) {
    return kind == LossKind::CrossEntropy ? loss_ce(pred, target) : loss_kl(pred, target);
}

Matrix loss_gradient(LossKind, const Matrix& pred, const Matrix& target) {
    require_same_shape(pred, target, "loss_gradient");
    Matrix grad(pred.rows(), pred.cols());
    const double n = static_cast<double>(pred.rows());
    for (std::size_t r = 0; r < pred.rows(); ++r) {
        for (std::size_t c = 0; c < pred.cols(); ++c) {
            const double p = pred(r, c);
            // Below the clipping floor the loss is flat in p.
            grad(r, c) = p > kLogEpsilon ? -target(r, c) / (n * p) : 0.0;
        }
    }
    return grad;
}

Matrix softmax_logit_gradient(const Matrix& pred, const Matrix& target) {
    require_same_shape(pred, target, "softmax_logit_gradient");
    Matrix grad(pred.rows(), pred.cols());
    const double n = static_cast<double>(pred.rows());
    auto p = pred.values();
    auto t = target.values();
    auto g = grad.values();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = (p[i] - t[i]) / n;
    return grad;
}

DenseNet sgd_step(DenseNet net, const Gradients& grads, double learning_rate) {
    net.apply_gradients(grads, learning_rate);
    return net;
}

double train_on_batch(DenseNet& net, const Batch& batch, LossKind kind, double learning_rate) {
    if (batch.targets.cols() != net.output_dim() || batch.inputs.rows() != batch.targets.rows()) {
        throw ShapeError("batch targets do not match the network output");
    }
    auto [pred, tape] = net.forward(batch.inputs, Mode::Train);
    const double value = loss(kind, pred, batch.targets);
    if (!std::isfinite(value)) throw NumericError("training loss is not finite");
    Gradients grads = net.backward_from_logits(tape, softmax_logit_gradient(pred, batch.targets));
    net.apply_gradients(grads, learning_rate);
    return value;
}

}  // namespace knet
