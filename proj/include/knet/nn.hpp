#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "knet/matrix.hpp"

namespace knet {

class SplitMix64;

enum class LayerKind { FullyConnected, ReLU, BatchNorm, Softmax };

/// One layer of a dense network. ReLU and Softmax take their width from the
/// preceding layer, so only FullyConnected and BatchNorm carry dimensions.
struct LayerSpec {
    LayerKind kind = LayerKind::ReLU;
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;

    static LayerSpec fully_connected(std::size_t in, std::size_t out) {
        return {LayerKind::FullyConnected, in, out};
    }
    static LayerSpec relu() { return {LayerKind::ReLU, 0, 0}; }
    static LayerSpec batch_norm(std::size_t dim) { return {LayerKind::BatchNorm, dim, dim}; }
    static LayerSpec softmax() { return {LayerKind::Softmax, 0, 0}; }

    bool operator==(const LayerSpec&) const = default;
};

using NetSpec = std::vector<LayerSpec>;

/// Closed-form trainable parameter count: FC contributes in*out + out, BN
/// contributes 2*dim (running statistics are state, not parameters).
std::size_t param_count(std::span<const LayerSpec> spec);

/// Space-separated token form, e.g. "FC 257 16 RELU BN 16 FC 16 10 SOFTMAX".
std::string spec_to_tokens(std::span<const LayerSpec> spec);
NetSpec spec_from_tokens(const std::string& tokens);

/// Checks dimension chaining and softmax placement; returns the input width.
/// A spec whose first layer is ReLU or Softmax needs an explicit input width.
std::size_t validate_spec(std::span<const LayerSpec> spec, std::size_t input_dim = 0);

enum class Mode { Train, Infer };
enum class LossKind { CrossEntropy, KLDivergence };

/// Floor applied to predictions before taking logarithms in both losses.
inline constexpr double kLogEpsilon = 1e-12;

struct TrainConfig {
    double learning_rate = 0.05;
    std::size_t batch_size = 32;
    std::size_t epochs = 100;  // 0 leaves the initialization untouched
    std::uint64_t seed = 0;
    LossKind loss = LossKind::CrossEntropy;
    double bn_momentum = 0.9;
    double bn_epsilon = 1e-5;
    double weight_init_scale = 1.0;

    /// Throws RangeError naming the first offending field.
    void validate() const;
};

/// Inputs with their target distributions; every target row is a probability vector.
struct Batch {
    Matrix inputs;
    Matrix targets;

    void validate() const;
};

/// Trainable tensors of one layer. FC: weight is out x in row-major, bias has
/// out entries. BN: weight holds gamma, bias holds beta. Other layers: empty.
struct LayerParams {
    std::vector<double> weight;
    std::vector<double> bias;

    bool operator==(const LayerParams&) const = default;
};

using Gradients = std::vector<LayerParams>;

struct BatchNormState {
    std::vector<double> running_mean;
    std::vector<double> running_var;

    bool operator==(const BatchNormState&) const = default;
};

class DenseNet;

struct BatchNormOptions {
    double momentum = 0.9;
    double epsilon = 1e-5;
};

/// Activations cached by a forward pass, consumed by DenseNet::backward.
class Tape {
public:
    Tape() = default;

    bool empty() const noexcept { return layers_.empty(); }
    Mode mode() const noexcept { return mode_; }
    std::size_t batch_size() const noexcept { return batch_size_; }

private:
    friend class DenseNet;

    struct LayerCache {
        Matrix input;
        Matrix normalized;            // BN x_hat
        std::vector<double> inv_std;  // BN 1/sqrt(var + eps)
        Matrix output;                // Softmax probabilities
    };

    std::uint64_t version_ = 0;
    Mode mode_ = Mode::Infer;
    std::size_t batch_size_ = 0;
    std::vector<LayerCache> layers_;
};

struct ForwardResult {
    Matrix outputs;
    Tape tape;
};

/// Sequential dense network with exact analytic gradients.
///
/// Parameters live per layer in LayerParams; batch-norm running statistics live
/// beside them in BatchNormState. Any mutation of parameters or running
/// statistics invalidates previously recorded tapes.
class DenseNet {
public:
    DenseNet() = default;

    /// Zero weights, unit gamma, zero beta, running mean 0 and variance 1.
    explicit DenseNet(NetSpec spec, BatchNormOptions bn = {}, std::size_t input_dim = 0);

    /// Weights uniform in [-s, s] with s = weight_init_scale / sqrt(in_dim), biases zero.
    static DenseNet initialized(NetSpec spec, const TrainConfig& cfg, std::size_t input_dim = 0);
    void initialize(double weight_init_scale, SplitMix64& rng);

    const NetSpec& spec() const noexcept { return spec_; }
    std::size_t num_layers() const noexcept { return spec_.size(); }
    std::size_t input_dim() const noexcept { return input_dim_; }
    std::size_t output_dim() const noexcept { return widths_.empty() ? 0 : widths_.back(); }
    /// Width of the activation leaving layer i.
    std::size_t width_after(std::size_t layer) const { return widths_.at(layer); }
    std::size_t param_count() const { return knet::param_count(spec_); }
    const BatchNormOptions& batch_norm_options() const noexcept { return bn_options_; }
    bool has_batch_norm() const;

    const std::vector<LayerParams>& params() const noexcept { return params_; }
    const LayerParams& layer_params(std::size_t layer) const { return params_.at(layer); }
    LayerParams& mutable_layer_params(std::size_t layer);
    const BatchNormState& batch_norm_state(std::size_t layer) const { return bn_state_.at(layer); }
    BatchNormState& mutable_batch_norm_state(std::size_t layer);

    /// Train mode normalizes with batch statistics and updates running
    /// statistics; Infer mode leaves the net untouched.
    ForwardResult forward(const Matrix& inputs, Mode mode);

    /// Infer-mode forward pass. Pure.
    Matrix infer(const Matrix& inputs) const;

    /// Infer-mode activations entering layer `end` (end == num_layers() gives the output).
    Matrix infer_until(const Matrix& inputs, std::size_t end) const;

    /// Gradients of the loss with respect to every parameter, given the loss
    /// gradient at the network output.
    Gradients backward(const Tape& tape, const Matrix& output_grad) const;

    /// As backward, but starts from the gradient at the logits entering the
    /// final Softmax layer (the fused softmax + cross-entropy path).
    Gradients backward_from_logits(const Tape& tape, const Matrix& logit_grad) const;

    /// theta <- theta - lr * grad. Running statistics are untouched.
    void apply_gradients(const Gradients& grads, double learning_rate);

    Gradients zero_gradients() const;

    void save(std::ostream& out) const;
    static DenseNet load(std::istream& in);
    void save_file(const std::filesystem::path& path) const;
    static DenseNet load_file(const std::filesystem::path& path);

    bool operator==(const DenseNet& other) const {
        return spec_ == other.spec_ && input_dim_ == other.input_dim_ && params_ == other.params_ &&
               bn_state_ == other.bn_state_;
    }

private:
    Matrix run(const Matrix& inputs, std::size_t end, Mode mode, Tape* tape,
               std::vector<BatchNormState>* running) const;
    Gradients backward_range(const Tape& tape, Matrix grad, std::size_t top) const;
    void check_input(const Matrix& inputs) const;
    void check_tape(const Tape& tape) const;
    void touch();

    NetSpec spec_;
    std::vector<std::size_t> widths_;
    std::size_t input_dim_ = 0;
    BatchNormOptions bn_options_;
    std::vector<LayerParams> params_;
    std::vector<BatchNormState> bn_state_;
    std::uint64_t version_ = 0;
};

/// Mean over rows of -sum_c target_c * log(max(pred_c, eps)).
double loss_ce(const Matrix& pred, const Matrix& target);

/// Mean over rows of sum_c target_c * log(target_c / max(pred_c, eps)); zero targets contribute 0.
double loss_kl(const Matrix& pred, const Matrix& target);

double loss(LossKind kind, const Matrix& pred, const Matrix& target);

/// dLoss/dPred for either loss (both share -target / (batch * pred)).
Matrix loss_gradient(LossKind kind, const Matrix& pred, const Matrix& target);

/// (pred - target) / batch_size: the loss gradient at the logits for a
/// softmax output under either loss.
Matrix softmax_logit_gradient(const Matrix& pred, const Matrix& target);

/// Returns a copy of `net` after one plain SGD step.
DenseNet sgd_step(DenseNet net, const Gradients& grads, double learning_rate);

/// One fused forward/backward/SGD step on a softmax-terminated net; returns the batch loss.
double train_on_batch(DenseNet& net, const Batch& batch, LossKind loss, double learning_rate);

}  // namespace knet
