#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lure/rng.hpp"
#include "lure/tensor.hpp"

namespace lure {

enum class ParamKind : std::uint8_t { Weight = 0, Bias = 1 };

/// One trainable tensor plus its gradient and momentum buffer. Entry order in
/// a ParameterSet is fixed for the lifetime of a run and defines the global
/// flat parameter index used by sensitivity masks.
struct ParamEntry {
    std::size_t layer_index = 0; // 1-based layer position
    ParamKind kind = ParamKind::Weight;
    Tensor values;
    Tensor gradient;
    Tensor momentum;
};

class ParameterSet {
public:
    ParameterSet() = default;

    void add_entry(std::size_t layer_index, ParamKind kind, Tensor values);

    std::vector<ParamEntry>& entries() { return entries_; }
    const std::vector<ParamEntry>& entries() const { return entries_; }

    std::size_t total_params() const;

    void zero_gradients();
    void zero_momentum();

private:
    std::vector<ParamEntry> entries_;
};

/// Ordered dense-layer description: [d_in, h_1, ..., h_L-1, C] with ReLU
/// between layers and raw logits at the output.
struct NetworkSpec {
    std::vector<std::size_t> layer_dims;

    std::size_t layer_count() const { return layer_dims.empty() ? 0 : layer_dims.size() - 1; }
    std::size_t input_dim() const { return layer_dims.front(); }
    std::size_t class_count() const { return layer_dims.back(); }
    /// Input width of 1-based layer l, which is also the fan-in used for
    /// initialization of that layer's weights and biases.
    std::size_t fan_in(std::size_t layer) const { return layer_dims[layer - 1]; }

    void validate() const;
};

struct OptimizerConfig {
    double learning_rate = 0.1;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::vector<std::size_t> lr_steps{20, 40};
    double lr_gamma = 0.1;
    bool weight_decay_on_bias = true;

    void validate() const;
};

/// Uniform draw on [-1/sqrt(fan_in), +1/sqrt(fan_in)] per element. The same
/// initializer backs initial construction and every reinitialization path.
Tensor init_uniform(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng);

/// Piecewise-constant step schedule: lr * gamma^(#steps <= epoch).
double lr_at(const OptimizerConfig& config, std::size_t epoch);

/// Heavy-ball SGD with decoupled-from-nothing classic weight decay:
/// g' = grad + wd * theta; buf = momentum * buf + g'; theta -= lr * buf.
void sgd_step(ParameterSet& params, const OptimizerConfig& config, double current_lr);

/// Row-wise stabilized softmax.
Tensor softmax_rows(const Tensor& logits);

struct LossResult {
    double loss = 0.0;
    Tensor dlogits; // (softmax - one_hot) / batch
};

/// Mean softmax cross-entropy over the batch, with the matching logit
/// gradient. Stabilized by per-row max subtraction.
LossResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

/// Dense feed-forward network. Forward caches activations so a matching
/// backward can run; backward overwrites parameter gradients and returns the
/// loss gradient with respect to the inputs.
class Network {
public:
    Network() = default;
    Network(NetworkSpec spec, Rng& init_rng);
    Network(NetworkSpec spec, ParameterSet params);

    const NetworkSpec& spec() const { return spec_; }
    ParameterSet& params() { return params_; }
    const ParameterSet& params() const { return params_; }

    /// Logits for a batch of inputs, shape [batch, C]. Caches activations.
    Tensor forward(const Tensor& inputs);

    /// Forward pass without touching the backward cache. Pure; safe to call
    /// on a const snapshot from several threads.
    Tensor forward_pure(const Tensor& inputs) const;

    /// Backpropagate dlogits through the cached forward pass. Overwrites all
    /// parameter gradients and returns d(loss)/d(inputs).
    Tensor backward(const Tensor& inputs, const Tensor& dlogits);

    void invalidate_cache() { forward_valid_ = false; }

private:
    NetworkSpec spec_;
    ParameterSet params_;

    bool forward_valid_ = false;
    Tensor cached_inputs_;
    std::vector<Tensor> activations_; // post-ReLU outputs of layers 1..L-1
};

/// Fresh parameter set for a spec: weights then bias per layer, drawn in
/// layer order from init_uniform with the layer's fan-in.
ParameterSet init_parameters(const NetworkSpec& spec, Rng& rng);

} // namespace lure
