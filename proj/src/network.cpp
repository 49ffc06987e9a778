#include "lure/network.hpp"

#include <algorithm>
#include <cmath>

#include "lure/errors.hpp"

namespace lure {

void ParameterSet::add_entry(std::size_t layer_index, ParamKind kind, Tensor values) {
    ParamEntry e;
    e.layer_index = layer_index;
    e.kind = kind;
    e.gradient = Tensor::zeros(values.shape);
    e.momentum = Tensor::zeros(values.shape);
    e.values = std::move(values);
    entries_.push_back(std::move(e));
}

std::size_t ParameterSet::total_params() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.values.numel();
    return n;
}

void ParameterSet::zero_gradients() {
    for (auto& e : entries_) std::fill(e.gradient.data.begin(), e.gradient.data.end(), 0.0);
}

void ParameterSet::zero_momentum() {
    for (auto& e : entries_) std::fill(e.momentum.data.begin(), e.momentum.data.end(), 0.0);
}

void NetworkSpec::validate() const {
    if (layer_dims.size() < 3) {
        throw ConfigError("network spec needs at least one hidden layer (got " +
                          std::to_string(layer_dims.size()) + " dims)");
    }
    for (std::size_t d : layer_dims) {
        if (d == 0) throw ConfigError("network spec contains a zero layer dimension");
    }
}

void OptimizerConfig::validate() const {
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0, 1)");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
    if (lr_gamma <= 0.0 || lr_gamma > 1.0) throw ConfigError("lr_gamma must be in (0, 1]");
    for (std::size_t i = 1; i < lr_steps.size(); ++i) {
        if (lr_steps[i] <= lr_steps[i - 1]) throw ConfigError("lr_steps must be strictly increasing");
    }
}

Tensor init_uniform(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
    if (fan_in == 0) throw ConfigError("init_uniform: fan_in must be >= 1");
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = rng.uniform(-bound, bound);
    return t;
}

double lr_at(const OptimizerConfig& config, std::size_t epoch) {
    double lr = config.learning_rate;
    for (std::size_t step : config.lr_steps) {
        if (step <= epoch) lr *= config.lr_gamma;
    }
    return lr;
}

void sgd_step(ParameterSet& params, const OptimizerConfig& config, double current_lr) {
    for (auto& e : params.entries()) {
        const bool decay = config.weight_decay_on_bias || e.kind == ParamKind::Weight;
        const double wd = decay ? config.weight_decay : 0.0;
        double* theta = e.values.data.data();
        double* grad = e.gradient.data.data();
        double* buf = e.momentum.data.data();
        const std::size_t n = e.values.numel();
        for (std::size_t i = 0; i < n; ++i) {
            const double g = grad[i] + wd * theta[i];
            buf[i] = config.momentum * buf[i] + g;
            theta[i] -= current_lr * buf[i];
            if (!std::isfinite(theta[i])) {
                throw InputError("sgd_step produced a non-finite parameter (layer " +
                                 std::to_string(e.layer_index) + ")");
            }
        }
    }
}

Tensor softmax_rows(const Tensor& logits) {
    const std::size_t n = logits.rows(), c = logits.cols();
    Tensor out = Tensor::zeros(logits.shape);
    for (std::size_t i = 0; i < n; ++i) {
        double mx = logits.at(i, 0);
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, logits.at(i, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            out.at(i, j) = std::exp(logits.at(i, j) - mx);
            sum += out.at(i, j);
        }
        for (std::size_t j = 0; j < c; ++j) out.at(i, j) /= sum;
    }
    return out;
}

LossResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    const std::size_t n = logits.rows(), c = logits.cols();
    if (n == 0) throw InputError("softmax_cross_entropy: empty batch");
    if (labels.size() != n) throw InputError("softmax_cross_entropy: label count does not match batch");
    LossResult res;
    res.dlogits = Tensor::zeros(logits.shape);
    const double inv_n = 1.0 / static_cast<double>(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= c) {
            throw InputError("label " + std::to_string(y) + " out of range [0, " + std::to_string(c) +
                             ") at row " + std::to_string(i));
        }
        double mx = logits.at(i, 0);
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, logits.at(i, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) sum += std::exp(logits.at(i, j) - mx);
        total += -(logits.at(i, static_cast<std::size_t>(y)) - mx - std::log(sum));
        for (std::size_t j = 0; j < c; ++j) {
            const double p = std::exp(logits.at(i, j) - mx) / sum;
            res.dlogits.at(i, j) = (p - (static_cast<std::size_t>(y) == j ? 1.0 : 0.0)) * inv_n;
        }
    }
    res.loss = total * inv_n;
    return res;
}

namespace {

// out[n x p] = a[n x m] * b[m x p], accumulated in a cache-friendly order.
void matmul(const Tensor& a, const Tensor& b, Tensor& out) {
    const std::size_t n = a.rows(), m = a.cols(), p = b.cols();
    std::fill(out.data.begin(), out.data.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* arow = a.data.data() + i * m;
        double* orow = out.data.data() + i * p;
        for (std::size_t k = 0; k < m; ++k) {
            const double av = arow[k];
            if (av == 0.0) continue;
            const double* brow = b.data.data() + k * p;
            for (std::size_t j = 0; j < p; ++j) orow[j] += av * brow[j];
        }
    }
}

} // namespace

Network::Network(NetworkSpec spec, Rng& init_rng) : spec_(std::move(spec)) {
    spec_.validate();
    params_ = init_parameters(spec_, init_rng);
}

Network::Network(NetworkSpec spec, ParameterSet params)
    : spec_(std::move(spec)), params_(std::move(params)) {
    spec_.validate();
    std::size_t idx = 0;
    for (std::size_t l = 1; l <= spec_.layer_count(); ++l) {
        for (ParamKind kind : {ParamKind::Weight, ParamKind::Bias}) {
            if (idx >= params_.entries().size()) throw ConfigError("parameter set too short for spec");
            const ParamEntry& e = params_.entries()[idx++];
            const std::vector<std::size_t> want =
                kind == ParamKind::Weight
                    ? std::vector<std::size_t>{spec_.layer_dims[l - 1], spec_.layer_dims[l]}
                    : std::vector<std::size_t>{spec_.layer_dims[l]};
            if (e.layer_index != l || e.kind != kind || e.values.shape != want) {
                throw ConfigError("parameter entry " + std::to_string(idx - 1) +
                                  " does not match spec layer " + std::to_string(l));
            }
        }
    }
    if (idx != params_.entries().size()) throw ConfigError("parameter set has extra entries");
}

ParameterSet init_parameters(const NetworkSpec& spec, Rng& rng) {
    spec.validate();
    ParameterSet params;
    for (std::size_t l = 1; l <= spec.layer_count(); ++l) {
        const std::size_t in = spec.layer_dims[l - 1];
        const std::size_t out = spec.layer_dims[l];
        params.add_entry(l, ParamKind::Weight, init_uniform({in, out}, in, rng));
        params.add_entry(l, ParamKind::Bias, init_uniform({out}, in, rng));
    }
    return params;
}

namespace {

void forward_layers(const NetworkSpec& spec, const ParameterSet& params, const Tensor& inputs,
                    std::vector<Tensor>* cache, Tensor& logits) {
    const std::size_t batch = inputs.rows();
    if (inputs.cols() != spec.input_dim()) {
        throw ConfigError("forward: input width " + std::to_string(inputs.cols()) +
                          " does not match layer 1 fan-in " + std::to_string(spec.input_dim()));
    }
    const Tensor* act = &inputs;
    Tensor cur;
    for (std::size_t l = 1; l <= spec.layer_count(); ++l) {
        const ParamEntry& w = params.entries()[2 * (l - 1)];
        const ParamEntry& b = params.entries()[2 * (l - 1) + 1];
        const std::size_t out_dim = spec.layer_dims[l];
        Tensor z = Tensor::zeros({batch, out_dim});
        matmul(*act, w.values, z);
        for (std::size_t i = 0; i < batch; ++i) {
            for (std::size_t j = 0; j < out_dim; ++j) z.at(i, j) += b.values.data[j];
        }
        if (l < spec.layer_count()) {
            for (double& v : z.data) v = v > 0.0 ? v : 0.0;
            if (cache) cache->push_back(z);
            cur = std::move(z);
            act = &cur;
        } else {
            logits = std::move(z);
        }
    }
}

} // namespace

Tensor Network::forward(const Tensor& inputs) {
    activations_.clear();
    Tensor logits;
    forward_layers(spec_, params_, inputs, &activations_, logits);
    cached_inputs_ = inputs;
    forward_valid_ = true;
    return logits;
}

Tensor Network::forward_pure(const Tensor& inputs) const {
    Tensor logits;
    forward_layers(spec_, params_, inputs, nullptr, logits);
    return logits;
}

Tensor Network::backward(const Tensor& inputs, const Tensor& dlogits) {
    if (!forward_valid_) throw ProtocolError("backward called without a matching forward");
    if (inputs.shape != cached_inputs_.shape || inputs.data != cached_inputs_.data) {
        throw ProtocolError("backward inputs differ from the cached forward inputs");
    }
    const std::size_t batch = inputs.rows();
    const std::size_t L = spec_.layer_count();

    Tensor delta = dlogits; // [batch, dim_l]
    Tensor dinputs;
    for (std::size_t l = L; l >= 1; --l) {
        ParamEntry& w = params_.entries()[2 * (l - 1)];
        ParamEntry& b = params_.entries()[2 * (l - 1) + 1];
        const Tensor& in_act = (l == 1) ? inputs : activations_[l - 2];
        const std::size_t in_dim = spec_.layer_dims[l - 1];
        const std::size_t out_dim = spec_.layer_dims[l];

        // dW = in_act^T * delta; db = column sums of delta
        std::fill(w.gradient.data.begin(), w.gradient.data.end(), 0.0);
        std::fill(b.gradient.data.begin(), b.gradient.data.end(), 0.0);
        for (std::size_t i = 0; i < batch; ++i) {
            const double* arow = in_act.data.data() + i * in_dim;
            const double* drow = delta.data.data() + i * out_dim;
            for (std::size_t k = 0; k < in_dim; ++k) {
                const double av = arow[k];
                if (av == 0.0) continue;
                double* grow = w.gradient.data.data() + k * out_dim;
                for (std::size_t j = 0; j < out_dim; ++j) grow[j] += av * drow[j];
            }
            for (std::size_t j = 0; j < out_dim; ++j) b.gradient.data[j] += drow[j];
        }

        // d(in_act) = delta * W^T, gated by the ReLU derivative for l > 1
        Tensor dprev = Tensor::zeros({batch, in_dim});
        for (std::size_t i = 0; i < batch; ++i) {
            const double* drow = delta.data.data() + i * out_dim;
            double* prow = dprev.data.data() + i * in_dim;
            for (std::size_t k = 0; k < in_dim; ++k) {
                const double* wrow = w.values.data.data() + k * out_dim;
                double acc = 0.0;
                for (std::size_t j = 0; j < out_dim; ++j) acc += drow[j] * wrow[j];
                prow[k] = acc;
            }
        }
        if (l > 1) {
            const Tensor& gate = activations_[l - 2];
            for (std::size_t i = 0; i < dprev.data.size(); ++i) {
                if (gate.data[i] <= 0.0) dprev.data[i] = 0.0;
            }
            delta = std::move(dprev);
        } else {
            dinputs = std::move(dprev);
        }
    }
    return dinputs;
}

} // namespace lure
