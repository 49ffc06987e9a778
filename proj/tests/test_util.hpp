#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "lure/dataset.hpp"
#include "lure/network.hpp"

namespace lure::testutil {

inline double rel_err(double got, double want, double abs_floor = 1e-9) {
    const double scale = std::max({std::abs(got), std::abs(want), abs_floor});
    return std::abs(got - want) / scale;
}

/// Scalar loss of the net on a fixed batch, as a pure function of the
/// current parameters. The target for finite differencing.
inline double batch_loss(Network& net, const Tensor& inputs, const std::vector<int>& labels) {
    const Tensor logits = net.forward_pure(inputs);
    return softmax_cross_entropy(logits, labels).loss;
}

/// Central finite difference of batch_loss with respect to every parameter.
inline std::vector<double> fd_gradient(Network& net, const Tensor& inputs,
                                       const std::vector<int>& labels, double h = 1e-6) {
    std::vector<double> grad;
    for (auto& entry : net.params().entries()) {
        for (double& theta : entry.values.data) {
            const double saved = theta;
            theta = saved + h;
            const double up = batch_loss(net, inputs, labels);
            theta = saved - h;
            const double down = batch_loss(net, inputs, labels);
            theta = saved;
            grad.push_back((up - down) / (2.0 * h));
        }
    }
    return grad;
}

/// Flat copy of all parameter gradients in entry order.
inline std::vector<double> flat_gradients(const Network& net) {
    std::vector<double> out;
    for (const auto& entry : net.params().entries()) {
        out.insert(out.end(), entry.gradient.data.begin(), entry.gradient.data.end());
    }
    return out;
}

inline std::vector<double> flat_values(const Network& net) {
    std::vector<double> out;
    for (const auto& entry : net.params().entries()) {
        out.insert(out.end(), entry.values.data.begin(), entry.values.data.end());
    }
    return out;
}

/// Random batch with labels, inputs from a unit gaussian.
inline Dataset random_batch(std::size_t n, std::size_t dim, int classes, Rng& rng) {
    Dataset d;
    d.class_count = classes;
    d.inputs = Tensor::zeros({n, dim});
    for (double& v : d.inputs.data) v = rng.gaussian(0.0, 1.0);
    d.labels.resize(n);
    for (auto& y : d.labels) y = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(classes)));
    return d;
}

} // namespace lure::testutil
