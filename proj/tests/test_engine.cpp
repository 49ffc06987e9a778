#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lure/errors.hpp"
#include "lure/network.hpp"
#include "test_util.hpp"

using namespace lure;
using namespace lure::testutil;

namespace {

Network make_net(std::vector<std::size_t> dims, std::uint64_t seed) {
    Rng rng(seed);
    return Network(NetworkSpec{std::move(dims)}, rng);
}

void set_all(Network& net, double value) {
    for (auto& e : net.params().entries()) {
        std::fill(e.values.data.begin(), e.values.data.end(), value);
    }
}

} // namespace

TEST_CASE("forward: all-zero parameters map any input to zero logits") {
    Network net = make_net({3, 4, 2}, 1);
    set_all(net, 0.0);
    Tensor x = Tensor::zeros({5, 3});
    Rng rng(7);
    for (double& v : x.data) v = rng.uniform(-2.0, 2.0);
    const Tensor logits = net.forward_pure(x);
    for (double v : logits.data) CHECK(v == 0.0);
}

TEST_CASE("forward: stacked identity layers pass a positive input through") {
    Network net = make_net({2, 2, 2}, 1);
    for (auto& e : net.params().entries()) {
        std::fill(e.values.data.begin(), e.values.data.end(), 0.0);
        if (e.kind == ParamKind::Weight) {
            e.values.at(0, 0) = 1.0;
            e.values.at(1, 1) = 1.0;
        }
    }
    const Tensor logits = net.forward_pure(Tensor({1, 2}, {1.0, 2.0}));
    CHECK(logits.data[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(logits.data[1] == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("forward matches an independently hand-rolled dense oracle") {
    Network net = make_net({4, 6, 3}, 42);
    Rng rng(43);
    Tensor x = Tensor::zeros({7, 4});
    for (double& v : x.data) v = rng.gaussian(0.0, 1.0);
    const Tensor logits = net.forward_pure(x);

    // Oracle: naive per-output dot products, written without the engine's
    // loop structure.
    const auto& w1 = net.params().entries()[0].values;
    const auto& b1 = net.params().entries()[1].values;
    const auto& w2 = net.params().entries()[2].values;
    const auto& b2 = net.params().entries()[3].values;
    for (std::size_t r = 0; r < 7; ++r) {
        std::vector<double> hidden(6);
        for (std::size_t j = 0; j < 6; ++j) {
            double acc = b1.data[j];
            for (std::size_t k = 0; k < 4; ++k) acc += x.at(r, k) * w1.at(k, j);
            hidden[j] = std::max(acc, 0.0);
        }
        for (std::size_t j = 0; j < 3; ++j) {
            double acc = b2.data[j];
            for (std::size_t k = 0; k < 6; ++k) acc += hidden[k] * w2.at(k, j);
            CHECK(rel_err(logits.at(r, j), acc) < 1e-12);
        }
    }
}

TEST_CASE("forward rejects mismatched input width") {
    Network net = make_net({3, 4, 2}, 1);
    CHECK_THROWS_AS(net.forward_pure(Tensor::zeros({2, 5})), ConfigError);
}

TEST_CASE("loss_ce: uniform logits give exactly ln C") {
    const std::size_t C = 10;
    Tensor logits = Tensor::zeros({3, C});
    const LossResult res = softmax_cross_entropy(logits, {0, 5, 9});
    CHECK(res.loss == std::log(static_cast<double>(C)));
    CHECK(res.loss == doctest::Approx(2.302585).epsilon(1e-6));
}

TEST_CASE("loss_ce: loss vanishes as the correct-class margin grows") {
    double prev = 1e300;
    for (double margin : {2.0, 8.0, 32.0}) {
        Tensor logits = Tensor::zeros({1, 4});
        logits.at(0, 2) = margin;
        const LossResult res = softmax_cross_entropy(logits, {2});
        CHECK(res.loss < prev);
        prev = res.loss;
    }
    CHECK(prev < 1e-10);
}

TEST_CASE("loss_ce: nonnegative, and softmax rows sum to one") {
    Rng rng(11);
    Tensor logits = Tensor::zeros({16, 5});
    for (double& v : logits.data) v = rng.gaussian(0.0, 3.0);
    std::vector<int> labels(16);
    for (auto& y : labels) y = static_cast<int>(rng.uniform_index(5));
    CHECK(softmax_cross_entropy(logits, labels).loss >= 0.0);
    const Tensor probs = softmax_rows(logits);
    for (std::size_t r = 0; r < 16; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < 5; ++c) {
            sum += probs.at(r, c);
            CHECK(probs.at(r, c) >= 0.0);
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("loss_ce rejects out-of-range labels") {
    Tensor logits = Tensor::zeros({2, 3});
    CHECK_THROWS_AS(softmax_cross_entropy(logits, {0, 3}), InputError);
    CHECK_THROWS_AS(softmax_cross_entropy(logits, {-1, 0}), InputError);
}

TEST_CASE("loss_ce gradient matches central finite differences of the loss") {
    Rng rng(17);
    Tensor logits = Tensor::zeros({6, 4});
    for (double& v : logits.data) v = rng.gaussian(0.0, 2.0);
    std::vector<int> labels{0, 1, 2, 3, 1, 2};
    const LossResult res = softmax_cross_entropy(logits, labels);
    const double h = 1e-6;
    for (std::size_t i = 0; i < logits.data.size(); ++i) {
        const double saved = logits.data[i];
        logits.data[i] = saved + h;
        const double up = softmax_cross_entropy(logits, labels).loss;
        logits.data[i] = saved - h;
        const double down = softmax_cross_entropy(logits, labels).loss;
        logits.data[i] = saved;
        const double fd = (up - down) / (2.0 * h);
        CHECK(rel_err(res.dlogits.data[i], fd, 1e-6) < 1e-6);
    }
}

TEST_CASE("backward: zero dlogits give zero gradients") {
    Network net = make_net({3, 5, 2}, 3);
    Rng rng(4);
    Tensor x = Tensor::zeros({4, 3});
    for (double& v : x.data) v = rng.gaussian(0.0, 1.0);
    net.forward(x);
    net.backward(x, Tensor::zeros({4, 2}));
    for (double g : flat_gradients(net)) CHECK(g == 0.0);
}

TEST_CASE("backward: hand-derived gradient on a single active weight") {
    // Logits [w*x, 0] with label 0: dL/dw = x * (p0 - 1).
    Network net = make_net({1, 2, 2}, 5);
    for (auto& e : net.params().entries()) {
        std::fill(e.values.data.begin(), e.values.data.end(), 0.0);
    }
    const double w = 0.7, x = 1.3;
    net.params().entries()[0].values.at(0, 0) = w;     // input -> hidden unit 0
    net.params().entries()[2].values.at(0, 0) = 1.0;   // hidden unit 0 -> class 0
    const Tensor input({1, 1}, {x});
    const Tensor logits = net.forward(input);
    CHECK(logits.at(0, 0) == doctest::Approx(w * x));
    CHECK(logits.at(0, 1) == 0.0);
    const LossResult res = softmax_cross_entropy(logits, {0});
    net.backward(input, res.dlogits);
    const double p0 = std::exp(w * x) / (std::exp(w * x) + 1.0);
    const double dw = net.params().entries()[0].gradient.at(0, 0);
    CHECK(rel_err(dw, x * (p0 - 1.0)) < 1e-12);
}

TEST_CASE("backward matches finite differences on a random MLP") {
    Network net = make_net({4, 8, 6, 3}, 21);
    Rng rng(22);
    const Dataset batch = random_batch(6, 4, 3, rng);
    const Tensor logits = net.forward(batch.inputs);
    const LossResult res = softmax_cross_entropy(logits, batch.labels);
    net.backward(batch.inputs, res.dlogits);
    const std::vector<double> analytic = flat_gradients(net);
    const std::vector<double> fd = fd_gradient(net, batch.inputs, batch.labels);
    REQUIRE(analytic.size() == fd.size());
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        CHECK(rel_err(analytic[i], fd[i], 1e-7) < 1e-5);
    }
}

TEST_CASE("backward overwrites gradients instead of accumulating") {
    Network net = make_net({2, 4, 2}, 31);
    Rng rng(32);
    const Dataset batch = random_batch(3, 2, 2, rng);
    const Tensor logits = net.forward(batch.inputs);
    const LossResult res = softmax_cross_entropy(logits, batch.labels);
    net.backward(batch.inputs, res.dlogits);
    const std::vector<double> first = flat_gradients(net);
    net.backward(batch.inputs, res.dlogits);
    CHECK(flat_gradients(net) == first);
}

TEST_CASE("backward without a matching forward is a protocol error") {
    Network net = make_net({2, 4, 2}, 31);
    CHECK_THROWS_AS(net.backward(Tensor::zeros({1, 2}), Tensor::zeros({1, 2})), ProtocolError);
    Rng rng(9);
    const Dataset batch = random_batch(3, 2, 2, rng);
    net.forward(batch.inputs);
    Tensor other = batch.inputs;
    other.data[0] += 1.0;
    CHECK_THROWS_AS(net.backward(other, Tensor::zeros({3, 2})), ProtocolError);
}

TEST_CASE("sgd_step: plain gradient step") {
    NetworkSpec spec{{1, 1, 1}};
    ParameterSet params;
    params.add_entry(1, ParamKind::Weight, Tensor({1, 1}, {1.0}));
    params.entries()[0].gradient.data[0] = 2.0;
    OptimizerConfig opt;
    opt.momentum = 0.0;
    opt.weight_decay = 0.0;
    sgd_step(params, opt, 0.1);
    CHECK(params.entries()[0].values.data[0] == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("sgd_step: zero gradient from rest is a fixed point for any momentum") {
    for (double momentum : {0.0, 0.5, 0.9}) {
        ParameterSet params;
        params.add_entry(1, ParamKind::Weight, Tensor({1, 1}, {1.5}));
        OptimizerConfig opt;
        opt.momentum = momentum;
        opt.weight_decay = 0.0;
        sgd_step(params, opt, 0.1);
        sgd_step(params, opt, 0.1);
        CHECK(params.entries()[0].values.data[0] == 1.5);
    }
}

TEST_CASE("sgd_step: two heavy-ball steps match the hand recursion") {
    ParameterSet params;
    params.add_entry(1, ParamKind::Weight, Tensor({1, 1}, {1.0}));
    OptimizerConfig opt;
    opt.momentum = 0.9;
    opt.weight_decay = 0.0;
    const double g = 0.5, lr = 0.1;
    params.entries()[0].gradient.data[0] = g;
    sgd_step(params, opt, lr);
    // buf1 = g; theta1 = 1 - lr*g
    CHECK(params.entries()[0].values.data[0] == doctest::Approx(1.0 - lr * g).epsilon(1e-15));
    params.entries()[0].gradient.data[0] = g;
    sgd_step(params, opt, lr);
    // buf2 = 0.9*g + g; theta2 = theta1 - lr*buf2
    CHECK(params.entries()[0].values.data[0] ==
          doctest::Approx(1.0 - lr * g - lr * (0.9 * g + g)).epsilon(1e-15));
}

TEST_CASE("sgd_step: weight decay shrinks parameters with zero gradient") {
    ParameterSet params;
    params.add_entry(1, ParamKind::Weight, Tensor({1, 1}, {2.0}));
    params.add_entry(1, ParamKind::Bias, Tensor({1}, {2.0}));
    OptimizerConfig opt;
    opt.momentum = 0.0;
    opt.weight_decay = 0.1;
    opt.weight_decay_on_bias = true;
    sgd_step(params, opt, 1.0);
    CHECK(params.entries()[0].values.data[0] == doctest::Approx(1.8));
    CHECK(params.entries()[1].values.data[0] == doctest::Approx(1.8));

    // and biases are skipped when the flag is off
    ParameterSet p2;
    p2.add_entry(1, ParamKind::Weight, Tensor({1, 1}, {2.0}));
    p2.add_entry(1, ParamKind::Bias, Tensor({1}, {2.0}));
    OptimizerConfig opt2 = opt;
    opt2.weight_decay_on_bias = false;
    sgd_step(p2, opt2, 1.0);
    CHECK(p2.entries()[0].values.data[0] == doctest::Approx(1.8));
    CHECK(p2.entries()[1].values.data[0] == 2.0);
}

TEST_CASE("sgd strictly decreases loss on a convex softmax-regression instance") {
    // One trainable layer (hidden layer pinned to identity) => convex in the
    // trained parameters.
    Network net = make_net({2, 2, 2}, 77);
    for (auto& e : net.params().entries()) {
        std::fill(e.values.data.begin(), e.values.data.end(), 0.0);
    }
    net.params().entries()[0].values.at(0, 0) = 1.0;
    net.params().entries()[0].values.at(1, 1) = 1.0;
    const Tensor x({4, 2}, {1.0, 0.2, 0.8, 0.1, 0.1, 0.9, 0.2, 1.1});
    const std::vector<int> y{0, 0, 1, 1};
    OptimizerConfig opt;
    opt.momentum = 0.0;
    opt.weight_decay = 0.0;

    double prev = 1e300;
    for (int step = 0; step < 20; ++step) {
        const Tensor logits = net.forward(x);
        const LossResult res = softmax_cross_entropy(logits, y);
        CHECK(res.loss < prev);
        prev = res.loss;
        // freeze layer 1: only the output layer takes the step
        Tensor w1 = net.params().entries()[0].values;
        Tensor b1 = net.params().entries()[1].values;
        net.backward(x, res.dlogits);
        sgd_step(net.params(), opt, 0.1);
        net.params().entries()[0].values = w1;
        net.params().entries()[1].values = b1;
    }
}

TEST_CASE("lr_at follows the step schedule") {
    OptimizerConfig opt;
    opt.learning_rate = 0.1;
    opt.lr_steps = {20, 40};
    opt.lr_gamma = 0.1;
    CHECK(lr_at(opt, 0) == doctest::Approx(0.1));
    CHECK(lr_at(opt, 19) == doctest::Approx(0.1));
    CHECK(lr_at(opt, 25) == doctest::Approx(0.01));
    CHECK(lr_at(opt, 45) == doctest::Approx(0.001));

    opt.lr_gamma = 1.0;
    CHECK(lr_at(opt, 45) == doctest::Approx(0.1));
}

TEST_CASE("init_uniform: bounds, moments, determinism") {
    Rng rng(101);
    const Tensor t1 = init_uniform({100}, 1, rng);
    for (double v : t1.data) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }

    Rng rng2(202);
    const std::size_t n = 100000;
    const Tensor big = init_uniform({n}, 4, rng2);
    double mean = 0.0;
    for (double v : big.data) mean += v;
    mean /= static_cast<double>(n);
    const double b = 0.5; // 1/sqrt(4)
    const double sigma = 2.0 * b / std::sqrt(12.0);
    CHECK(std::abs(mean) < 3.0 * sigma / std::sqrt(static_cast<double>(n)));
    double var = 0.0;
    for (double v : big.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n - 1);
    CHECK(var == doctest::Approx(sigma * sigma).epsilon(0.05));

    Rng a(303), bgen(303);
    CHECK(init_uniform({17}, 3, a).data == init_uniform({17}, 3, bgen).data);
}

TEST_CASE("determinism: identical seeds give bitwise identical training") {
    auto train_once = [] {
        Rng init(5);
        Network net(NetworkSpec{{3, 6, 2}}, init);
        Rng data_rng(6);
        const Dataset batch = random_batch(12, 3, 2, data_rng);
        OptimizerConfig opt;
        for (int step = 0; step < 10; ++step) {
            const Tensor logits = net.forward(batch.inputs);
            const LossResult res = softmax_cross_entropy(logits, batch.labels);
            net.backward(batch.inputs, res.dlogits);
            sgd_step(net.params(), opt, lr_at(opt, 0));
        }
        return flat_values(net);
    };
    CHECK(train_once() == train_once());
}

TEST_CASE("engine outputs stay finite on finite inputs") {
    Network net = make_net({3, 16, 16, 4}, 55);
    Rng rng(56);
    const Dataset batch = random_batch(32, 3, 4, rng);
    const Tensor logits = net.forward(batch.inputs);
    for (double v : logits.data) CHECK(std::isfinite(v));
    const LossResult res = softmax_cross_entropy(logits, batch.labels);
    CHECK(std::isfinite(res.loss));
    net.backward(batch.inputs, res.dlogits);
    for (double g : flat_gradients(net)) CHECK(std::isfinite(g));
}
