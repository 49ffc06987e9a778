#include "lure/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "lure/errors.hpp"

namespace lure {

void TrainConfig::validate(std::size_t layer_count) const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    optimizer.validate();
    strategy.validate(layer_count);
    if (replay.mode == ReplayMode::Buffered && replay.capacity < 1) {
        throw ConfigError("buffered replay needs capacity >= 1");
    }
    if (ece_bins < 1) throw ConfigError("ece_bins must be >= 1");
}

EvalResult evaluate(const Network& net, const Dataset& data, std::size_t batch_size) {
    if (data.size() == 0) throw InputError("evaluate: empty dataset");
    EvalResult res;
    res.confidences.reserve(data.size());
    res.correctness.reserve(data.size());
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < data.size(); begin += batch_size) {
        const std::size_t end = std::min(begin + batch_size, data.size());
        std::vector<std::size_t> rows(end - begin);
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = begin + i;
        const Dataset batch = data.select(rows);
        const Tensor logits = net.forward_pure(batch.inputs);
        const Tensor probs = softmax_rows(logits);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            std::size_t arg = 0;
            for (std::size_t j = 1; j < logits.cols(); ++j) {
                if (logits.at(i, j) > logits.at(i, arg)) arg = j; // ties keep the lower index
            }
            const bool ok = static_cast<int>(arg) == batch.labels[i];
            correct += ok ? 1 : 0;
            res.confidences.push_back(probs.at(i, arg));
            res.correctness.push_back(ok ? 1 : 0);
        }
    }
    res.error_count = data.size() - correct;
    res.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    return res;
}

double train_megabatch(Network& net, const Dataset& data, const TrainConfig& config,
                       Rng& shuffle_rng, std::size_t megabatch_index) {
    if (data.size() == 0) throw InputError("train_megabatch: empty training set");
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = lr_at(config.optimizer, epoch);
        shuffle_rng.shuffle(order);
        std::size_t step = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size, ++step) {
            const std::size_t end = std::min(begin + config.batch_size, order.size());
            const std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                                order.begin() + static_cast<std::ptrdiff_t>(end));
            const Dataset batch = data.select(rows);
            try {
                const Tensor logits = net.forward(batch.inputs);
                const LossResult loss = softmax_cross_entropy(logits, batch.labels);
                if (!std::isfinite(loss.loss)) throw InputError("training loss became non-finite");
                net.backward(batch.inputs, loss.dlogits);
                sgd_step(net.params(), config.optimizer, lr);
            } catch (const InputError& e) {
                throw InputError(std::string(e.what()) + " (mega-batch " +
                                 std::to_string(megabatch_index) + ", epoch " +
                                 std::to_string(epoch) + ", step " + std::to_string(step) + ")");
            }
        }
    }
    return evaluate(net, data).accuracy;
}

ExperimentResult run_alma(const MegaBatchStream& stream, const NetworkSpec& spec,
                          const TrainConfig& config) {
    spec.validate();
    config.validate(spec.layer_count());
    if (stream.length() == 0) throw InputError("run_alma: empty stream");

    Rng init_rng(config.seeds.init);
    Rng strategy_rng(config.seeds.strategy);
    Rng shuffle_rng(config.seeds.shuffle);
    // The raw data seed already drove stream construction in the caller; the
    // buffer gets a derived stream so the draws never overlap.
    std::uint64_t buffer_seed_state = config.seeds.data;
    Rng buffer_rng(splitmix64(buffer_seed_state));

    Network net(spec, init_rng);
    const MaskableLayout layout(net.params(), config.mask_include_biases);

    ReplayBuffer buffer;
    if (config.replay.mode == ReplayMode::Buffered) {
        buffer = ReplayBuffer(config.replay.capacity, stream.test.class_count);
    }

    ExperimentResult result;
    result.layer_ranges = layout.layer_ranges();
    const std::size_t t = stream.length();
    std::size_t cumulative_errors = 0;

    for (std::size_t i = 1; i <= t; ++i) {
        const auto started = std::chrono::steady_clock::now();
        const Dataset training_set = assemble_training_set(stream, i, config.replay, buffer);

        if (config.reset_optimizer_per_megabatch) net.params().zero_momentum();
        const double train_acc = train_megabatch(net, training_set, config, shuffle_rng, i);

        const EvalResult test_eval = evaluate(net, stream.test);
        const EvalResult val_eval = evaluate(net, stream.at(i).val);
        cumulative_errors += test_eval.error_count;

        MetricsRecord rec;
        rec.megabatch_index = i;
        rec.test_accuracy = test_eval.accuracy;
        rec.error_count = test_eval.error_count;
        rec.cumulative_cer = cumulative_errors;
        rec.train_accuracy = train_acc;
        rec.val_accuracy = val_eval.accuracy;
        rec.generalization_gap = generalization_gap(train_acc, val_eval.accuracy);
        rec.ece = ece(test_eval.confidences, test_eval.correctness, config.ece_bins);
        rec.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        result.records.push_back(rec);
        result.checkpoints.push_back(net.params());

        // Unlearn between mega-batches only: never before the first, never
        // after the last.
        if (i < t) {
            std::size_t modified = 0;
            switch (config.strategy.kind) {
                case StrategyKind::WarmStart:
                    modified = apply_warm(net.params());
                    break;
                case StrategyKind::ColdStart:
                    modified = apply_cold(net.params(), spec, strategy_rng);
                    break;
                case StrategyKind::Rifle:
                    modified = apply_rifle(net.params(), spec, strategy_rng);
                    break;
                case StrategyKind::Llf: {
                    const std::size_t split = config.strategy.split_layer != 0
                                                  ? config.strategy.split_layer
                                                  : spec.layer_count() / 2 + 1 + spec.layer_count() % 2;
                    modified = apply_llf(net.params(), spec, split, strategy_rng);
                    break;
                }
                case StrategyKind::ShrinkPerturb:
                    modified = apply_shrink_perturb(net.params(), config.strategy.shrink,
                                                    config.strategy.noise_std,
                                                    config.strategy.perturb_biases, strategy_rng);
                    break;
                case StrategyKind::Lure: {
                    const Dataset pi = sample_subset(stream.at(i).train, config.subset, strategy_rng);
                    std::vector<double> scores;
                    switch (config.strategy.method) {
                        case ImportanceMethod::Snip:
                            scores = snip_sensitivity(net, pi, config.batch_size, layout);
                            break;
                        case ImportanceMethod::Fisher:
                            scores = fisher_importance(net, pi, config.batch_size, layout);
                            break;
                        case ImportanceMethod::Magnitude:
                            scores = magnitude_importance(net.params(), layout);
                            break;
                        case ImportanceMethod::Random:
                            scores = random_importance(layout.size(), strategy_rng);
                            break;
                    }
                    SensitivityMask mask = topk_mask(normalize_saliency(scores), config.strategy.retention);
                    modified = apply_lure(net.params(), spec, mask, layout, strategy_rng);
                    result.masks.push_back(std::move(mask));
                    break;
                }
            }
            result.applications.push_back({i, config.strategy.name(), modified});
            net.invalidate_cache();
        }

        if (config.replay.mode == ReplayMode::Buffered) {
            buffer.update(stream.at(i).train, i, buffer_rng);
        }
    }
    result.final_network = std::move(net);
    return result;
}

} // namespace lure
