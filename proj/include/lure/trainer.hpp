#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lure/dataset.hpp"
#include "lure/metrics.hpp"
#include "lure/network.hpp"
#include "lure/reinit.hpp"
#include "lure/stream.hpp"

namespace lure {

struct TrainConfig {
    std::size_t epochs = 50;
    std::size_t batch_size = 64;
    OptimizerConfig optimizer;
    Strategy strategy;
    ReplayPolicy replay = ReplayPolicy::full();
    SubsetSpec subset;
    bool mask_include_biases = true;
    /// Fresh optimizer state at every mega-batch boundary; the LR schedule
    /// restarts regardless.
    bool reset_optimizer_per_megabatch = true;
    std::size_t ece_bins = 15;

    SeedStreams seeds = SeedStreams::from_master(1);

    void validate(std::size_t layer_count) const;
};

struct EvalResult {
    double accuracy = 0.0;
    std::size_t error_count = 0;
    std::vector<double> confidences;       // max softmax probability per row
    std::vector<std::uint8_t> correctness; // 1 if argmax == label
};

/// Argmax evaluation with ties broken toward the lower class index.
EvalResult evaluate(const Network& net, const Dataset& data, std::size_t batch_size = 512);

struct StrategyApplication {
    std::size_t megabatch_index = 0; // strategy applied after this mega-batch
    std::string strategy;
    std::size_t modified_params = 0;
};

struct ExperimentResult {
    std::vector<MetricsRecord> records;
    /// Parameter snapshot taken right after evaluation of each mega-batch
    /// (before the strategy ran), for checkpoint archiving and recounts.
    std::vector<ParameterSet> checkpoints;
    /// Masks produced by the LURE path, in application order.
    std::vector<SensitivityMask> masks;
    std::vector<StrategyApplication> applications;
    Network final_network;
    std::vector<MaskableLayout::LayerRange> layer_ranges;
};

/// One pass of the anytime-learning protocol over the stream: train on each
/// mega-batch under the replay policy, evaluate, then (between mega-batches
/// only) estimate importance on pi and apply the strategy. The replay buffer
/// absorbs the finished train split after the strategy runs.
ExperimentResult run_alma(const MegaBatchStream& stream, const NetworkSpec& spec,
                          const TrainConfig& config);

/// `epochs` full passes of mini-batch SGD with a per-epoch reshuffle; the
/// final partial mini-batch is trained on. Returns train accuracy measured
/// on `data` after the last epoch.
double train_megabatch(Network& net, const Dataset& data, const TrainConfig& config,
                       Rng& shuffle_rng, std::size_t megabatch_index = 0);

} // namespace lure
