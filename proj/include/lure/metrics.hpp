#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lure/dataset.hpp"
#include "lure/network.hpp"
#include "lure/saliency.hpp"

namespace lure {

/// Per-mega-batch results row.
struct MetricsRecord {
    std::size_t megabatch_index = 0; // 1-based
    double test_accuracy = 0.0;
    std::size_t error_count = 0;
    std::size_t cumulative_cer = 0;
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
    double generalization_gap = 0.0; // train_accuracy - val_accuracy
    double ece = 0.0;
    double wall_time_s = 0.0;
};

/// Prefix sums of per-mega-batch test error counts.
std::vector<std::size_t> cer(const std::vector<std::size_t>& error_counts);

double generalization_gap(double train_acc, double val_acc);

/// Expected calibration error over equal-width right-inclusive bins on
/// [0, 1]; empty bins contribute zero.
double ece(const std::vector<double>& confidences, const std::vector<std::uint8_t>& correctness,
           std::size_t n_bins);

/// Layer-wise retained-parameter overlap between consecutive masks. The
/// denominator is the previous mask's retained count inside the layer, so
/// the metric is deliberately asymmetric; layers where the previous mask
/// retains nothing are reported as absent.
struct OverlapReport {
    struct Layer {
        std::size_t layer = 0;
        std::optional<double> overlap_pct; // in [0, 100]
    };
    std::vector<Layer> layers;
};

OverlapReport mask_overlap(const SensitivityMask& prev, const SensitivityMask& curr,
                           const std::vector<MaskableLayout::LayerRange>& layer_ranges);

struct PgdConfig {
    double epsilon = 0.03;
    double step_size = 0.0; // 0 selects the 2.5 * eps / steps default
    std::size_t steps = 10;
    bool clip01 = false; // clamp to [0,1] for pixel-scaled inputs

    double effective_step() const {
        return step_size > 0.0 ? step_size : 2.5 * epsilon / static_cast<double>(steps);
    }
};

/// L-infinity PGD with one uniform random start inside the epsilon ball.
/// The returned batch always satisfies max|x_adv - x| <= epsilon.
Tensor pgd_attack(Network& net, const Tensor& inputs, const std::vector<int>& labels,
                  const PgdConfig& config, Rng& rng);

/// Accuracy on PGD-perturbed inputs, attacked in mini-batches.
double adversarial_accuracy(Network& net, const Dataset& data, const PgdConfig& config, Rng& rng,
                            std::size_t batch_size = 256);

/// Fresh copy of the network with i.i.d. Normal(0, noise_std^2) added to
/// every parameter; the source is untouched.
Network perturb_parameters(const Network& net, double noise_std, Rng& rng);

enum class CorruptionKind : std::uint8_t { GaussianNoise = 0, UniformNoise = 1, FeatureDropout = 2 };

std::string corruption_kind_name(CorruptionKind kind);
CorruptionKind corruption_kind_from_name(const std::string& name);

/// Severity 1..5 maps linearly to the corruption scale: gaussian sigma and
/// uniform amplitude are 0.1 * severity, dropout probability is
/// 0.1 * severity.
double corruption_scale(CorruptionKind kind, int severity);

Tensor corrupt_inputs(const Tensor& inputs, CorruptionKind kind, int severity, Rng& rng);

/// Mean corruption accuracy over the kinds x severities grid.
double mean_corruption_accuracy(Network& net, const Dataset& data,
                                const std::vector<CorruptionKind>& kinds,
                                const std::vector<int>& severities, Rng& rng);

} // namespace lure
